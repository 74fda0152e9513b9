//! Shared fixtures for the criterion benches.

use ramp_core::eval::{generate_synthetic, GenConfig, SyntheticBench};
use ramp_core::memory::{MemoryKind, MemorySource, MemoryStore};

pub fn bench_fixture() -> SyntheticBench {
    generate_synthetic(&GenConfig::default(), 42).expect("default generator config is valid")
}

const WORDS: &[&str] = &[
    "hotel", "flight", "cruise", "loyalty", "tier", "gold", "state", "residence", "destination", "propensity",
    "recent", "booking", "days", "threshold", "audience", "small", "relax", "email", "opt", "in", "golf", "beach",
    "family", "spend", "active", "app", "login", "mobile", "segment", "value",
];

/// `n` memories per kind, with deterministic pseudo-random wording.
pub fn memory_fixture(n: usize) -> MemoryStore {
    let mut store = MemoryStore::new();
    let mut x: u64 = 0x9e37_79b9_7f4a_7c15;
    for kind in [MemoryKind::Semantic, MemoryKind::Episodic] {
        for _ in 0..n {
            let text: Vec<&str> = (0..12)
                .map(|_| {
                    x ^= x << 13;
                    x ^= x >> 7;
                    x ^= x << 17;
                    WORDS[(x % WORDS.len() as u64) as usize]
                })
                .collect();
            store.add(kind, text.join(" "), MemorySource::Human).expect("non-empty text");
        }
    }
    store
}
