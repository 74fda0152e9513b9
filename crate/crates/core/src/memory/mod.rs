//! Semantic and episodic memory with BM25 retrieval and JSONL persistence.

mod bm25;

pub use bm25::{tokenize, Bm25Index, Bm25Params};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("unknown memory id `{0}`")]
    UnknownId(String),
    #[error("duplicate memory id `{0}`")]
    DuplicateId(String),
    #[error("memory text must not be empty")]
    EmptyText,
    #[error("malformed memory record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid retrieval config: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    Semantic,
    Episodic,
}

impl std::str::FromStr for MemoryKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "semantic" => Ok(MemoryKind::Semantic),
            "episodic" => Ok(MemoryKind::Episodic),
            other => Err(format!("unknown memory kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemorySource {
    Human,
    SelfLearned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryItem {
    pub id: String,
    pub kind: MemoryKind,
    pub text: String,
    pub source: MemorySource,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k1: f64,
    pub b: f64,
    /// Maximum number of items to return; zero disables retrieval.
    pub n: usize,
    /// When false, self-learned items are invisible to retrieval.
    pub include_self_learned: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k1: 1.2,
            b: 0.75,
            n: 2,
            include_self_learned: true,
        }
    }
}

impl RetrievalConfig {
    pub fn top(n: usize) -> Self {
        RetrievalConfig {
            n,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(MemoryError::Config(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(MemoryError::Config(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMemory {
    pub item: MemoryItem,
    pub score: f64,
}

/// Insertion-ordered memory store. Single writer, many readers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryStore {
    items: Vec<MemoryItem>,
    next_id: u64,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh_id(&mut self) -> String {
        loop {
            self.next_id += 1;
            let id = format!("m{:05}", self.next_id);
            if !self.items.iter().any(|i| i.id == id) {
                return id;
            }
        }
    }

    /// Add a new item with a generated id and the current time.
    pub fn add(
        &mut self,
        kind: MemoryKind,
        text: impl Into<String>,
        source: MemorySource,
    ) -> Result<String, MemoryError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(MemoryError::EmptyText);
        }
        let id = self.fresh_id();
        self.items.push(MemoryItem {
            id: id.clone(),
            kind,
            text,
            source,
            created_at: Utc::now(),
        });
        Ok(id)
    }

    /// Insert a fully specified item (e.g. from a fixture).
    pub fn insert(&mut self, item: MemoryItem) -> Result<String, MemoryError> {
        if item.text.trim().is_empty() {
            return Err(MemoryError::EmptyText);
        }
        if self.items.iter().any(|i| i.id == item.id) {
            return Err(MemoryError::DuplicateId(item.id));
        }
        if let Some(n) = item.id.strip_prefix('m').and_then(|s| s.parse::<u64>().ok()) {
            self.next_id = self.next_id.max(n);
        }
        let id = item.id.clone();
        self.items.push(item);
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<&MemoryItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn list(&self, kind: MemoryKind) -> Vec<&MemoryItem> {
        self.items.iter().filter(|i| i.kind == kind).collect()
    }

    pub fn all(&self) -> &[MemoryItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn remove(&mut self, id: &str) -> Result<MemoryItem, MemoryError> {
        let pos = self
            .items
            .iter()
            .position(|i| i.id == id)
            .ok_or_else(|| MemoryError::UnknownId(id.to_string()))?;
        Ok(self.items.remove(pos))
    }

    /// Top-`n` items of `kind` by BM25 score against `query`. Ties keep
    /// insertion order; zero-score items are never returned.
    pub fn retrieve_scored(
        &self,
        kind: MemoryKind,
        query: &str,
        cfg: &RetrievalConfig,
    ) -> Vec<ScoredMemory> {
        if cfg.n == 0 {
            return Vec::new();
        }
        let corpus: Vec<&MemoryItem> = self
            .items
            .iter()
            .filter(|i| i.kind == kind)
            .filter(|i| cfg.include_self_learned || i.source == MemorySource::Human)
            .collect();
        let index = Bm25Index::new(corpus.iter().map(|i| i.text.as_str()));
        let scores = index.scores(query, Bm25Params { k1: cfg.k1, b: cfg.b });
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .collect();
        // stable sort keeps insertion order among equal scores
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked
            .into_iter()
            .take(cfg.n)
            .map(|(i, score)| ScoredMemory {
                item: corpus[i].clone(),
                score,
            })
            .collect()
    }

    pub fn retrieve(&self, kind: MemoryKind, query: &str, cfg: &RetrievalConfig) -> Vec<MemoryItem> {
        self.retrieve_scored(kind, query, cfg)
            .into_iter()
            .map(|s| s.item)
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("memory item serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, MemoryError> {
        let mut store = MemoryStore::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let item: MemoryItem =
                serde_json::from_str(line).map_err(|e| MemoryError::Malformed {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            store.insert(item).map_err(|e| MemoryError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(store)
    }

    pub fn persist(&self, path: &Path) -> Result<(), MemoryError> {
        let io = |source| MemoryError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(self.to_jsonl().as_bytes()).map_err(io)?;
        w.flush().map_err(io)
    }

    /// Load a JSONL store. A missing file is an error; an empty file is an
    /// empty store.
    pub fn load(path: &Path) -> Result<Self, MemoryError> {
        let io = |source| MemoryError::Io {
            path: path.display().to_string(),
            source,
        };
        let reader = BufReader::new(File::open(path).map_err(io)?);
        let mut text = String::new();
        for line in reader.lines() {
            text.push_str(&line.map_err(io)?);
            text.push('\n');
        }
        Self::from_jsonl(&text)
    }

    /// SHA-256 over the serialized store; equal hashes mean equal contents.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORPUS: [&str; 5] = [
        "The state column holds the two-letter mailing state of the customer",
        "Web destinations lists places the customer searched for, not where they live",
        "Propensity scores range from 0 to 100; use propensity_hotels for hotel bookings",
        "If the audience size is too small, lower the propensity threshold",
        "Gold tier loyalty members are stored in the loyalty_tier column",
    ];

    fn store() -> MemoryStore {
        let mut s = MemoryStore::new();
        for text in CORPUS {
            s.add(MemoryKind::Semantic, text, MemorySource::Human).unwrap();
        }
        s
    }

    // Frozen values from a by-hand application of the Okapi formula
    // (k1=1.2, b=0.75, idf = ln(1 + (N - df + .5) / (df + .5))) over CORPUS.
    #[test]
    fn bm25_matches_hand_computed_scores() {
        let s = store();
        let cases: [(&str, [f64; 5]); 3] = [
            (
                "customers who live in the state of NY",
                [3.7242955161789295, 1.6624494344116523, 0.0, 0.4032519762877015, 1.7217285346878206],
            ),
            (
                "hotel propensity above 75",
                [0.0, 0.0, 2.5012216510305922, 0.900442488974138, 0.0],
            ),
            (
                "The audience has at least 300 users",
                [0.45043586253608153, 0.2857010941410953, 0.0, 1.8290919768690155, 0.2958885341065068],
            ),
        ];
        let index = Bm25Index::new(CORPUS);
        for (query, expected) in cases {
            let got = index.scores(query, Bm25Params::default());
            for (g, e) in got.iter().zip(expected) {
                assert!((g - e).abs() < 1e-9, "{query}: {g} vs {e}");
            }
            let ranked = s.retrieve_scored(MemoryKind::Semantic, query, &RetrievalConfig::top(5));
            let mut order: Vec<usize> = (0..5).filter(|i| expected[*i] > 0.0).collect();
            order.sort_by(|a, b| expected[*b].total_cmp(&expected[*a]));
            let got_order: Vec<usize> = ranked
                .iter()
                .map(|r| CORPUS.iter().position(|t| *t == r.item.text).unwrap())
                .collect();
            assert_eq!(got_order, order, "{query}");
        }
    }

    #[test]
    fn zero_n_returns_nothing() {
        let s = store();
        assert!(s
            .retrieve(MemoryKind::Semantic, "state", &RetrievalConfig::top(0))
            .is_empty());
    }

    #[test]
    fn zero_scores_are_never_returned() {
        let s = store();
        let got = s.retrieve(MemoryKind::Semantic, "hotel", &RetrievalConfig::top(5));
        assert_eq!(got.len(), 1);
        assert!(s
            .retrieve(MemoryKind::Semantic, "zebra", &RetrievalConfig::top(5))
            .is_empty());
    }

    #[test]
    fn ties_keep_insertion_order() {
        let mut s = MemoryStore::new();
        let a = s.add(MemoryKind::Episodic, "size issue", MemorySource::Human).unwrap();
        let b = s.add(MemoryKind::Episodic, "size issue", MemorySource::Human).unwrap();
        let got = s.retrieve(MemoryKind::Episodic, "size", &RetrievalConfig::top(2));
        assert_eq!(got.iter().map(|i| &i.id).collect::<Vec<_>>(), vec![&a, &b]);
    }

    #[test]
    fn kinds_are_isolated() {
        let mut s = store();
        let before = s.retrieve(MemoryKind::Semantic, "audience size", &RetrievalConfig::top(5));
        s.add(MemoryKind::Episodic, "audience size too small: lower thresholds", MemorySource::Human)
            .unwrap();
        let after = s.retrieve(MemoryKind::Semantic, "audience size", &RetrievalConfig::top(5));
        assert_eq!(before, after);
        assert_eq!(s.list(MemoryKind::Episodic).len(), 1);
        assert!(s.list(MemoryKind::Episodic).iter().all(|i| i.kind == MemoryKind::Episodic));
    }

    #[test]
    fn self_learned_items_can_be_excluded() {
        let mut s = MemoryStore::new();
        s.add(MemoryKind::Semantic, "hotel tip", MemorySource::SelfLearned).unwrap();
        let cfg = RetrievalConfig {
            include_self_learned: false,
            ..RetrievalConfig::top(3)
        };
        assert!(s.retrieve(MemoryKind::Semantic, "hotel", &cfg).is_empty());
        assert_eq!(s.retrieve(MemoryKind::Semantic, "hotel", &RetrievalConfig::top(3)).len(), 1);
    }

    #[test]
    fn add_list_remove() {
        let mut s = MemoryStore::new();
        assert!(matches!(
            s.add(MemoryKind::Semantic, "  ", MemorySource::Human),
            Err(MemoryError::EmptyText)
        ));
        let id = s.add(MemoryKind::Semantic, "fact", MemorySource::Human).unwrap();
        assert_eq!(s.list(MemoryKind::Semantic)[0].id, id);
        assert!(s.list(MemoryKind::Episodic).is_empty());
        assert!(matches!(s.remove("nope"), Err(MemoryError::UnknownId(_))));
        s.remove(&id).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let s = store();
        let again = MemoryStore::from_jsonl(&s.to_jsonl()).unwrap();
        assert_eq!(again.all(), s.all());
        assert_eq!(again.content_hash(), s.content_hash());
        assert!(MemoryStore::from_jsonl("").unwrap().is_empty());
        let mut text = s.to_jsonl();
        let cut = text.len() - 10;
        text.truncate(cut);
        match MemoryStore::from_jsonl(&text) {
            Err(MemoryError::Malformed { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn loaded_store_continues_id_sequence() {
        let s = store();
        let mut again = MemoryStore::from_jsonl(&s.to_jsonl()).unwrap();
        let id = again.add(MemoryKind::Semantic, "new", MemorySource::Human).unwrap();
        assert_eq!(id, "m00006");
    }

    #[test]
    fn config_validation() {
        assert!(RetrievalConfig::default().validate().is_ok());
        assert!(RetrievalConfig { k1: 0.0, ..Default::default() }.validate().is_err());
        assert!(RetrievalConfig { b: 1.5, ..Default::default() }.validate().is_err());
    }
}
