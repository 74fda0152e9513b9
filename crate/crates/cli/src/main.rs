use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};

use ramp_cli::providers::ProviderSource;
use ramp_cli::server::{router, spawn_evictor, AppState};
use ramp_cli::settings::{CommonArgs, ProviderChoice, ServeArgs, Settings};
use ramp_core::eval::ablation::ScriptLibrary;
use ramp_core::eval::{generate_synthetic, load_cases, run_ablation, AblationConfig, GenConfig};
use ramp_core::memory::{MemoryKind, MemorySource, MemoryStore};
use ramp_core::orchestrator::{Session, SessionConfig, SessionDeps};
use ramp_core::table::CustomerTable;

#[derive(Parser)]
#[command(name = "ramp", version, about = "Plan, act, verify and reflect over a customer table")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start the JSON session service.
    Serve(ServeArgs),
    /// Load a table against its schema and print what the agents will see.
    Ingest,
    /// Run one query in auto mode and print the audience and report.
    Run(RunArgs),
    /// Run an ablation sweep over a benchmark directory.
    Bench(BenchArgs),
    /// Generate a synthetic table, cases and scripted responses.
    GenBench(GenArgs),
    /// Inspect or edit the memory store.
    Memory {
        #[command(subcommand)]
        action: MemoryAction,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    query: String,
    /// Date that relative criteria are anchored to (YYYY-MM-DD).
    #[arg(long)]
    today: NaiveDate,
    #[arg(long, default_value_t = 3)]
    max_iterations: usize,
    #[arg(long, default_value_t = 2)]
    n_semantic: usize,
    #[arg(long, default_value_t = 2)]
    n_episodic: usize,
    /// Store distilled insights as new semantic memories.
    #[arg(long)]
    self_learning: bool,
    /// Transcript `query_id` to replay with `--provider scripted`.
    #[arg(long)]
    script_id: Option<String>,
    /// Print the final session state as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Directory written by `gen-bench` (or laid out the same way).
    #[arg(long)]
    bench_dir: PathBuf,
    /// Ablation config (TOML); defaults to the built-in sweep.
    #[arg(long)]
    ablation: Option<PathBuf>,
    /// Where to write results CSVs and the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    rows: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Semantic,
    Episodic,
}

impl From<KindArg> for MemoryKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Semantic => MemoryKind::Semantic,
            KindArg::Episodic => MemoryKind::Episodic,
        }
    }
}

#[derive(Subcommand)]
enum MemoryAction {
    Add {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        text: String,
    },
    List {
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
    },
    Rm {
        id: String,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let serve_args = match &cli.command {
        Command::Serve(a) => a.clone(),
        _ => ServeArgs::default(),
    };
    let settings = Settings::resolve(&cli.common, &serve_args)?;
    match cli.command {
        Command::Serve(_) => serve(&settings),
        Command::Ingest => ingest(&settings),
        Command::Run(a) => run(&settings, a),
        Command::Bench(a) => bench(&settings, a),
        Command::GenBench(a) => gen_bench(a),
        Command::Memory { action } => memory(&settings, action),
    }
}

fn load_table(s: &Settings) -> anyhow::Result<CustomerTable> {
    let table = s.table.as_ref().context("--table is required")?;
    let schema = s.schema.as_ref().context("--schema is required")?;
    CustomerTable::load(table, schema).with_context(|| format!("loading {}", table.display()))
}

/// The store in `--memory-dir`, or an empty one when no directory is set or
/// the file does not exist yet.
fn load_memory(s: &Settings) -> anyhow::Result<MemoryStore> {
    match s.memory_file() {
        Some(path) if path.exists() => MemoryStore::load(&path).with_context(|| format!("loading {}", path.display())),
        _ => Ok(MemoryStore::new()),
    }
}

fn serve(s: &Settings) -> anyhow::Result<()> {
    let table = match (&s.table, &s.schema) {
        (Some(_), Some(_)) => Some(load_table(s)?),
        _ => {
            log::warn!("no table configured; session creation will fail until restarted with --table and --schema");
            None
        }
    };
    if let Some(dir) = &s.memory_dir {
        fs::create_dir_all(dir)?;
    }
    let providers = ProviderSource::from_settings(s)?;
    let state = Arc::new(AppState::new(table, load_memory(s)?, s.memory_file(), providers, s.session_ttl));
    let addr = format!("{}:{}", s.host, s.port);
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(async move {
            spawn_evictor(state.clone());
            let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on http://{addr}");
            axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
            Ok(())
        })
}

fn ingest(s: &Settings) -> anyhow::Result<()> {
    let table = load_table(s)?;
    println!("rows: {}", table.row_count());
    println!("columns: {}", table.schema().columns.len());
    println!("id column: {}", table.id_column());
    println!("\n{}", table.metadata_summary());
    Ok(())
}

fn run(s: &Settings, a: RunArgs) -> anyhow::Result<()> {
    let table = load_table(s)?;
    let memory = Arc::new(RwLock::new(load_memory(s)?));
    let llm = ProviderSource::from_settings(s)?
        .for_session(a.script_id.as_deref())
        .map_err(anyhow::Error::msg)?;
    let config = SessionConfig {
        n_semantic: a.n_semantic,
        n_episodic: a.n_episodic,
        max_iterations: a.max_iterations,
        self_learning: a.self_learning,
        model_id: s.model_id().to_string(),
        ..SessionConfig::new(a.today)
    };
    let deps = SessionDeps {
        table,
        memory: memory.clone(),
        llm,
    };
    let mut session = Session::start("cli", &a.query, config, deps)?;
    session.run_to_completion()?;
    if a.self_learning {
        if let Some(path) = s.memory_file() {
            memory.read().unwrap().persist(&path)?;
        }
    }

    let state = session.state();
    if a.json {
        println!("{}", serde_json::to_string_pretty(state)?);
        return Ok(());
    }
    println!("status: {:?} after {} iteration(s)", state.status, state.iteration);
    if let Some(e) = &state.error {
        println!("error in {:?}: {}", e.phase, e.message);
    }
    if let Some(plan) = &state.plan {
        println!("\nplan:\n{}", plan.numbered());
    }
    if let Some(report) = &state.report {
        println!("\nverification:");
        for r in &report.rules {
            println!("  [{:?}] {} ({})", r.result, r.rule_text, r.detail);
        }
    }
    println!("\naudience: {} users", state.audience_ids.len());
    for id in state.audience_ids.iter().take(20) {
        println!("  {id}");
    }
    if state.audience_ids.len() > 20 {
        println!("  ...");
    }
    Ok(())
}

fn bench(s: &Settings, a: BenchArgs) -> anyhow::Result<()> {
    let dir = &a.bench_dir;
    let mut cfg = match &a.ablation {
        Some(p) => AblationConfig::load(p)?,
        None => AblationConfig::default_sweep(),
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    let table = CustomerTable::load(
        s.table.as_deref().unwrap_or(&dir.join("table.csv")),
        s.schema.as_deref().unwrap_or(&dir.join("schema.json")),
    )?;
    let filter = load_cases(&dir.join("cases.jsonl"))?;
    let challenge_path = dir.join("challenge.jsonl");
    let challenge = if challenge_path.exists() {
        load_cases(&challenge_path)?
    } else {
        Vec::new()
    };
    let memory = match s.memory_file() {
        Some(p) => MemoryStore::load(&p)?,
        None => MemoryStore::load(&dir.join("memory.jsonl"))?,
    };

    let report = match s.provider {
        ProviderChoice::Scripted => {
            let lib = ScriptLibrary::load(dir)?;
            run_ablation(&cfg, &filter, &challenge, &table, &memory, "scripted", &|arm, case, _| {
                lib.provider(arm, case)
            })?
        }
        ProviderChoice::Live => {
            let live = ProviderSource::from_settings(s)?;
            run_ablation(&cfg, &filter, &challenge, &table, &memory, s.model_id(), &|_, _, _| {
                live.for_session(None)
            })?
        }
    };

    println!("{:<14} {:>6} {:>16} {:>16} {:>16} {:>8}", "strategy", "cases", "accuracy", "precision", "recall", "p");
    for r in &report.arms {
        let m = &r.report;
        let cases = m.per_case.len() / report.trials.max(1);
        let p = r.vs_baseline.map(|t| format!("{:.3}", t.p)).unwrap_or_else(|| "-".into());
        println!(
            "{:<14} {:>6} {:>16} {:>16} {:>16} {:>8}",
            r.arm.name,
            cases,
            m.accuracy.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            p
        );
    }
    for r in report.arms.iter().filter(|r| r.arm.max_iterations > 1 && r.arm.reflect) {
        let curve: Vec<String> = r.curve.iter().map(|c| format!("{:.3}", c.recall)).collect();
        println!("{} recall by iteration: {}", r.arm.name, curve.join(" -> "));
    }

    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        report.write_summary_csv(fs::File::create(out.join("results_summary.csv"))?)?;
        report.write_case_csv(fs::File::create(out.join("results_cases.csv"))?)?;
        fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        println!("results written to {}", out.display());
    }
    Ok(())
}

fn gen_bench(a: GenArgs) -> anyhow::Result<()> {
    let mut cfg = GenConfig::default();
    if let Some(rows) = a.rows {
        cfg.rows = rows;
    }
    let bench = generate_synthetic(&cfg, a.seed)?;
    bench.write_to(&a.out)?;
    let sizes = bench.gold_size_stats();
    println!(
        "wrote {} rows, {} filter cases, {} challenge cases to {} (gold size {})",
        bench.table.row_count(),
        bench.cases.len(),
        bench.challenges.len(),
        a.out.display(),
        sizes
    );
    Ok(())
}

fn memory_path(s: &Settings) -> anyhow::Result<PathBuf> {
    s.memory_file().context("--memory-dir is required")
}

fn memory(s: &Settings, action: MemoryAction) -> anyhow::Result<()> {
    let path = memory_path(s)?;
    let mut store = load_memory(s)?;
    match action {
        MemoryAction::Add { kind, text } => {
            let id = store.add(kind.into(), text, MemorySource::Human)?;
            save(&store, &path)?;
            println!("{id}");
        }
        MemoryAction::List { kind } => {
            let kinds: HashSet<MemoryKind> = match kind {
                Some(k) => [k.into()].into(),
                None => [MemoryKind::Semantic, MemoryKind::Episodic].into(),
            };
            for item in store.all().iter().filter(|i| kinds.contains(&i.kind)) {
                println!("{}\t{:?}\t{:?}\t{}", item.id, item.kind, item.source, item.text);
            }
        }
        MemoryAction::Rm { id } => {
            if store.get(&id).is_none() {
                bail!("unknown memory id `{id}`");
            }
            store.remove(&id)?;
            save(&store, &path)?;
        }
    }
    Ok(())
}

fn save(store: &MemoryStore, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    store.persist(path)?;
    Ok(())
}
