//! `kge`: reproducible fetch/stats/split/train/eval/grid runs over
//! knowledge-graph embedding benchmarks, driven by JSON run configs.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use kge_core::eval::{render_table, EvalError, EvalMode, Ranker};
use kge_core::models::{self, ModelKind};
use kge_core::split::{split, write_split_files, SplitError};
use kge_core::train::{fit, grid_search, EpochRecord, TrainError};
use kge_core::triples::{
    fetch_dataset, load_type_map, load_view_files, KgError, KnowledgeGraph, LoadOptions,
    TypeSource, ViewTag,
};

use config::RunConfig;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<KgError> for CliError {
    fn from(e: KgError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SplitError> for CliError {
    fn from(e: SplitError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } | TrainError::NonFiniteGradient { .. } => {
                CliError::Numeric(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::NonFiniteScore => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "kge", version, about = "Knowledge-graph embedding benchmark pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Triple file(s); overrides the config's dataset files. Repeatable;
    /// `PATH` or `VIEW=PATH` with VIEW in ontology|instance|bridge|whole.
    #[arg(long = "triples")]
    triples: Vec<String>,
    /// Two-column entity-to-type sidecar; overrides the config's.
    #[arg(long)]
    type_map: Option<PathBuf>,
    /// Skip one header line in triple files.
    #[arg(long)]
    header: bool,
    /// View to run on.
    #[arg(long, value_parser = parse_view)]
    view: Option<ViewTag>,
    /// Model name (TransE, RotH, ComplEx, ...).
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Random seed recorded in every artifact.
    #[arg(long)]
    seed: Option<u64>,
    /// Ranking filter: raw, type, or type-truth.
    #[arg(long, value_parser = parse_eval_mode)]
    eval_mode: Option<EvalMode>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: runs/<timestamp>-<digest>).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_view(s: &str) -> Result<ViewTag, String> {
    ViewTag::parse(s).ok_or_else(|| format!("unknown view {s:?}"))
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_eval_mode(s: &str) -> Result<EvalMode, String> {
    EvalMode::parse(s).ok_or_else(|| format!("unknown eval mode {s:?} (raw|type|type-truth)"))
}

#[derive(Subcommand)]
enum Command {
    /// Download a dataset file into the cache, verifying its digest.
    Fetch {
        #[arg(long)]
        url: String,
        /// Expected hex SHA-256 of the file.
        #[arg(long)]
        digest: Option<String>,
        /// Cache directory (default: $KGE_CACHE or ./kge-cache).
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Per-node-type scale statistics of a dataset.
    Stats {
        #[command(flatten)]
        common: Common,
        /// table or json
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Connectivity-preserving train/valid/test split.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        min_component_size: Option<usize>,
    },
    /// Train an embedding model on the split's training triples.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a trained model file on the split's test triples.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model_file: PathBuf,
    },
    /// Beam hyperparameter search (batch size, then rate, then ratio).
    Grid {
        #[command(flatten)]
        common: Common,
    },
}

/// Provenance block embedded in every artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    tool_version: String,
    seed: u64,
    config_digest: String,
    dataset_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelManifest {
    #[serde(flatten)]
    run: RunManifest,
    model: String,
    dim: usize,
    entities: usize,
    relations: usize,
    best_epoch: usize,
    best_val_mrr: f64,
    stopping_epoch: usize,
}

fn resolve_config(common: &Common) -> Result<(RunConfig, String), CliError> {
    let (mut cfg, digest) = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => (RunConfig::default(), "unconfigured".to_string()),
    };
    if !common.triples.is_empty() {
        cfg.dataset.files = common
            .triples
            .iter()
            .map(|spec| match spec.split_once('=') {
                Some((view, path)) => {
                    let view = parse_view(view).map_err(CliError::Usage)?;
                    Ok(config::DatasetFile { path: PathBuf::from(path), view })
                }
                None => Ok(config::DatasetFile { path: PathBuf::from(spec), view: ViewTag::Whole }),
            })
            .collect::<Result<_, CliError>>()?;
    }
    if let Some(tm) = &common.type_map {
        cfg.dataset.type_map = Some(tm.clone());
    }
    if common.header {
        cfg.dataset.header = true;
    }
    if let Some(v) = common.view {
        cfg.view = Some(v);
    }
    if let Some(m) = common.model {
        cfg.model.kind = m;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = common.eval_mode {
        cfg.eval_mode = m;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = Some(o.clone());
    }
    if cfg.dataset.files.is_empty() {
        return Err(CliError::Usage(
            "no dataset: pass --config with a dataset section or --triples PATH".into(),
        ));
    }
    if cfg.model.dim < 2 {
        return Err(CliError::Usage(format!(
            "embedding dimension must be at least 2, got {}",
            cfg.model.dim
        )));
    }
    Ok((cfg, digest))
}

fn build_kg(cfg: &RunConfig) -> Result<KnowledgeGraph, CliError> {
    let source = match &cfg.dataset.type_map {
        Some(path) => load_type_map(path)?,
        None => TypeSource::default(),
    };
    let opts = LoadOptions {
        delimiter: cfg.dataset.delimiter,
        header: cfg.dataset.header,
        default_view: ViewTag::Instance,
    };
    let files: Vec<(PathBuf, ViewTag)> =
        cfg.dataset.files.iter().map(|f| (f.path.clone(), f.view)).collect();
    let kg = load_view_files(&files, source, &opts)?;
    Ok(match cfg.view {
        Some(view) if view != ViewTag::Whole => kg.view_filter(view),
        _ => kg,
    })
}

/// `runs/<timestamp>-<digest8>/` unless --out fixed the directory.
fn output_dir(cfg: &RunConfig, config_digest: &str, fixed: bool) -> Result<PathBuf, CliError> {
    let dir = match &cfg.output_dir {
        Some(out) if fixed => out.clone(),
        base => {
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).expect("clock").as_secs();
            let short = &config_digest[..config_digest.len().min(8)];
            let root = match base {
                Some(b) => b.clone(),
                None => PathBuf::from("runs"),
            };
            root.join(format!("{stamp}-{short}"))
        }
    };
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_artifact(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    write_artifact(dir, name, &format!("{}\n", serde_json::to_string_pretty(value).expect("serializable")))
}

fn manifest_for(cfg: &RunConfig, config_digest: &str, kg: &KnowledgeGraph) -> RunManifest {
    RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        seed: cfg.seed,
        config_digest: config_digest.to_string(),
        dataset_digest: kg.digest(),
    }
}

fn copy_config_into(dir: &Path, common: &Common) -> Result<(), CliError> {
    if let Some(src) = &common.config {
        let body = fs::read_to_string(src)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", src.display())))?;
        write_artifact(dir, "config.json", &body)?;
    }
    Ok(())
}

fn cmd_fetch(url: &str, digest: Option<&str>, cache: Option<PathBuf>) -> Result<(), CliError> {
    let cache = cache
        .or_else(|| std::env::var_os("KGE_CACHE").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("kge-cache"));
    let path = fetch_dataset(url, &cache, digest)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_stats(common: &Common, format: &str) -> Result<(), CliError> {
    let (cfg, config_digest) = resolve_config(common)?;
    let kg = build_kg(&cfg)?;
    let stats = kg.stats();
    let dir = output_dir(&cfg, &config_digest, common.out.is_some())?;
    copy_config_into(&dir, common)?;
    write_json(&dir, "manifest.json", &manifest_for(&cfg, &config_digest, &kg))?;
    write_json(&dir, "stats.json", &stats)?;
    write_artifact(&dir, "stats.txt", &stats.render_table())?;
    match format {
        "json" => println!("{}", serde_json::to_string_pretty(&stats).expect("serializable")),
        _ => print!("{}", stats.render_table()),
    }
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn cmd_split(
    common: &Common,
    fraction: Option<f64>,
    min_component_size: Option<usize>,
) -> Result<(), CliError> {
    let (cfg, config_digest) = resolve_config(common)?;
    let kg = build_kg(&cfg)?;
    let mut sc = cfg.split_config();
    if let Some(f) = fraction {
        sc.holdout_fraction = f;
    }
    if let Some(m) = min_component_size {
        sc.min_component_size = m;
    }
    let ds = split(&kg, &sc)?;
    let dir = output_dir(&cfg, &config_digest, common.out.is_some())?;
    copy_config_into(&dir, common)?;
    write_json(&dir, "manifest.json", &manifest_for(&cfg, &config_digest, &kg))?;
    let manifest = write_split_files(&dir, &kg, &ds)?;
    println!(
        "train {} valid {} test {} excluded {} (seed {}, fraction {})",
        manifest.train_triples,
        manifest.valid_triples,
        manifest.test_triples,
        manifest.excluded_triples,
        manifest.seed,
        manifest.holdout_fraction
    );
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn cmd_train(common: &Common) -> Result<(), CliError> {
    let (cfg, config_digest) = resolve_config(common)?;
    let kg = build_kg(&cfg)?;
    let ds = split(&kg, &cfg.split_config())?;
    let spec = cfg.model.spec();
    let tc = cfg.train.to_train_config(spec.kind, cfg.seed);
    let dir = output_dir(&cfg, &config_digest, common.out.is_some())?;
    copy_config_into(&dir, common)?;
    write_json(&dir, "manifest.json", &manifest_for(&cfg, &config_digest, &kg))?;

    let mut log_lines = String::new();
    let trained = fit(&ds, &kg, &spec, &tc, |record: &EpochRecord| {
        log_lines.push_str(&serde_json::to_string(record).expect("serializable"));
        log_lines.push('\n');
        eprintln!(
            "epoch {:4}  loss {:.6}  val MRR {:.4}  ({:.1}s)",
            record.epoch, record.train_loss, record.val_mrr, record.seconds
        );
    })?;
    write_artifact(&dir, "train_log.jsonl", &log_lines)?;

    let model_path = dir.join("model.kge");
    models::save_table(&model_path, &trained.table)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let manifest = ModelManifest {
        run: manifest_for(&cfg, &config_digest, &kg),
        model: spec.kind.name().to_string(),
        dim: spec.dim,
        entities: kg.num_entities(),
        relations: kg.num_relations(),
        best_epoch: trained.best_epoch,
        best_val_mrr: trained.best_val_mrr,
        stopping_epoch: trained.stopping_epoch,
    };
    write_json(&dir, "model.kge.manifest.json", &manifest)?;
    println!(
        "trained {} (d={}) for {} epochs; best val MRR {:.4} at epoch {}",
        spec.kind, spec.dim, trained.stopping_epoch, trained.best_val_mrr, trained.best_epoch
    );
    println!("{}", model_path.display());
    Ok(())
}

fn cmd_eval(common: &Common, model_file: &Path) -> Result<(), CliError> {
    let (cfg, config_digest) = resolve_config(common)?;
    let kg = build_kg(&cfg)?;
    let ds = split(&kg, &cfg.split_config())?;
    let table = models::load_table(model_file).map_err(|e| CliError::Data(e.to_string()))?;

    // refuse to evaluate against a different dataset than the model saw
    let manifest_path = model_file.with_extension("kge.manifest.json");
    if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", manifest_path.display())))?;
        let manifest: ModelManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("corrupt model manifest: {e}")))?;
        let current = kg.digest();
        if manifest.run.dataset_digest != current {
            return Err(CliError::Data(format!(
                "model was trained on dataset {} but the configured dataset is {current}; refusing to evaluate",
                manifest.run.dataset_digest
            )));
        }
    } else if table.num_entities != kg.num_entities() || table.num_relations != kg.num_relations() {
        return Err(CliError::Data(format!(
            "model shape ({} entities, {} relations) does not match the dataset ({}, {})",
            table.num_entities,
            table.num_relations,
            kg.num_entities(),
            kg.num_relations()
        )));
    }

    if ds.test.is_empty() {
        return Err(CliError::Data("split produced an empty test set".into()));
    }
    let known: [&[_]; 3] = [&ds.train, &ds.valid, &ds.test];
    let ranker = Ranker::new(&table, &kg, &ds.train, &known, cfg.eval_mode);
    let report = ranker.evaluate(&ds.test)?;

    let dir = output_dir(&cfg, &config_digest, common.out.is_some())?;
    copy_config_into(&dir, common)?;
    write_json(&dir, "manifest.json", &manifest_for(&cfg, &config_digest, &kg))?;
    write_json(&dir, "metrics.json", &report)?;
    let label = format!("{}", table.spec.kind);
    let text = render_table(&[(label, &report)]);
    write_artifact(&dir, "metrics.txt", &text)?;
    print!("{text}");
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn cmd_grid(common: &Common) -> Result<(), CliError> {
    let (cfg, config_digest) = resolve_config(common)?;
    let kg = build_kg(&cfg)?;
    let ds = split(&kg, &cfg.split_config())?;
    let spec = cfg.model.spec();
    let base = cfg.train.to_train_config(spec.kind, cfg.seed);
    let grid = cfg.grid.to_grid_spec();
    let results = grid_search(&ds, &kg, &spec, &base, &grid)?;

    let dir = output_dir(&cfg, &config_digest, common.out.is_some())?;
    copy_config_into(&dir, common)?;
    write_json(&dir, "manifest.json", &manifest_for(&cfg, &config_digest, &kg))?;
    write_json(&dir, "grid.json", &results)?;
    println!("{:<6} {:>10} {:>8} {:>8}  stage", "rank", "batch", "lr", "MRR");
    for (i, r) in results.iter().enumerate() {
        println!(
            "{:<6} {:>10} {:>8} {:>8.4}  {:?} (ratio {:?})",
            i + 1,
            r.config.batch_size,
            r.config.learning_rate,
            r.val_mrr,
            r.stage,
            r.config.negative_ratio
        );
    }
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fetch { url, digest, cache } => cmd_fetch(url, digest.as_deref(), cache.clone()),
        Command::Stats { common, format } => {
            init_threads(common)?;
            cmd_stats(common, format)
        }
        Command::Split { common, fraction, min_component_size } => {
            init_threads(common)?;
            cmd_split(common, *fraction, *min_component_size)
        }
        Command::Train { common } => {
            init_threads(common)?;
            cmd_train(common)
        }
        Command::Eval { common, model_file } => {
            init_threads(common)?;
            cmd_eval(common, model_file)
        }
        Command::Grid { common } => {
            init_threads(common)?;
            cmd_grid(common)
        }
    }
}

#[cfg(feature = "parallel")]
fn init_threads(common: &Common) -> Result<(), CliError> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_threads(common: &Common) -> Result<(), CliError> {
    if common.threads.map_or(false, |n| n > 1) {
        log::warn!("built without the parallel feature; --threads ignored");
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses exit code 2 by default; usage errors here are 1
            let _ = e.print();
            let code = if e.use_stderr() { 1 } else { 0 };
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}
