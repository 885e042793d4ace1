//! Command-line driver. Every command reads an experiment config and works
//! inside its output directory:
//!
//! ```text
//! out/
//!   config.toml        resolved configuration (prepare)
//!   data/              manifest, base, query splits, ground truth (prepare)
//!   graph.bin          initial graph (build)
//!   refined.bin        learned graph (train)
//!   learned.bin        initial graph with learned edge probabilities (train)
//!   policy.ckpt        final policy weights (train)
//!   training_log.csv   one row per epoch (train)
//!   pruned.bin         magnitude-pruned graph (prune)
//!   weights.csv        per-edge pruning weights (prune)
//!   prune_sweep.csv    validation score per threshold (prune)
//!   sweep.csv          recall versus DCS on test queries (sweep)
//!   hubs.csv           most expanded vertices (hubs)
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{preset, ExperimentConfig, PRESET_NAMES};
use crate::dataset::{Dataset, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::graph::{load_graph, save_graph, Graph};
use crate::policy::save_checkpoint;
use crate::pruning::{collect_usage, edge_weights, tune_threshold_and_prune, weights_csv};
use crate::search::{evaluate, AllKeep};
use crate::trainer::{score_graph, train_with_hook, TrainingLog};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "simgraph", version, about = "Learn and evaluate similarity graphs for nearest neighbor search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Experiment config file (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in config by name.
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Initial,
    Refined,
    Pruned,
}

impl Which {
    fn file(self) -> &'static str {
        match self {
            Which::Initial => "graph.bin",
            Which::Refined => "refined.bin",
            Which::Pruned => "pruned.bin",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Which::Initial => "initial",
            Which::Refined => "refined",
            Which::Pruned => "pruned",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or load the dataset and write it with ground truth.
    Prepare(Common),
    /// Build the initial graph.
    Build(Common),
    /// Train the edge policy and write the refined graph.
    Train(Common),
    /// Magnitude-prune the initial graph with a tuned threshold.
    Prune(Common),
    /// Recall and mean DCS on test queries for several ef values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated beam widths.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
        ef: Vec<usize>,
    },
    /// Most frequently expanded vertices over training queries.
    Hubs {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 40)]
        top: usize,
        #[arg(long, value_enum, default_value = "refined")]
        graph: Which,
    },
    /// Check the config and any artifacts already in the output directory.
    Validate(Common),
}

/// Parses `args` and runs the command, mapping errors to exit codes.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli.command) {
        Ok(msg) => {
            print!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_DATA,
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Prepare(c) | Command::Build(c) | Command::Train(c) | Command::Prune(c) | Command::Validate(c) => c,
        Command::Sweep { common, .. } | Command::Hubs { common, .. } => common,
    }
}

/// Resolves the config from `--config` or `--preset` plus overrides.
pub fn resolve_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name).ok_or_else(|| {
            Error::Config(format!("unknown preset {name:?}; available: {}", PRESET_NAMES.join(", ")))
        })?,
        (None, None) => return Err(Error::Config("one of --config or --preset is required".into())),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns its stdout summary.
pub fn execute(cmd: &Command) -> Result<String> {
    let c = common(cmd);
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = resolve_config(c)?;
    match cmd {
        Command::Prepare(_) => cmd_prepare(&cfg),
        Command::Build(_) => cmd_build(&cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::Prune(_) => cmd_prune(&cfg),
        Command::Sweep { ef, .. } => cmd_sweep(&cfg, ef),
        Command::Hubs { top, graph, .. } => cmd_hubs(&cfg, *top, *graph),
        Command::Validate(_) => cmd_validate(&cfg),
    }
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    out_path(cfg, "data")
}

fn write_text(path: &Path, s: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let manifest = data_dir(cfg).join(MANIFEST_FILE);
    if !manifest.exists() {
        return Err(Error::invalid(format!(
            "{} not found; run `simgraph prepare` first",
            manifest.display()
        )));
    }
    Dataset::load_manifest(manifest)
}

fn load_artifact(cfg: &ExperimentConfig, which: Which) -> Result<Graph> {
    let path = out_path(cfg, which.file());
    if !path.exists() {
        let hint = match which {
            Which::Initial => "build",
            Which::Refined => "train",
            Which::Pruned => "prune",
        };
        return Err(Error::invalid(format!(
            "{} not found; run `simgraph {hint}` first",
            path.display()
        )));
    }
    load_graph(path)
}

fn check_graph(g: &Graph, ds: &Dataset) -> Result<()> {
    g.validate()?;
    if g.n_vertices() != ds.base.rows() {
        return Err(Error::InvalidGraph(format!(
            "graph has {} vertices but the base set has {} rows",
            g.n_vertices(),
            ds.base.rows()
        )));
    }
    Ok(())
}

pub fn cmd_prepare(cfg: &ExperimentConfig) -> Result<String> {
    let ds = cfg.make_dataset()?;
    let manifest = ds.save(data_dir(cfg), Some(cfg.seed))?;
    write_text(&out_path(cfg, "config.toml"), &cfg.to_toml_string()?)?;
    let mut s = format!("dataset: {} base vectors, dim {}\n", manifest.base.rows, manifest.dim);
    for split in &manifest.splits {
        let _ = writeln!(s, "  {}: {} queries", split.name.name(), split.rows);
    }
    Ok(s)
}

pub fn cmd_build(cfg: &ExperimentConfig) -> Result<String> {
    let ds = load_dataset(cfg)?;
    let g = cfg.make_graph(&ds)?;
    check_graph(&g, &ds)?;
    save_graph(out_path(cfg, Which::Initial.file()), &g)?;
    Ok(format!(
        "graph: {} vertices, {} edges, mean outdegree {:.2}, start {}\n",
        g.n_vertices(),
        g.n_edges(),
        g.mean_outdegree(),
        g.start()
    ))
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<String> {
    let ds = load_dataset(cfg)?;
    let g0 = load_artifact(cfg, Which::Initial)?;
    check_graph(&g0, &ds)?;
    let tc = cfg.train_config();
    let out = train_with_hook(&g0, &ds, cfg.search, &cfg.reward, &tc, &mut |r| {
        eprintln!(
            "epoch {:>4}  train reward {:>9.3}  val reward {:>9.3}  recall {:.4}  dcs {:>8.2}  frozen {:.3}",
            r.epoch, r.train_reward, r.val_reward, r.val_recall, r.val_mean_dcs, r.frozen_fraction
        );
    })?;
    save_graph(out_path(cfg, Which::Refined.file()), &out.graph)?;
    save_graph(out_path(cfg, "learned.bin"), &out.learned)?;
    save_checkpoint(out_path(cfg, "policy.ckpt"), &out.params)?;
    write_text(&out_path(cfg, "training_log.csv"), &out.log.to_csv())?;
    Ok(format!(
        "initial: val reward {:.3}, recall {:.4}, mean dcs {:.2}\n\
         refined: val reward {:.3}, recall {:.4}, mean dcs {:.2} (epoch {})\n\
         edges: {} -> {}\n",
        out.initial.reward,
        out.initial.recall,
        out.initial.mean_dcs,
        out.best.reward,
        out.best.recall,
        out.best.mean_dcs,
        out.best_epoch,
        g0.n_edges(),
        out.graph.n_edges()
    ))
}

pub fn cmd_prune(cfg: &ExperimentConfig) -> Result<String> {
    let ds = load_dataset(cfg)?;
    let g0 = load_artifact(cfg, Which::Initial)?;
    check_graph(&g0, &ds)?;
    let usage = collect_usage(&g0, &ds.base, &ds.train, cfg.search.k, cfg.search.ef)?;
    let w = edge_weights(&usage, &g0, cfg.pruning.lambda)?;
    let val_gt = ds.require_gt(crate::dataset::Split::Val)?;
    let out = tune_threshold_and_prune(&g0, &w, &ds.base, &ds.val, val_gt, cfg.search, &cfg.reward)?;
    save_graph(out_path(cfg, Which::Pruned.file()), &out.graph)?;
    write_text(&out_path(cfg, "weights.csv"), &weights_csv(&g0, &w))?;
    let mut sweep = String::from("threshold,val_reward,recall,mean_dcs\n");
    for (t, s) in &out.sweep {
        let _ = writeln!(sweep, "{t},{},{},{}", s.reward, s.recall, s.mean_dcs);
    }
    write_text(&out_path(cfg, "prune_sweep.csv"), &sweep)?;
    Ok(format!(
        "pruned: threshold {:.6}, val reward {:.3}, recall {:.4}, mean dcs {:.2}, edges {} -> {}\n",
        out.threshold,
        out.score.reward,
        out.score.recall,
        out.score.mean_dcs,
        g0.n_edges(),
        out.graph.n_edges()
    ))
}

/// Curve rows `graph,ef,mean_dcs,recall,mean_hops`, each graph's rows sorted
/// by mean DCS. Graphs missing from the output directory are skipped,
/// except the initial one.
pub fn cmd_sweep(cfg: &ExperimentConfig, efs: &[usize]) -> Result<String> {
    if efs.is_empty() {
        return Err(Error::Config("--ef needs at least one value".into()));
    }
    let ds = load_dataset(cfg)?;
    let gt = ds.require_gt(crate::dataset::Split::Test)?;
    let mut csv = String::from("graph,ef,mean_dcs,recall,mean_hops\n");
    let mut summary = String::new();
    for which in [Which::Initial, Which::Refined, Which::Pruned] {
        if which != Which::Initial && !out_path(cfg, which.file()).exists() {
            continue;
        }
        let g = load_artifact(cfg, which)?;
        check_graph(&g, &ds)?;
        let mut rows = Vec::with_capacity(efs.len());
        for &ef in efs {
            let ef = ef.max(cfg.search.k);
            let r = evaluate(&g, &ds.base, &AllKeep, &ds.test, gt, cfg.search.k, ef, 0)?;
            rows.push((ef, r.mean_dcs, r.recall_at_1, r.mean_hops));
        }
        rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (ef, dcs, recall, hops) in rows {
            let _ = writeln!(csv, "{},{ef},{dcs},{recall},{hops}", which.label());
            let _ = writeln!(summary, "{:>8} ef {:>4}  dcs {:>9.2}  recall {:.4}", which.label(), ef, dcs, recall);
        }
    }
    write_text(&out_path(cfg, "sweep.csv"), &csv)?;
    Ok(summary)
}

/// `rank,vertex,visits,outdegree,nn_count`; the start vertex is rank 0 and
/// the rest follow by decreasing visit count, then id.
pub fn hubs_csv(g: &Graph, visits: &[u64], nn_counts: &[u64], top: usize) -> String {
    let start = g.start();
    let mut order: Vec<u32> = (0..g.n_vertices() as u32).filter(|&v| v != start).collect();
    order.sort_by(|&a, &b| visits[b as usize].cmp(&visits[a as usize]).then(a.cmp(&b)));
    let mut s = String::from("rank,vertex,visits,outdegree,nn_count\n");
    for (rank, v) in std::iter::once(start).chain(order).take(top).enumerate() {
        let i = v as usize;
        let _ = writeln!(s, "{rank},{v},{},{},{}", visits[i], g.outdegree(v), nn_counts[i]);
    }
    s
}

pub fn cmd_hubs(cfg: &ExperimentConfig, top: usize, which: Which) -> Result<String> {
    if top == 0 {
        return Err(Error::Config("--top must be at least 1".into()));
    }
    let ds = load_dataset(cfg)?;
    let g = load_artifact(cfg, which)?;
    check_graph(&g, &ds)?;
    let gt = ds.require_gt(crate::dataset::Split::Train)?;
    let r = evaluate(&g, &ds.base, &AllKeep, &ds.train, gt, cfg.search.k, cfg.search.ef, 0)?;
    let csv = hubs_csv(&g, &r.stats.visit_counts, &r.stats.nn_counts, top);
    write_text(&out_path(cfg, "hubs.csv"), &csv)?;
    Ok(csv)
}

pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<String> {
    let mut s = String::from("config ok\n");
    let manifest = data_dir(cfg).join(MANIFEST_FILE);
    if !manifest.exists() {
        return Ok(s);
    }
    let ds = Dataset::load_manifest(&manifest)?;
    for split in crate::dataset::Split::ALL {
        ds.require_gt(split)?;
    }
    let _ = writeln!(s, "dataset ok: {} base vectors, dim {}", ds.base.rows(), ds.dim());
    for which in [Which::Initial, Which::Refined, Which::Pruned] {
        let path = out_path(cfg, which.file());
        if !path.exists() {
            continue;
        }
        let g = load_graph(&path)?;
        check_graph(&g, &ds)?;
        let val = score_graph(&g, &ds, crate::dataset::Split::Val, cfg.search, &cfg.reward)?;
        let _ = writeln!(
            s,
            "{} ok: {} edges, val reward {:.3}, recall {:.4}, mean dcs {:.2}",
            which.label(),
            g.n_edges(),
            val.reward,
            val.recall,
            val.mean_dcs
        );
    }
    if let (Ok(init), Ok(refined)) = (
        load_graph(out_path(cfg, Which::Initial.file())),
        load_graph(out_path(cfg, Which::Refined.file())),
    ) {
        if !refined.is_subgraph_of(&init) {
            return Err(Error::InvalidGraph("refined graph is not a subgraph of the initial graph".into()));
        }
    }
    let log = out_path(cfg, "training_log.csv");
    if log.exists() {
        let text = std::fs::read_to_string(&log).map_err(|e| Error::io(&log, e))?;
        if text.lines().next() != Some(TrainingLog::HEADER) {
            return Err(Error::Format {
                offset: 0,
                msg: format!("{} has an unexpected header", log.display()),
            });
        }
    }
    Ok(s)
}
