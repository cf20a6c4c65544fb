//! The `graph-evo` command line: sessions, grids, exports and replays.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::autodiff::Eval;
use crate::config::{expand_grid, ConfigError, FinetuneConfig, FinetuneMode, FitnessKind, RunConfig};
use crate::envs::{write_trajectory, Env};
use crate::evolution::{
    genealogy_dot, genealogy_json, write_metrics, EvolutionState, FitnessEvaluator, GraphMode, Landscape,
    PpoEvaluator, Setup,
};
use crate::morphology::MorphGraph;
use crate::nervenet::GraphCtx;
use crate::policy::{self, PolicyParams};
use crate::ppo::write_train_rows;
use crate::surrogate::write_surrogate_rows;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const OUTPUT_ENV: &str = "GRAPH_EVO_OUTPUT";

#[derive(Debug, Parser)]
#[command(name = "graph-evo", version, about = "Co-evolve robot bodies and graph-network controllers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// JSON run config; omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Run directory (falls back to the config, then $GRAPH_EVO_OUTPUT).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Discard any checkpoint in the run directory instead of resuming.
    #[arg(long)]
    pub fresh: bool,
    /// Stop after this many generations in this invocation; rerun to resume.
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an evolution session.
    Run(Common),
    /// Evolve from a hand-designed or saved body.
    Finetune {
        #[command(flatten)]
        common: Common,
        /// `fish5`, `walker7` or a graph JSON path.
        #[arg(long, default_value = "fish5")]
        seed_graph: String,
        #[arg(long, value_enum, default_value = "unconstrained")]
        mode: ModeArg,
    },
    /// One run per combination of array-valued config fields.
    Grid(Common),
    /// Convert a run's genealogy to Graphviz DOT.
    ExportGenealogy {
        /// Run directory.
        run: PathBuf,
        /// Output file (default: <run>/genealogy.dot).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-simulate the best species of a run with its mean actions.
    Replay {
        /// Run directory.
        run: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        /// Trajectory CSV (default: <run>/trajectory.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Constrained,
    Unconstrained,
    Fixed,
}

impl From<ModeArg> for FinetuneMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Constrained => FinetuneMode::Constrained,
            ModeArg::Unconstrained => FinetuneMode::Unconstrained,
            ModeArg::Fixed => FinetuneMode::Fixed,
        }
    }
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let doc = load_doc(&c)?;
            let cfg = resolve(doc, &c, None)?;
            with_workers(c.workers, || run_session(&cfg, &output_dir(&cfg), &c).map(|_| ()))
        }
        Command::Finetune { common, seed_graph, mode } => {
            let doc = load_doc(&common)?;
            let ft = FinetuneConfig { seed_graph, mode: mode.into() };
            let cfg = resolve(doc, &common, Some(ft))?;
            with_workers(common.workers, || run_session(&cfg, &output_dir(&cfg), &common).map(|_| ()))
        }
        Command::Grid(c) => {
            let doc = load_doc(&c)?;
            let points = expand_grid(&doc);
            let mut cfgs = Vec::with_capacity(points.len());
            for (label, d) in points {
                let cfg = resolve(d, &Common { output: None, ..c.clone() }, None)
                    .with_context(|| format!("grid point {label}"))?;
                cfgs.push((label, cfg));
            }
            let root = match &c.output {
                Some(p) => p.clone(),
                None => output_dir(&cfgs[0].1),
            };
            for (i, (label, cfg)) in cfgs.iter().enumerate() {
                let name = if label.is_empty() { format!("{i:03}") } else { format!("{i:03}_{label}") };
                let dir = root.join(name);
                eprintln!("grid run {}/{}: {}", i + 1, cfgs.len(), dir.display());
                with_workers(c.workers, || run_session(cfg, &dir, &c).map(|_| ()))?;
            }
            Ok(())
        }
        Command::ExportGenealogy { run, out } => {
            let text = fs::read_to_string(run.join("genealogy.json")).context("reading genealogy.json")?;
            let records: Vec<crate::evolution::GenealogyRecord> =
                serde_json::from_str(&text).context("parsing genealogy.json")?;
            let out = out.unwrap_or_else(|| run.join("genealogy.dot"));
            fs::write(&out, genealogy_dot(&records)).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Replay { run, steps, out } => {
            let cfg = RunConfig::from_json(&fs::read_to_string(run.join("config.json")).context("reading config.json")?)?;
            let graph = MorphGraph::from_json(
                &fs::read_to_string(run.join("best_graph.json")).context("reading best_graph.json")?,
                &cfg.attr_space,
            )?;
            let params = PolicyParams::read_checkpoint(
                fs::File::open(run.join("best_species.ckpt")).context("opening best_species.ckpt")?,
            )?;
            let rows = replay(&cfg, &graph, &params, steps.unwrap_or(cfg.env.horizon));
            let out = out.unwrap_or_else(|| run.join("trajectory.csv"));
            write_trajectory(BufWriter::new(fs::File::create(&out)?), &rows)?;
            Ok(())
        }
    }
}

fn load_doc(c: &Common) -> Result<Value> {
    match &c.config {
        None => Ok(Value::Object(Default::default())),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?;
            Ok(v)
        }
    }
}

/// Applies command-line overrides to a config document and resolves it.
fn resolve(mut doc: Value, c: &Common, ft: Option<FinetuneConfig>) -> Result<RunConfig> {
    let obj = doc.as_object_mut().ok_or_else(|| ConfigError::Invalid("config must be a JSON object".into()))?;
    if let Some(s) = c.seed {
        obj.insert("seed".into(), s.into());
    }
    if let Some(o) = &c.output {
        obj.insert("output_dir".into(), o.to_string_lossy().into_owned().into());
    }
    if let Some(ft) = ft {
        obj.insert("finetune".into(), serde_json::to_value(ft)?);
    }
    let mut cfg = RunConfig::from_value(doc)?;
    if cfg.output_dir.is_none() {
        cfg.output_dir = std::env::var_os(OUTPUT_ENV).map(PathBuf::from);
    }
    Ok(cfg)
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", cfg.method.name(), cfg.seed)))
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?;
            pool.install(f)
        }
    }
}

/// Builds the evaluator a config asks for.
pub fn evaluator(cfg: &RunConfig) -> Box<dyn FitnessEvaluator> {
    match cfg.fitness {
        FitnessKind::Ppo => {
            Box::new(PpoEvaluator { env: cfg.env.clone(), ppo: cfg.ppo.clone(), space: cfg.attr_space.clone() })
        }
        FitnessKind::Synthetic => Box::new(Landscape::default()),
    }
}

/// The static part of a run.
pub fn setup<'a>(cfg: &RunConfig, evaluator: &'a dyn FitnessEvaluator) -> Setup<'a> {
    let seed_graph = cfg.finetune.as_ref().map(|ft| ft.load_graph(&cfg.attr_space).expect("checked at load"));
    let graph_mode = match cfg.finetune.as_ref().map(|f| f.mode) {
        Some(FinetuneMode::Fixed) => GraphMode::Fixed,
        _ => GraphMode::Evolve,
    };
    Setup {
        method: cfg.method,
        evo: cfg.evolution.clone(),
        mutation: cfg.mutation.clone(),
        net: cfg.net.clone(),
        ppo: cfg.ppo.clone(),
        surrogate: cfg.surrogate.clone(),
        space: cfg.attr_space.clone(),
        evaluator,
        seed_graph,
        graph_mode,
    }
}

fn comparable(cfg: &RunConfig) -> RunConfig {
    RunConfig { output_dir: None, ..cfg.clone() }
}

/// Runs (or resumes) a session, writing every artifact after each
/// generation.
pub fn run_session(cfg: &RunConfig, dir: &Path, opts: &Common) -> Result<EvolutionState> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let state_path = dir.join("state.json");
    let ev = evaluator(cfg);
    let setup = setup(cfg, ev.as_ref());
    let mut state = None;
    if state_path.exists() && !opts.fresh {
        let prev = fs::read_to_string(dir.join("config.json")).context("checkpoint without config.json")?;
        let prev = RunConfig::from_json(&prev)?;
        if comparable(&prev) != comparable(cfg) {
            return Err(ConfigError::Invalid(format!(
                "{} holds a checkpoint from a different config; pass --fresh to overwrite",
                dir.display()
            ))
            .into());
        }
        let text = fs::read_to_string(&state_path)?;
        let st: EvolutionState = serde_json::from_str(&text).context("parsing state.json")?;
        eprintln!("resuming {} at generation {}", dir.display(), st.generation);
        state = Some(st);
    }
    fs::write(dir.join("config.json"), cfg.to_json_pretty())?;
    let mut state = state.unwrap_or_else(|| setup.init_state());
    let limit = opts.stop_after.map_or(usize::MAX, |s| state.generation + s);
    let mut result = Ok(());
    while state.generation < cfg.evolution.max_generations && state.generation < limit {
        setup.step(&mut state);
        let last = state.metrics.last().expect("a generation was logged");
        eprintln!(
            "gen {:>4}  best {:>10.3}  mean {:>10.3}  |V| {:.2}",
            last.gen, last.best_af, last.mean_af, last.mean_nodes
        );
        result = write_outputs(dir, &state);
        if result.is_err() {
            break;
        }
    }
    result?;
    if state.metrics.is_empty() {
        write_outputs(dir, &state)?;
    }
    Ok(state)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_outputs(dir: &Path, state: &EvolutionState) -> Result<()> {
    let mut buf = Vec::new();
    write_metrics(&mut buf, &state.metrics)?;
    write_atomic(&dir.join("metrics.csv"), &buf)?;
    buf.clear();
    write_train_rows(&mut buf, &state.train_rows)?;
    write_atomic(&dir.join("train_stats.csv"), &buf)?;
    if !state.surrogate_rows.is_empty() {
        buf.clear();
        write_surrogate_rows(&mut buf, &state.surrogate_rows)?;
        write_atomic(&dir.join("surrogate.csv"), &buf)?;
    }
    write_atomic(&dir.join("genealogy.json"), genealogy_json(&state.genealogy).as_bytes())?;
    write_atomic(&dir.join("genealogy.dot"), genealogy_dot(&state.genealogy).as_bytes())?;
    if let Some(best) = &state.best {
        write_atomic(&dir.join("best_species.ckpt"), &best.params.to_checkpoint_bytes())?;
        write_atomic(&dir.join("best_graph.json"), best.graph.to_json_pretty().as_bytes())?;
    }
    // Last: a crash before this point resumes from the previous generation.
    write_atomic(&dir.join("state.json"), serde_json::to_string(state)?.as_bytes())?;
    Ok(())
}

/// Rolls out the mean action of `params` on `graph` from the reset state.
pub fn replay(cfg: &RunConfig, graph: &MorphGraph, params: &PolicyParams, steps: usize) -> Vec<(usize, [f64; 2], f64)> {
    let ctx = GraphCtx::new(graph, &cfg.attr_space);
    let mut env = Env::new(graph, &cfg.env);
    let p = params.load(&mut Eval);
    let prepared = policy::prepare(&mut Eval, params, &p, &ctx);
    let mut obs = env.reset();
    let mut hidden = params.zero_hidden(ctx.len());
    let mut rows = vec![(0, env.torso(), 0.0)];
    for t in 1..=steps {
        let out = policy::eval_step(params, &p, &ctx, &prepared, &obs, hidden);
        let action = if out.mu.is_empty() { vec![0.0; env.action_dim()] } else { out.mu };
        let res = env.step(&action);
        rows.push((t, env.torso(), res.reward));
        if res.done || res.diverged {
            break;
        }
        obs = res.obs;
        hidden = out.hidden;
    }
    rows
}
