use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use qdql_core::agent::{greedy_protocol, run_training_with, TrainingResult};
use qdql_core::envs::{BlackBox, Environment, TaskConfig};
use qdql_core::net::{Checkpoint, QNetwork};
use qdql_core::oracle::exhaustive_search;
use qdql_core::stategen::{gen_testing_states_with, gen_training_states_with_theta, ControlDistribution, StateSet, StateSetKind, TRAINING_THETA};

use crate::artifacts::{read_json, read_log, read_text, write_json, write_text, LogWriter, ProtocolFile, RunPaths, Summary};
use crate::config::{two_qubit_set, ResolvedRun, RunConfig, DEFAULT_POOL_SIZE};
use crate::error::{CliError, Result};
use crate::stats::{box_stats, windowed_curve, BoxStats, CurvePoint, WindowMode};

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the episode count.
    #[arg(long)]
    pub episodes: Option<u64>,
}

pub struct TrainOutcome {
    pub paths: RunPaths,
    pub summary: Summary,
    pub result: TrainingResult,
}

pub fn train(args: &TrainArgs) -> Result<TrainOutcome> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(episodes) = args.episodes {
        cfg.episodes = Some(episodes);
    }
    let run = cfg.resolve()?;
    let dir = args
        .out
        .clone()
        .or_else(|| run.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory (use --out or output_dir)".into()))?;
    train_resolved(&run, RunPaths::new(dir))
}

pub fn train_resolved(run: &ResolvedRun, paths: RunPaths) -> Result<TrainOutcome> {
    fs::create_dir_all(&paths.dir).map_err(CliError::io(&paths.dir))?;
    let states = run.training_states.as_ref().map(|s| s.states.clone());
    let env = Environment::new(run.task.clone(), states)?;

    let mut log = LogWriter::create(&paths.log())?;
    let mut write_error = None;
    let trained = run_training_with(&env, run.variant, &run.hp, run.seed, |rec| {
        log.write(rec).map_err(|e| {
            let msg = e.to_string();
            write_error = Some(e);
            qdql_core::Error::ConfigError(msg)
        })
    });
    let result = match (trained, write_error) {
        (_, Some(e)) => return Err(e),
        (r, None) => r?,
    };

    let summary = Summary::new(
        &run.task_name,
        run.variant.name(),
        &run.task,
        &run.hp,
        run.training_states.as_ref().map(StateSet::len),
        &result,
    );
    write_json(&paths.summary(), &summary)?;
    if !result.best_protocol.is_empty() {
        let protocol = ProtocolFile::new(&run.task_name, &run.task, &result.best_protocol, result.best_fidelity)?;
        write_json(&paths.protocol(), &protocol)?;
    }
    write_text(&paths.checkpoint(), &result.checkpoint().to_json())?;
    Ok(TrainOutcome {
        paths,
        summary,
        result,
    })
}

/// A task named by preset or config path, with optional overrides.
#[derive(Debug, Clone, Args)]
pub struct TaskArgs {
    /// Task preset (hadamard, cnot, tx, ty, bitflip, bell) or config file.
    #[arg(long)]
    pub task: String,
    /// Overrides the number of pulses.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Overrides the total evolution time.
    #[arg(long)]
    pub evolution_time: Option<f64>,
}

impl TaskArgs {
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let path = PathBuf::from(&self.task);
        let mut cfg = if self.task.ends_with(".toml") || path.is_file() {
            RunConfig::load(&path)?
        } else {
            RunConfig {
                task: self.task.clone(),
                ..RunConfig::default()
            }
        };
        if self.horizon.is_some() {
            cfg.horizon_pulses = self.horizon;
        }
        if self.evolution_time.is_some() {
            cfg.evolution_time = self.evolution_time;
        }
        cfg.resolve()
    }
}

#[derive(Debug, Clone, Args)]
#[group(id = "source", required = true, multiple = false, args = ["checkpoint", "protocol"])]
pub struct EvaluateArgs {
    /// Checkpoint to roll out greedily from its stored opening action.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Protocol file written by `train` or `oracle`.
    #[arg(long)]
    pub protocol: Option<PathBuf>,
    #[command(flatten)]
    pub task: TaskArgs,
    /// Test state set (JSON from `gen-states`).
    #[arg(long)]
    pub states: PathBuf,
    /// Where to write the statistics; stdout only if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Observation scale used when rolling out a checkpoint.
    #[arg(long, default_value_t = 40.0)]
    pub state_norm: f64,
}

/// Infidelity statistics of a protocol over a state set.
pub fn evaluate(args: &EvaluateArgs) -> Result<BoxStats> {
    let run = args.task.resolve()?;
    let task = &run.task;
    let text = read_text(&args.states)?;
    let states = StateSet::from_json(&text).map_err(|e| CliError::parse(&args.states, e))?;
    if states.is_empty() {
        return Err(CliError::Config("test state set is empty".into()));
    }
    if states.dim() != Some(task.dim()) {
        return Err(CliError::TaskMismatch(format!(
            "state set has dimension {} but task `{}` acts on dimension {}",
            states.dim().unwrap_or(0),
            run.task_name,
            task.dim()
        )));
    }

    let protocol = match (&args.protocol, &args.checkpoint) {
        (Some(path), _) => protocol_from_file(&read_json(path)?, task)?,
        (None, Some(path)) => protocol_from_checkpoint(path, task, args.state_norm)?,
        (None, None) => return Err(CliError::Config("need --protocol or --checkpoint".into())),
    };
    let stats = evaluate_protocol(task, &protocol, &states)?;
    if let Some(out) = &args.out {
        write_json(out, &stats)?;
    }
    Ok(stats)
}

pub fn evaluate_protocol(task: &TaskConfig, protocol: &[usize], states: &StateSet) -> Result<BoxStats> {
    let inputs = task.kind.uses_states().then(|| states.states.clone());
    let env = Environment::new(task.clone(), inputs)?;
    let fidelities = env.fidelities_on(protocol, &states.states)?;
    let infidelities: Vec<f64> = fidelities.0.iter().map(|f| 1.0 - f).collect();
    box_stats(&infidelities)
}

fn protocol_from_file(file: &ProtocolFile, task: &TaskConfig) -> Result<Vec<usize>> {
    if file.protocol.len() != task.horizon {
        return Err(CliError::TaskMismatch(format!(
            "protocol has {} pulses but the task has {}",
            file.protocol.len(),
            task.horizon
        )));
    }
    if file.controls.len() != file.protocol.len() {
        return Err(CliError::Config("protocol and controls differ in length".into()));
    }
    for (&i, controls) in file.protocol.iter().zip(&file.controls) {
        let action = task
            .actions
            .action(i)
            .map_err(|e| CliError::TaskMismatch(e.to_string()))?;
        if action.values() != controls.as_slice() {
            return Err(CliError::TaskMismatch(format!(
                "action {i} is {:?} in the task but {:?} in the protocol file",
                action.values(),
                controls
            )));
        }
    }
    Ok(file.protocol.clone())
}

fn protocol_from_checkpoint(path: &PathBuf, task: &TaskConfig, state_norm: f64) -> Result<Vec<usize>> {
    let ckpt = Checkpoint::from_json(&read_text(path)?).map_err(|e| CliError::parse(path, e))?;
    let arch = ckpt.architecture;
    if arch.input_dim != task.actions.field_count() + 1 || arch.output_dim != task.actions.total_actions() {
        return Err(CliError::TaskMismatch(format!(
            "checkpoint network is {}->{} but the task needs {}->{}",
            arch.input_dim,
            arch.output_dim,
            task.actions.field_count() + 1,
            task.actions.total_actions()
        )));
    }
    let first = ckpt
        .first_action
        .ok_or_else(|| CliError::Config("checkpoint has no stored opening action".into()))?;
    let net = QNetwork::from_checkpoint(ckpt)?;
    Ok(greedy_protocol(&net, &task.actions, task.horizon, first, state_norm)?)
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    /// Where to write the optimal protocol; stdout only if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn oracle(args: &OracleArgs) -> Result<ProtocolFile> {
    let run = args.task.resolve()?;
    let states = run.training_states.as_ref().map(|s| s.states.clone());
    let env = Environment::new(run.task.clone(), states)?;
    let best = exhaustive_search(&env)?;
    let mut file = ProtocolFile::new(&run.task_name, &run.task, &best.protocol, best.fidelity)?;
    file.evaluated = Some(best.evaluated);
    debug_assert_eq!(env.horizon(), best.protocol.len());
    if let Some(out) = &args.out {
        write_json(out, &file)?;
    }
    Ok(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Training,
    Testing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistributionArg {
    Continuous,
    TwoPoint,
}

#[derive(Debug, Clone, Args)]
pub struct GenStatesArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 1 for single-qubit walks, 2 for product states drawn from a
    /// single-qubit testing pool.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub qubits: u32,
    /// Phase angle of the training walk (radians).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pub pool_size: usize,
    #[arg(long, value_enum, default_value_t = DistributionArg::Continuous)]
    pub distribution: DistributionArg,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_states(args: &GenStatesArgs) -> Result<StateSet> {
    if args.count == 0 {
        return Err(CliError::Config("--count must be positive".into()));
    }
    let kind = match args.kind {
        KindArg::Training => StateSetKind::Training,
        KindArg::Testing => StateSetKind::Testing,
    };
    let set = match (args.qubits, args.kind) {
        (1, KindArg::Training) => {
            gen_training_states_with_theta(args.count, args.theta.unwrap_or(TRAINING_THETA))?
        }
        (1, KindArg::Testing) => {
            let dist = match args.distribution {
                DistributionArg::Continuous => ControlDistribution::Continuous,
                DistributionArg::TwoPoint => ControlDistribution::TwoPoint,
            };
            gen_testing_states_with(args.count, args.seed, dist)
        }
        _ => two_qubit_set(args.count, args.pool_size, args.seed, kind)?,
    };
    write_text(&args.out, &set.to_json())?;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Disjoint,
    Sliding,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Training log written by `train`.
    #[arg(long)]
    pub log: PathBuf,
    /// Episodes per averaging window.
    #[arg(long, default_value_t = 2000)]
    pub window: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Disjoint)]
    pub mode: ModeArg,
    /// Episodes between sliding windows.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CurveRow {
    window_start: u64,
    window_end: u64,
    mean_infidelity: f64,
    std_infidelity: f64,
}

pub fn report(args: &ReportArgs) -> Result<Vec<CurvePoint>> {
    let log = read_log(&args.log)?;
    let episodes: Vec<u64> = log.iter().map(|r| r.episode).collect();
    let infidelity: Vec<f64> = log.iter().map(|r| 1.0 - r.fidelity).collect();
    let mode = match args.mode {
        ModeArg::Disjoint => WindowMode::Disjoint,
        ModeArg::Sliding => WindowMode::Sliding,
    };
    let curve = windowed_curve(&episodes, &infidelity, args.window, mode, args.stride)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &curve {
        w.serialize(CurveRow {
            window_start: p.window_start,
            window_end: p.window_end,
            mean_infidelity: p.mean_infidelity,
            std_infidelity: p.std_infidelity,
        })
        .map_err(|e| CliError::Config(e.to_string()))?;
    }
    if curve.is_empty() {
        w.write_record(["window_start", "window_end", "mean_infidelity", "std_infidelity"])
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    match &args.out {
        Some(path) => fs::write(path, &bytes).map_err(CliError::io(path))?,
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(CliError::io(std::path::Path::new("<stdout>")))?,
    }
    Ok(curve)
}
