//! Files written by a run: training log (CSV), summary, best protocol and
//! checkpoint (JSON).

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qdql_core::agent::{EpisodeRecord, HyperParams, TrainingResult};
use qdql_core::envs::{ControlAction, TaskConfig};

use crate::error::{CliError, Result};

pub const LOG_FILE: &str = "training_log.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PROTOCOL_FILE: &str = "best_protocol.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Exact column set of the training log, in order.
pub const LOG_COLUMNS: [&str; 6] = [
    "episode",
    "fidelity",
    "reward",
    "epsilon",
    "epsilon_max",
    "best_fidelity",
];

#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn log(&self) -> PathBuf {
        self.dir.join(LOG_FILE)
    }

    pub fn summary(&self) -> PathBuf {
        self.dir.join(SUMMARY_FILE)
    }

    pub fn protocol(&self) -> PathBuf {
        self.dir.join(PROTOCOL_FILE)
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join(CHECKPOINT_FILE)
    }
}

/// Training-log writer. Every row is flushed as soon as it is written, so an
/// interrupted run leaves a readable log of the completed episodes.
pub struct LogWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(CliError::io(path))?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        inner.write_record(LOG_COLUMNS).map_err(|e| csv_err(path, e))?;
        inner.flush().map_err(CliError::io(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write(&mut self, rec: &EpisodeRecord) -> Result<()> {
        self.inner.serialize(rec).map_err(|e| csv_err(&self.path, e))?;
        self.inner.flush().map_err(CliError::io(&self.path))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::parse(path, format!("{other:?}")),
    }
}

/// Reads a training log, rejecting any header other than [`LOG_COLUMNS`].
pub fn read_log(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::parse(path, e))?
        .clone();
    if headers.iter().ne(LOG_COLUMNS) {
        return Err(CliError::parse(
            path,
            format!(
                "expected columns {}, found {}",
                LOG_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| CliError::parse(path, e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: String,
    pub variant: String,
    pub seed: u64,
    pub episodes_completed: u64,
    pub best_fidelity: f64,
    /// `1 - max fidelity` over the log.
    pub best_infidelity: f64,
    pub best_episode: Option<u64>,
    pub final_epsilon: Option<f64>,
    pub final_epsilon_max: Option<f64>,
    pub network_updates: u64,
    pub qubits: u32,
    pub horizon_pulses: usize,
    pub evolution_time: f64,
    pub pulse_duration: f64,
    pub action_count: usize,
    pub training_state_count: Option<usize>,
    pub hyperparameters: HyperParams,
}

impl Summary {
    pub fn new(
        task_name: &str,
        variant: &str,
        task: &TaskConfig,
        hp: &HyperParams,
        training_state_count: Option<usize>,
        result: &TrainingResult,
    ) -> Self {
        let best = result
            .log
            .iter()
            .map(|r| r.fidelity)
            .fold(f64::NEG_INFINITY, f64::max);
        let best_episode = result
            .log
            .iter()
            .find(|r| r.fidelity == best)
            .map(|r| r.episode);
        let last = result.log.last();
        let best = if result.log.is_empty() { 0.0 } else { best };
        Self {
            task: task_name.to_string(),
            variant: variant.to_string(),
            seed: result.seed,
            episodes_completed: result.log.len() as u64,
            best_fidelity: best,
            best_infidelity: 1.0 - best,
            best_episode,
            final_epsilon: last.map(|r| r.epsilon),
            final_epsilon_max: last.map(|r| r.epsilon_max),
            network_updates: result.updates,
            qubits: task.qubits(),
            horizon_pulses: task.horizon,
            evolution_time: task.total_time,
            pulse_duration: task.dt(),
            action_count: task.actions.total_actions(),
            training_state_count,
            hyperparameters: hp.clone(),
        }
    }
}

/// The best protocol of a run, with its control amplitudes spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolFile {
    pub task: String,
    pub horizon_pulses: usize,
    pub evolution_time: f64,
    pub fidelity: f64,
    pub protocol: Vec<usize>,
    pub controls: Vec<Vec<f64>>,
    /// Number of protocols enumerated, for oracle output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluated: Option<u64>,
}

impl ProtocolFile {
    pub fn new(task_name: &str, task: &TaskConfig, protocol: &[usize], fidelity: f64) -> Result<Self> {
        let controls = protocol
            .iter()
            .map(|&i| task.actions.action(i).map(|ControlAction(v)| v))
            .collect::<qdql_core::Result<Vec<_>>>()?;
        Ok(Self {
            task: task_name.to_string(),
            horizon_pulses: task.horizon,
            evolution_time: task.total_time,
            fidelity,
            protocol: protocol.to_vec(),
            controls,
            evaluated: None,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::parse(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(CliError::io(path))?;
    f.write_all(text.as_bytes()).map_err(CliError::io(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e))
}
