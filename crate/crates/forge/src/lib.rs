//! Experiment harness: configuration, seeding and result files for the
//! GP training, firefighter evaluation and strategy-switch experiments.
//!
//! Every experiment is a pure function of its config and seed. Work may fan
//! out over rayon workers but rows are always written in logical index order,
//! so reruns produce byte-identical files.

pub mod config;
pub mod ff_eval;
pub mod gp_run;
pub mod switch_eval;
pub mod trace;

use std::path::{Path, PathBuf};

use ebt_cage::agents::AgentError;
use ebt_cage::netsim::NetError;
use ebt_core::behaviors::EpisodeError;
use ebt_core::gp::GpError;
use ebt_core::graphgen::GraphError;
use serde::Serialize;
use thiserror::Error;

pub use config::{ExperimentConfig, Params};
pub use ff_eval::run_firefighter_eval;
pub use gp_run::run_gp_training;
pub use switch_eval::run_strategy_switch_eval;
pub use trace::emit_trace;

pub const THREADS_ENV: &str = "EBT_FORGE_THREADS";

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Net(#[from] NetError),
}

impl ForgeError {
    /// Process exit code: 2 for bad configuration, 3 for anything that failed at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            ForgeError::Config(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ForgeError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Files an experiment wrote, in the order they were written.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Written(pub Vec<PathBuf>);

/// Sizes the global rayon pool from `EBT_FORGE_THREADS` when it is set.
pub fn init_threads() -> Result<(), ForgeError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ForgeError::Config(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    // A second initialization (tests, embedding) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs whichever experiment `cfg` describes.
pub fn run(cfg: &ExperimentConfig) -> Result<Written, ForgeError> {
    cfg.validate()?;
    let out = cfg.out_path()?;
    match &cfg.params {
        Params::GpTraining(p) => run_gp_training(p, cfg.seed, out).map(|r| r.files),
        Params::FirefighterEval(p) => run_firefighter_eval(p, cfg.seed, out).map(|r| r.files),
        Params::StrategySwitchEval(p) => run_strategy_switch_eval(p, cfg.seed, out).map(|r| r.files),
        Params::Trace(p) => emit_trace(p, cfg.seed, out).map(|r| r.files),
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), ForgeError> {
    std::fs::create_dir_all(dir).map_err(|e| ForgeError::Config(format!("cannot create {}: {e}", dir.display())))
}

pub(crate) fn write_csv<R: Serialize>(path: &Path, rows: &[R], files: &mut Written) -> Result<(), ForgeError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| ForgeError::io(path, e))?;
    files.0.push(path.to_path_buf());
    Ok(())
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
