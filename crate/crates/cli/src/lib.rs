//! Experiment harness around the `adaptive-admm` core: TOML configs, trace
//! CSVs, JSON summaries, sweeps and structure-from-motion runs.

use std::path::PathBuf;

use adaptive_admm::RunError;

pub mod config;
pub mod experiment;
pub mod measurements;
pub mod output;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Measurements {
        path: PathBuf,
        source: measurements::LoadError,
    },
    #[error("model: {0}")]
    Model(String),
    #[error(transparent)]
    Run(RunError),
}

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    MaxIterations,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Converged => 0,
            Outcome::MaxIterations => 2,
        }
    }

    fn of(converged: bool) -> Self {
        if converged {
            Outcome::Converged
        } else {
            Outcome::MaxIterations
        }
    }
}

/// Exit status for errors.
pub const ERROR_CODE: i32 = 1;

/// Synthetic run: writes `trace.csv` and `summary.json` to the output directory.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let art = experiment::run_synthetic(cfg)?;
    art.write(&cfg.resolved_output_dir())?;
    Ok(Outcome::of(art.summary.converged))
}

/// Grid sweep: writes `sweep.csv` and `sweep.json`, plus per-run artifacts
/// under `runs/` when `sweep.write_runs` is set. Failed runs are recorded in
/// their cells; the status is `MaxIterations` unless every run converged.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let dir = cfg.resolved_output_dir();
    let runs_dir = cfg.sweep.write_runs.then(|| dir.join("runs"));
    let report = experiment::sweep(cfg, runs_dir.as_deref())?;
    output::write_atomic(&dir.join("sweep.csv"), report.table_csv().as_bytes())?;
    output::write_json(&dir.join("sweep.json"), &report)?;
    let all = report.cells.iter().all(|c| c.converged_runs == c.runs);
    Ok(Outcome::of(all))
}

/// SfM run on the configured measurements: writes `trace.csv` and `summary.json`.
pub fn cmd_sfm(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = experiment::sfm_measurements(cfg)?;
    let art = experiment::run_sfm(cfg, &m)?;
    art.write(&cfg.resolved_output_dir())?;
    Ok(Outcome::of(art.summary.converged))
}
