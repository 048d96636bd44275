//! Command implementations behind the `qtherm` binary.

pub mod input;
pub mod sweep;
pub mod verify;

use std::fs;
use std::path::Path;

use qtherm_core::Error;

pub use input::{parse_problem, parse_sweep, ProblemSpec, SweepSpec};
pub use sweep::{run_analyze, run_bloch_scan, run_sweep_p, PointResult, ScanRow, SweepRow};
pub use verify::{run_verify, VerifySummary, DEFAULT_SEED};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("analysis failed: {0}")]
    Analysis(String),
    #[error("verification failed")]
    VerifyFailed,
}

impl CliError {
    /// Input-shaped core errors are validation failures; the rest are
    /// analysis failures.
    pub fn from_core(e: Error) -> Self {
        match e {
            Error::Validation(_) | Error::Dimension(_) | Error::Contract(_) => CliError::Validation(e.to_string()),
            other => CliError::Analysis(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Analysis(_) | CliError::VerifyFailed => 1,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("json: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => write(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cmd_analyze(spec_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let spec = parse_problem(&read(spec_path)?)?;
    emit_json(&run_analyze(&spec)?, out)
}

pub fn cmd_sweep_p(sweep_path: &Path, out: &Path) -> Result<(), CliError> {
    let spec = parse_sweep(&read(sweep_path)?)?;
    write(out, &sweep::sweep_csv(&run_sweep_p(&spec)?)?)
}

pub fn cmd_bloch_scan(sweep_path: &Path, out: &Path) -> Result<(), CliError> {
    let spec = parse_sweep(&read(sweep_path)?)?;
    write(out, &sweep::scan_csv(&run_bloch_scan(&spec)?)?)
}

/// Writes the summary even when a check fails.
pub fn cmd_verify(seed: u64, corrupted: bool, out: Option<&Path>) -> Result<VerifySummary, CliError> {
    let summary = run_verify(seed, corrupted);
    emit_json(&summary, out)?;
    if summary.all_pass {
        Ok(summary)
    } else {
        Err(CliError::VerifyFailed)
    }
}
