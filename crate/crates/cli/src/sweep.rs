//! Analysis orchestration for single problems and the two grid sweeps.

use rayon::prelude::*;

use qtherm_core::bounds::{analyze, landauer_term, ScanConfig, ThermoReport};
use qtherm_core::ensemble::{QuantumOperation, SignalEnsemble};
use qtherm_core::qmat::DensityMatrix;
use qtherm_core::Error;

use crate::input::{Bloch, ProblemSpec, SweepSpec};
use crate::CliError;

pub const SCAN_FAILED: &str = "scan_failed";

pub fn run_analyze(spec: &ProblemSpec) -> Result<ThermoReport, CliError> {
    let e = spec.ensemble()?;
    let q = spec.operation.to_operation()?;
    analyze(&e, &q, &spec.scan()?).map_err(CliError::from_core)
}

/// One sweep point. Energies are `NaN` when the scan failed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub landauer_kt: f64,
    pub epsilon_kt: f64,
    pub total_kt: f64,
    pub verdict: String,
}

impl PointResult {
    pub fn is_reversible(&self) -> bool {
        self.verdict == "reversible_via"
    }

    fn from_report(r: &ThermoReport) -> Self {
        Self {
            landauer_kt: r.landauer_kt,
            epsilon_kt: r.epsilon_lower_kt,
            total_kt: r.total_lower_kt,
            verdict: r.verdict.kind.name().to_string(),
        }
    }
}

pub fn evaluate(e: &SignalEnsemble, q: &QuantumOperation, cfg: &ScanConfig) -> Result<PointResult, CliError> {
    match analyze(e, q, cfg) {
        Ok(r) => Ok(PointResult::from_report(&r)),
        Err(Error::ScanExhausted { .. } | Error::DegenerateDiagonals { .. }) => Ok(PointResult {
            landauer_kt: landauer_term(e, q).map_err(CliError::from_core)?,
            epsilon_kt: f64::NAN,
            total_kt: f64::NAN,
            verdict: SCAN_FAILED.to_string(),
        }),
        Err(err) => Err(CliError::from_core(err)),
    }
}

fn pair(p: f64, v1: &DensityMatrix, v2: &DensityMatrix) -> Result<SignalEnsemble, CliError> {
    SignalEnsemble::new(vec![(p, v1.clone()), (1.0 - p, v2.clone())]).map_err(CliError::from_core)
}

fn check_probability(p: f64, field: &str) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CliError::Validation(format!("field `{field}`: p = {p} outside [0, 1]")));
    }
    Ok(())
}

/// Worker pool capped by `QTHERM_THREADS` when set.
fn pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("QTHERM_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Validation(format!("QTHERM_THREADS must be a positive integer, got `{raw}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Io(format!("thread pool: {e}")))
}

fn par_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, CliError> + Sync,
{
    pool()?.install(|| items.par_iter().map(&f).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub point: PointResult,
}

pub fn run_sweep_p(spec: &SweepSpec) -> Result<Vec<SweepRow>, CliError> {
    let grid = spec.p_grid.ok_or_else(|| CliError::Validation("field `p_grid`: required for sweep-p".into()))?;
    let v2 = spec.v2.ok_or_else(|| CliError::Validation("field `v2`: required for sweep-p".into()))?;
    if grid.steps == 0 {
        return Err(CliError::Validation("field `p_grid.steps`: grid must be non-empty".into()));
    }
    check_probability(grid.start, "p_grid.start")?;
    check_probability(grid.stop, "p_grid.stop")?;
    let (q, cfg) = (spec.operation()?, spec.scan()?);
    let (s1, s2) = (spec.v1.state(), v2.state());
    par_map(&grid.points(), |&p| {
        let point = evaluate(&pair(p, &s1, &s2)?, &q, &cfg)?;
        Ok(SweepRow { p, point })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub theta: f64,
    pub phi: f64,
    pub point: PointResult,
}

pub fn run_bloch_scan(spec: &SweepSpec) -> Result<Vec<ScanRow>, CliError> {
    let grid = spec.bloch_grid.ok_or_else(|| CliError::Validation("field `bloch_grid`: required for bloch-scan".into()))?;
    let p = spec.p.ok_or_else(|| CliError::Validation("field `p`: required for bloch-scan".into()))?;
    if grid.polar_steps == 0 || grid.azimuth_steps == 0 {
        return Err(CliError::Validation("field `bloch_grid`: grid must be non-empty".into()));
    }
    check_probability(p, "p")?;
    let (q, cfg) = (spec.operation()?, spec.scan()?);
    let s1 = spec.v1.state();
    par_map(&grid.points(), |&(theta, phi)| {
        let v2 = Bloch { theta, phi }.state();
        let point = evaluate(&pair(p, &s1, &v2)?, &q, &cfg)?;
        Ok(ScanRow { theta, phi, point })
    })
}

/// Nine significant digits; `nan` for missing values.
pub fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.8e}")
    }
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(format!("csv: {e}")))
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["p", "landauer_kT", "epsilon_kT", "total_kT", "verdict"],
        rows.iter().map(|r| {
            vec![
                fmt_value(r.p),
                fmt_value(r.point.landauer_kt),
                fmt_value(r.point.epsilon_kt),
                fmt_value(r.point.total_kt),
                r.point.verdict.clone(),
            ]
        }),
    )
}

pub fn scan_csv(rows: &[ScanRow]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["theta", "phi", "feasible", "epsilon_kT"],
        rows.iter().map(|r| {
            vec![
                fmt_value(r.theta),
                fmt_value(r.phi),
                u8::from(r.point.is_reversible()).to_string(),
                fmt_value(r.point.epsilon_kt),
            ]
        }),
    )
}
