//! JSON problem and sweep descriptions.

use serde::Deserialize;

use qtherm_core::bounds::ScanConfig;
use qtherm_core::ensemble::{dephasing_operation, QuantumOperation, SignalEnsemble};
use qtherm_core::qmat::{c, ComplexMatrix, DensityMatrix};

use crate::CliError;

/// `[[[re, im], ...], ...]`, row-major.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Bloch {
    pub theta: f64,
    pub phi: f64,
}

impl Bloch {
    pub fn state(&self) -> DensityMatrix {
        DensityMatrix::bloch(self.theta, self.phi)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Bloch(Bloch),
    Matrix(MatrixSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub probability: f64,
    pub state: StateSpec,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationSpec {
    pub name: Option<String>,
    pub r: Option<f64>,
    pub kraus: Option<Vec<MatrixSpec>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub ensemble: Vec<SignalSpec>,
    pub operation: OperationSpec,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PGrid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl PGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let span = self.stop - self.start;
        (0..self.steps).map(|i| self.start + span * i as f64 / (self.steps - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochGrid {
    pub polar_steps: usize,
    pub azimuth_steps: usize,
}

impl BlochGrid {
    /// `(theta_i, phi_j) = (i pi / polar_steps, 2 pi j / azimuth_steps)`, row-major in `i`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        use std::f64::consts::PI;
        let mut out = Vec::with_capacity(self.polar_steps * self.azimuth_steps);
        for i in 0..self.polar_steps {
            for j in 0..self.azimuth_steps {
                out.push((PI * i as f64 / self.polar_steps as f64, 2.0 * PI * j as f64 / self.azimuth_steps as f64));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub v1: Bloch,
    #[serde(default)]
    pub v2: Option<Bloch>,
    #[serde(default)]
    pub p_grid: Option<PGrid>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub bloch_grid: Option<BlochGrid>,
    #[serde(default)]
    pub operation: Option<OperationSpec>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        CliError::Validation(format!("field `{path}` (line {}, column {}): {inner}", inner.line(), inner.column()))
    })
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec, CliError> {
    parse(text)
}

pub fn parse_sweep(text: &str) -> Result<SweepSpec, CliError> {
    parse(text)
}

fn matrix(spec: &MatrixSpec, field: &str) -> Result<ComplexMatrix, CliError> {
    let rows = spec.len();
    if rows == 0 || spec.iter().any(|r| r.len() != spec[0].len()) {
        return Err(CliError::Validation(format!("field `{field}`: matrix rows must be non-empty and equal length")));
    }
    let cols = spec[0].len();
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| c(spec[i][j][0], spec[i][j][1])))
}

impl StateSpec {
    pub fn to_state(&self, field: &str) -> Result<DensityMatrix, CliError> {
        match self {
            StateSpec::Bloch(b) => Ok(b.state()),
            StateSpec::Matrix(m) => DensityMatrix::new(matrix(m, field)?)
                .map_err(|e| CliError::Validation(format!("field `{field}`: {e}"))),
        }
    }
}

impl OperationSpec {
    pub fn to_operation(&self) -> Result<QuantumOperation, CliError> {
        let invalid = |msg: String| CliError::Validation(format!("field `operation`: {msg}"));
        match (&self.name, &self.kraus) {
            (Some(_), Some(_)) => Err(invalid("give either `name` or `kraus`, not both".into())),
            (None, None) => Err(invalid("missing `name` or `kraus`".into())),
            (Some(name), None) => match name.as_str() {
                "dephasing" => {
                    let r = self.r.ok_or_else(|| invalid("dephasing needs `r`".into()))?;
                    dephasing_operation(r).map_err(|e| invalid(e.to_string()))
                }
                "identity" if self.r.is_none() => Ok(QuantumOperation::identity(2)),
                other => Err(invalid(format!("unknown operation `{other}`"))),
            },
            (None, Some(list)) => {
                if self.r.is_some() {
                    return Err(invalid("`r` only applies to the dephasing operation".into()));
                }
                let kraus = list
                    .iter()
                    .enumerate()
                    .map(|(n, m)| matrix(m, &format!("operation.kraus[{n}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                QuantumOperation::new(kraus, None).map_err(|e| invalid(e.to_string()))
            }
        }
    }
}

impl ProblemSpec {
    pub fn ensemble(&self) -> Result<SignalEnsemble, CliError> {
        let signals = self
            .ensemble
            .iter()
            .enumerate()
            .map(|(n, s)| Ok((s.probability, s.state.to_state(&format!("ensemble[{n}].state"))?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        SignalEnsemble::new(signals).map_err(|e| CliError::Validation(format!("field `ensemble`: {e}")))
    }

    pub fn scan(&self) -> Result<ScanConfig, CliError> {
        checked_scan(self.scan)
    }
}

pub(crate) fn checked_scan(scan: Option<ScanConfig>) -> Result<ScanConfig, CliError> {
    let cfg = scan.unwrap_or_default();
    cfg.validate().map_err(|e| CliError::Validation(format!("field `scan`: {e}")))?;
    Ok(cfg)
}

impl SweepSpec {
    pub fn operation(&self) -> Result<QuantumOperation, CliError> {
        match &self.operation {
            Some(op) => op.to_operation(),
            None => dephasing_operation(0.0).map_err(|e| CliError::Validation(e.to_string())),
        }
    }

    pub fn scan(&self) -> Result<ScanConfig, CliError> {
        checked_scan(self.scan)
    }
}
