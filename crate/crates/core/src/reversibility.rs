//! Decides whether an operation over an ensemble admits a reversible
//! implementation: a column-stochastic map from input diagonals to output
//! eigenvalues, with the exceptional eigenvalue-ratio symmetries reported.

use serde::Serialize;

use crate::bounds;
use crate::ensemble::AlignedCoefficients;
use crate::lp::{self, PhaseOne};

/// Largest output coherence still counted as co-diagonal.
pub const CODIAGONAL_TOL: f64 = 1e-9;
/// Phase-I optimum below this is feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Maximum allowed residual of the reconstructed output diagonals.
pub const MAP_RESIDUAL_TOL: f64 = 1e-8;
/// Relative tolerance deciding `lambda_i lambda'_l == lambda_j lambda'_k`.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// `p[k][i] = P(k|i)`: columns are probability vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticMap {
    pub p: Vec<Vec<f64>>,
}

impl StochasticMap {
    pub fn new(p: Vec<Vec<f64>>) -> Self {
        Self { p }
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.p[k][i]
    }

    pub fn n_out(&self) -> usize {
        self.p.len()
    }

    pub fn n_in(&self) -> usize {
        self.p.first().map_or(0, |r| r.len())
    }

    /// Largest deviation of any column sum from one.
    pub fn column_defect(&self) -> f64 {
        (0..self.n_in())
            .map(|i| ((0..self.n_out()).map(|k| self.p[k][i]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_{n,k} |sum_i P(k|i) mu^n_ii - mu'^n_kk|`.
    pub fn residual(&self, a: &AlignedCoefficients) -> f64 {
        let mut worst: f64 = 0.0;
        for (mu, mup) in a.mu_in.iter().zip(&a.mu_out) {
            for k in 0..self.n_out() {
                let predicted: f64 = (0..self.n_in()).map(|i| self.p[k][i] * mu[(i, i)].re).sum();
                worst = worst.max((predicted - mup[(k, k)].re).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapSearch {
    Feasible { map: StochasticMap, residual: f64, conditioning_warning: bool },
    Infeasible { reason: String },
}

impl MapSearch {
    pub fn map(&self) -> Option<&StochasticMap> {
        match self {
            MapSearch::Feasible { map, .. } => Some(map),
            MapSearch::Infeasible { .. } => None,
        }
    }
}

/// Coherence magnitude of the most off-diagonal output entry.
pub fn max_output_coherence(a: &AlignedCoefficients) -> f64 {
    let d = a.dim_out();
    a.mu_out
        .iter()
        .flat_map(|m| (0..d).flat_map(move |k| (0..d).filter(move |&l| l != k).map(move |l| m[(k, l)].norm())))
        .fold(0.0, f64::max)
}

pub fn outputs_codiagonal(a: &AlignedCoefficients) -> bool {
    max_output_coherence(a) <= CODIAGONAL_TOL
}

/// Searches for `P(k|i) >= 0`, `sum_k P(k|i) = 1`, with
/// `sum_i P(k|i) mu^n_ii = mu'^n_kk` for every signal `n` and output `k`.
pub fn find_stochastic_map(a: &AlignedCoefficients) -> MapSearch {
    if !outputs_codiagonal(a) {
        return MapSearch::Infeasible {
            reason: format!("outputs are not co-diagonal (max coherence {:e})", max_output_coherence(a)),
        };
    }
    let (dout, din) = (a.dim_out(), a.dim_in());
    let var = |k: usize, i: usize| k * din + i;
    let nvars = dout * din;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..din {
        let mut row = vec![0.0; nvars];
        for k in 0..dout {
            row[var(k, i)] = 1.0;
        }
        rows.push(row);
        rhs.push(1.0);
    }
    for (mu, mup) in a.mu_in.iter().zip(&a.mu_out) {
        for k in 0..dout {
            let mut row = vec![0.0; nvars];
            for i in 0..din {
                row[var(k, i)] = mu[(i, i)].re;
            }
            rows.push(row);
            rhs.push(mup[(k, k)].re);
        }
    }
    match lp::phase_one(&rows, &rhs, FEASIBILITY_TOL) {
        PhaseOne::Infeasible { residual } => MapSearch::Infeasible {
            reason: format!("no stochastic map (phase-one residual {residual:e})"),
        },
        PhaseOne::Feasible { x, ill_conditioned } => {
            let mut p: Vec<Vec<f64>> = (0..dout).map(|k| (0..din).map(|i| x[var(k, i)]).collect()).collect();
            // Spread any column-sum round-off back over the column.
            for i in 0..din {
                let s: f64 = (0..dout).map(|k| p[k][i]).sum();
                if s > 0.0 {
                    for row in p.iter_mut() {
                        row[i] /= s;
                    }
                }
            }
            let map = StochasticMap::new(p);
            let residual = map.residual(a);
            if residual > MAP_RESIDUAL_TOL {
                MapSearch::Infeasible {
                    reason: format!("phase one converged but residual {residual:e} exceeds tolerance"),
                }
            } else {
                MapSearch::Feasible { map, residual, conditioning_warning: ill_conditioned }
            }
        }
    }
}

/// An index quadruple with `lambda_i lambda'_l = lambda_j lambda'_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryQuadruple {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    /// `lambda_i / lambda_j`, absent when `lambda_j` vanishes.
    pub ratio: Option<f64>,
}

/// Whether `lambda_i lambda'_l` and `lambda_j lambda'_k` coincide.
pub fn is_symmetric(lambda_in: &[f64], lambda_out: &[f64], i: usize, j: usize, k: usize, l: usize) -> bool {
    let lhs = lambda_in[i] * lambda_out[l];
    let rhs = lambda_in[j] * lambda_out[k];
    (lhs - rhs).abs() <= SYMMETRY_TOL * rhs.abs().max(1.0)
}

pub fn detect_symmetries(lambda_in: &[f64], lambda_out: &[f64]) -> Vec<SymmetryQuadruple> {
    let (din, dout) = (lambda_in.len(), lambda_out.len());
    let mut found = Vec::new();
    for i in 0..din {
        for j in 0..din {
            for k in 0..dout {
                for l in 0..dout {
                    if i == j && k == l {
                        continue;
                    }
                    if is_symmetric(lambda_in, lambda_out, i, j, k, l) {
                        let ratio = (lambda_in[j] > 0.0).then(|| lambda_in[i] / lambda_in[j]);
                        found.push(SymmetryQuadruple { i, j, k, l, ratio });
                    }
                }
            }
        }
    }
    found
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "map", rename_all = "snake_case")]
pub enum VerdictKind {
    ReversibleVia(StochasticMap),
    IrreversibleDiagonal,
    IrreversibleOffDiagonal,
    SymmetricInconclusive,
}

impl VerdictKind {
    pub fn name(&self) -> &'static str {
        match self {
            VerdictKind::ReversibleVia(_) => "reversible_via",
            VerdictKind::IrreversibleDiagonal => "irreversible_diagonal",
            VerdictKind::IrreversibleOffDiagonal => "irreversible_off_diagonal",
            VerdictKind::SymmetricInconclusive => "symmetric_inconclusive",
        }
    }

    pub fn is_reversible(&self) -> bool {
        matches!(self, VerdictKind::ReversibleVia(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversibilityVerdict {
    #[serde(flatten)]
    pub kind: VerdictKind,
    pub symmetries: Vec<SymmetryQuadruple>,
    pub details: String,
    #[serde(skip)]
    pub conditioning_warning: bool,
}

/// For co-diagonal outputs the bounding coefficients are `q(kk|ij)` with
/// `i != j`, weighted by `|lambda_i - lambda_j|`; they are all symmetric
/// exactly when the average input is proportional to the identity.
pub fn diagonal_bounds_blocked(a: &AlignedCoefficients) -> bool {
    let lam = &a.lambda_in;
    (0..lam.len()).all(|i| {
        (0..lam.len()).all(|j| i == j || (lam[i] - lam[j]).abs() <= SYMMETRY_TOL * lam[j].abs().max(1.0))
    })
}

pub fn classify(a: &AlignedCoefficients) -> ReversibilityVerdict {
    let symmetries = detect_symmetries(&a.lambda_in, &a.lambda_out);
    let search = find_stochastic_map(a);
    if let MapSearch::Feasible { map, residual, conditioning_warning } = search {
        return ReversibilityVerdict {
            kind: VerdictKind::ReversibleVia(map),
            symmetries,
            details: format!("stochastic map found (residual {residual:e})"),
            conditioning_warning,
        };
    }
    if !outputs_codiagonal(a) {
        let candidates = bounds::offdiag_candidates(a);
        let live = candidates.iter().filter(|c| c.blocked.is_none() && c.ratio > 0.0).count();
        let (kind, details) = if live > 0 {
            (
                VerdictKind::IrreversibleOffDiagonal,
                format!("outputs not co-diagonal; {live} of {} bounding candidates are non-symmetric", candidates.len()),
            )
        } else {
            (
                VerdictKind::SymmetricInconclusive,
                format!(
                    "outputs not co-diagonal but all {} bounding candidates hit symmetric eigenvalue ratios",
                    candidates.len()
                ),
            )
        };
        return ReversibilityVerdict { kind, symmetries, details, conditioning_warning: false };
    }
    if diagonal_bounds_blocked(a) {
        ReversibilityVerdict {
            kind: VerdictKind::SymmetricInconclusive,
            symmetries,
            details: "outputs co-diagonal, no stochastic map, average input proportional to identity".into(),
            conditioning_warning: false,
        }
    } else {
        ReversibilityVerdict {
            kind: VerdictKind::IrreversibleDiagonal,
            symmetries,
            details: "outputs co-diagonal but no stochastic map reproduces them".into(),
            conditioning_warning: false,
        }
    }
}
