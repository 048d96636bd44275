//! Landauer term and lower bounds on the excess cost of an operation.
//!
//! Energies are in units of kT and entropies in bits.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::ensemble::{align, apply, average_state, AlignedCoefficients, QuantumOperation, SignalEnsemble};
use crate::error::{Error, Result};
use crate::qmat::{entropy, shannon, ENTROPY_CLAMP};
use crate::reversibility::{classify, ReversibilityVerdict, StochasticMap, VerdictKind, CODIAGONAL_TOL};

/// Divisors at or below this are treated as vanishing.
pub const DIVISOR_TOL: f64 = 1e-12;
/// Coefficients at or below this contribute nothing.
pub const COEFFICIENT_TOL: f64 = 1e-12;
/// Slack on the `[0, 1]` box for the scanned `q` values.
pub const BOX_TOL: f64 = 1e-9;
/// Determinants below this switch the scan to the shared-diagonal solver.
pub const DETERMINANT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub radius_step: f64,
    pub phase_steps: usize,
    pub radius_cap: f64,
    pub refine_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { radius_step: 1e-4, phase_steps: 720, radius_cap: 1.0, refine_tol: 1e-6 }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.radius_step) || !positive(self.radius_cap) || !positive(self.refine_tol) {
            return Err(Error::Validation("scan parameters must be positive and finite".into()));
        }
        if self.phase_steps == 0 {
            return Err(Error::Validation("phase_steps must be at least 1".into()));
        }
        if self.refine_tol >= self.radius_step {
            return Err(Error::Validation(format!(
                "refine_tol ({}) must be smaller than radius_step ({})",
                self.refine_tol, self.radius_step
            )));
        }
        Ok(())
    }
}

/// `ln 2 * (H(lambda_in) - H(lambda_out))` in kT.
pub fn landauer_from_spectra(lambda_in: &[f64], lambda_out: &[f64]) -> f64 {
    LN_2 * (shannon(lambda_in) - shannon(lambda_out))
}

/// Minimal mean cost of `q` on `e`, in kT. Negative when the operation
/// raises the entropy of the average state.
pub fn landauer_term(e: &SignalEnsemble, q: &QuantumOperation) -> Result<f64> {
    let rho = average_state(e);
    let rho_out = apply(q, &rho)?;
    Ok(LN_2 * (entropy(&rho) - entropy(&rho_out)))
}

/// One `(n, k, l)` candidate of the off-diagonal bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffDiagCandidate {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    /// Value whose square, halved, is the bound. Zero when blocked.
    pub ratio: f64,
    /// An `(i, j)` whose divisor vanished against a non-zero coefficient.
    pub blocked: Option<(usize, usize)>,
}

/// Enumerates every `(n, k != l)` with a non-negligible output coherence.
pub fn offdiag_candidates(a: &AlignedCoefficients) -> Vec<OffDiagCandidate> {
    let (din, dout) = (a.dim_in(), a.dim_out());
    let (lam, lamp) = (&a.lambda_in, &a.lambda_out);
    let mut out = Vec::new();
    for (n, (mu, mup)) in a.mu_in.iter().zip(&a.mu_out).enumerate() {
        for k in 0..dout {
            for l in 0..dout {
                let coherence = mup[(k, l)].norm();
                if k == l || coherence <= CODIAGONAL_TOL {
                    continue;
                }
                let mut blocked = None;
                let mut denom = 0.0;
                'terms: for i in 0..din {
                    for j in 0..din {
                        let m = mu[(i, j)].norm();
                        if m <= COEFFICIENT_TOL {
                            continue;
                        }
                        let divisor = (lam[j] * lamp[k] - lam[i] * lamp[l]).abs();
                        if divisor <= DIVISOR_TOL {
                            blocked = Some((i, j));
                            break 'terms;
                        }
                        denom += m / divisor;
                    }
                }
                let weight = lamp[k] + lamp[l];
                let ratio = if blocked.is_some() || denom == 0.0 || weight <= 0.0 {
                    0.0
                } else {
                    coherence / weight / denom
                };
                out.push(OffDiagCandidate { n, k, l, ratio, blocked });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffDiagBound {
    pub epsilon_kt: f64,
    /// The maximizing `(n, k, l)`, absent when every candidate is zero.
    pub bounding: Option<(usize, usize, usize)>,
    pub candidates: Vec<OffDiagCandidate>,
}

pub fn offdiag_bound_detailed(a: &AlignedCoefficients) -> Result<OffDiagBound> {
    let candidates = offdiag_candidates(a);
    if candidates.is_empty() {
        return Err(Error::Contract("off-diagonal bound needs outputs that are not co-diagonal".into()));
    }
    let mut best: Option<&OffDiagCandidate> = None;
    for cand in &candidates {
        if cand.ratio > best.map_or(0.0, |b| b.ratio) {
            best = Some(cand);
        }
    }
    let epsilon_kt = best.map_or(0.0, |b| 0.5 * b.ratio * b.ratio);
    let bounding = best.map(|b| (b.n, b.k, b.l));
    Ok(OffDiagBound { epsilon_kt, bounding, candidates })
}

/// Off-diagonal lower bound on the excess cost, in kT.
pub fn offdiag_bound(a: &AlignedCoefficients) -> Result<f64> {
    offdiag_bound_detailed(a).map(|b| b.epsilon_kt)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DephasingExcess {
    pub w_min: f64,
    pub epsilon_kt: f64,
    /// Index of the first accepting phase at `w_min`.
    pub phase_index: usize,
    /// `(q11, q12)` at the accepted `w`.
    pub q_diagonal: (f64, f64),
}

/// The scanned `q` values as affine functions of `(Re w, Im w)`.
struct QubitSystem {
    base: [f64; 2],
    d_re: [f64; 2],
    d_im: [f64; 2],
}

impl QubitSystem {
    fn new(a: &AlignedCoefficients) -> Result<Self> {
        let (m0, m1) = (&a.mu_in[0], &a.mu_in[1]);
        let (o0, o1) = (&a.mu_out[0], &a.mu_out[1]);
        let (a11, a12, a21, a22) = (m0[(0, 0)].re, m0[(1, 1)].re, m1[(0, 0)].re, m1[(1, 1)].re);
        let det = a11 * a22 - a21 * a12;
        if det.abs() < DETERMINANT_TOL {
            return Err(Error::DegenerateDiagonals { det });
        }
        let solve = |r0: f64, r1: f64| [(a22 * r0 - a12 * r1) / det, (a11 * r1 - a21 * r0) / det];
        // rhs_n = mu'^n_00 - 2 Re(mu^n_01) Re w + 2 Im(mu^n_01) Im w
        let (c0, c1) = (m0[(0, 1)], m1[(0, 1)]);
        Ok(Self {
            base: solve(o0[(0, 0)].re, o1[(0, 0)].re),
            d_re: solve(-2.0 * c0.re, -2.0 * c1.re),
            d_im: solve(2.0 * c0.im, 2.0 * c1.im),
        })
    }

    fn q_at(&self, x: f64, y: f64) -> [f64; 2] {
        [0, 1].map(|t| self.base[t] + x * self.d_re[t] + y * self.d_im[t])
    }

    /// Radii along direction `(cx, sy)` at which both `q` lie in the box.
    fn ray_interval(&self, cx: f64, sy: f64) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        for t in 0..2 {
            let q0 = self.base[t];
            let slope = cx * self.d_re[t] + sy * self.d_im[t];
            let (low, high) = (-BOX_TOL - q0, 1.0 + BOX_TOL - q0);
            if slope == 0.0 {
                if low > 0.0 || high < 0.0 {
                    return None;
                }
            } else if slope > 0.0 {
                lo = lo.max(low / slope);
                hi = hi.min(high / slope);
            } else {
                lo = lo.max(high / slope);
                hi = hi.min(low / slope);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

fn in_box(q: [f64; 2]) -> bool {
    q.iter().all(|&v| (-BOX_TOL..=1.0 + BOX_TOL).contains(&v))
}

/// Smallest `|w|` on a polar grid for which the qubit implementation family
/// reproduces both outputs, refined by bisection; `epsilon = (lambda_0 -
/// lambda_1)^2 w_min^2 / 2` in kT. The returned `w_min` over-estimates the
/// grid optimum by at most `refine_tol`.
pub fn dephasing_excess(a: &AlignedCoefficients, cfg: &ScanConfig) -> Result<DephasingExcess> {
    cfg.validate()?;
    if a.dim_in() != 2 || a.dim_out() != 2 || a.signal_count() != 2 {
        return Err(Error::Contract("dephasing scan needs two qubit signals".into()));
    }
    if !crate::reversibility::outputs_codiagonal(a) {
        return Err(Error::Contract("dephasing scan needs co-diagonal outputs".into()));
    }
    if crate::reversibility::diagonal_bounds_blocked(a) {
        return Err(Error::Contract("average input is maximally mixed; the bound is blocked".into()));
    }
    let det = a.mu_in[0][(0, 0)].re * a.mu_in[1][(1, 1)].re - a.mu_in[1][(0, 0)].re * a.mu_in[0][(1, 1)].re;
    if det.abs() < DETERMINANT_TOL {
        return shared_diagonal_excess(a, cfg, det);
    }
    let sys = QubitSystem::new(a)?;
    let directions: Vec<(f64, f64)> = (0..cfg.phase_steps)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / cfg.phase_steps as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    let intervals: Vec<Option<(f64, f64)>> = directions.iter().map(|&(cx, sy)| sys.ray_interval(cx, sy)).collect();
    let first_phase_at = |r: f64| -> Option<usize> {
        if r == 0.0 {
            return in_box(sys.base).then_some(0);
        }
        intervals.iter().position(|iv| iv.is_some_and(|(lo, hi)| lo <= r && r <= hi))
    };

    let cap_steps = (cfg.radius_cap / cfg.radius_step * (1.0 + 1e-12)).floor() as usize;
    let mut step_index: Option<usize> = None;
    if first_phase_at(0.0).is_some() {
        step_index = Some(0);
    } else {
        // First grid radius inside each ray's interval.
        let reach = (cap_steps + 1) as f64 * cfg.radius_step;
        for &(lo, hi) in intervals.iter().flatten().filter(|(lo, _)| *lo <= reach) {
            let idx = (lo / cfg.radius_step).ceil().max(1.0) as usize;
            let mut found = None;
            for cand in [idx.saturating_sub(1).max(1), idx, idx + 1] {
                let r = cand as f64 * cfg.radius_step;
                if lo <= r && r <= hi {
                    found = Some(cand);
                    break;
                }
            }
            if let Some(c) = found {
                step_index = Some(step_index.map_or(c, |s: usize| s.min(c)));
            }
        }
    }
    let Some(idx) = step_index.filter(|&i| i <= cap_steps) else {
        return Err(Error::ScanExhausted { radius_cap: cfg.radius_cap });
    };

    let w_min = if idx == 0 {
        0.0
    } else {
        let (mut lo, mut hi) = ((idx - 1) as f64 * cfg.radius_step, idx as f64 * cfg.radius_step);
        while hi - lo > cfg.refine_tol {
            let mid = 0.5 * (lo + hi);
            if first_phase_at(mid).is_some() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let phase_index = first_phase_at(w_min).unwrap_or(0);
    let (cx, sy) = directions[phase_index];
    let q = sys.q_at(w_min * cx, w_min * sy);
    let gap = a.lambda_in[0] - a.lambda_in[1];
    Ok(DephasingExcess {
        w_min,
        epsilon_kt: 0.5 * gap * gap * w_min * w_min,
        phase_index,
        q_diagonal: (q[0].clamp(0.0, 1.0), q[1].clamp(0.0, 1.0)),
    })
}

/// Both signals have the same diagonal, so the two constraints share their
/// left-hand side and the accepted `w` form a segment of the line on which
/// the right-hand sides agree. Its point nearest the origin is exact.
fn shared_diagonal_excess(a: &AlignedCoefficients, cfg: &ScanConfig, det: f64) -> Result<DephasingExcess> {
    let (c0, c1) = (a.mu_in[0][(0, 1)], a.mu_in[1][(0, 1)]);
    let (o0, o1) = (a.mu_out[0][(0, 0)].re, a.mu_out[1][(0, 0)].re);
    // rhs_n(x, y) = o_n - 2 Re(c_n) x + 2 Im(c_n) y; consistency g . (x, y) = h
    let dc = c0 - c1;
    let g = [2.0 * dc.re, -2.0 * dc.im];
    let h = o0 - o1;
    let gnorm = g[0].hypot(g[1]);
    let rhs0 = |x: f64, y: f64| o0 - 2.0 * c0.re * x + 2.0 * c0.im * y;
    let (foot, dir) = if gnorm <= COEFFICIENT_TOL {
        if h.abs() > BOX_TOL {
            return Err(Error::DegenerateDiagonals { det });
        }
        // Every w is consistent; the constraint reduces to rhs_0 in [0, 1].
        let gr = [-2.0 * c0.re, 2.0 * c0.im];
        let gr_norm = gr[0].hypot(gr[1]);
        let base = rhs0(0.0, 0.0);
        if (-BOX_TOL..=1.0 + BOX_TOL).contains(&base) {
            return Ok(finish(a, cfg, 0.0, 0.0, (base, base)));
        }
        if gr_norm <= COEFFICIENT_TOL {
            return Err(Error::ScanExhausted { radius_cap: cfg.radius_cap });
        }
        let target = base.clamp(0.0, 1.0) - base;
        let t = target / (gr_norm * gr_norm);
        let (x, y) = (t * gr[0], t * gr[1]);
        let q = rhs0(x, y).clamp(0.0, 1.0);
        return Ok(finish(a, cfg, x, y, (q, q)));
    } else {
        let s = h / (gnorm * gnorm);
        ([s * g[0], s * g[1]], [-g[1] / gnorm, g[0] / gnorm])
    };
    // Along the line, rhs_0 = r0 + t * slope must lie in the box.
    let r0 = rhs0(foot[0], foot[1]);
    let slope = rhs0(foot[0] + dir[0], foot[1] + dir[1]) - r0;
    let (low, high) = (-BOX_TOL - r0, 1.0 + BOX_TOL - r0);
    let (tlo, thi) = if slope.abs() <= COEFFICIENT_TOL {
        if low > 0.0 || high < 0.0 {
            return Err(Error::ScanExhausted { radius_cap: cfg.radius_cap });
        }
        (f64::NEG_INFINITY, f64::INFINITY)
    } else if slope > 0.0 {
        (low / slope, high / slope)
    } else {
        (high / slope, low / slope)
    };
    let t = 0.0_f64.clamp(tlo, thi);
    let (x, y) = (foot[0] + t * dir[0], foot[1] + t * dir[1]);
    let q = rhs0(x, y).clamp(0.0, 1.0);
    let ex = finish(a, cfg, x, y, (q, q));
    if ex.w_min > cfg.radius_cap {
        return Err(Error::ScanExhausted { radius_cap: cfg.radius_cap });
    }
    Ok(ex)
}

fn finish(a: &AlignedCoefficients, cfg: &ScanConfig, x: f64, y: f64, q_diagonal: (f64, f64)) -> DephasingExcess {
    let w_min = x.hypot(y);
    let turns = y.atan2(x).rem_euclid(2.0 * PI) / (2.0 * PI);
    let phase_index = ((turns * cfg.phase_steps as f64).round() as usize) % cfg.phase_steps;
    let gap = a.lambda_in[0] - a.lambda_in[1];
    DephasingExcess { w_min, epsilon_kt: 0.5 * gap * gap * w_min * w_min, phase_index, q_diagonal }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum BoundingIndices {
    Signal { n: usize, k: usize, l: usize },
    Quadruple { i: usize, j: usize, k: usize, l: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermoReport {
    pub units: &'static str,
    #[serde(rename = "landauer_kT")]
    pub landauer_kt: f64,
    #[serde(rename = "epsilon_lower_kT")]
    pub epsilon_lower_kt: f64,
    #[serde(rename = "total_lower_kT")]
    pub total_lower_kt: f64,
    pub verdict: ReversibilityVerdict,
    pub w_min: Option<f64>,
    pub bounding_quadruple: Option<BoundingIndices>,
    /// False when the verdict is inconclusive and no bound was attempted.
    pub bound_computed: bool,
    pub warnings: Vec<String>,
}

pub const NEGATIVE_TOTAL_WARNING: &str = "negative total: the operation may still be used to extract energy from the heat bath";

/// Builds the full report: verdict, Landauer term and the applicable bound.
pub fn analyze(e: &SignalEnsemble, q: &QuantumOperation, cfg: &ScanConfig) -> Result<ThermoReport> {
    cfg.validate()?;
    let a = align(e, q)?;
    analyze_aligned(&a, cfg)
}

pub fn analyze_aligned(a: &AlignedCoefficients, cfg: &ScanConfig) -> Result<ThermoReport> {
    let landauer_kt = landauer_from_spectra(&a.lambda_in, &a.lambda_out);
    let mut verdict = classify(a);
    let mut warnings = Vec::new();
    if a.degeneracy_warning {
        warnings.push("degenerate spectrum: eigenbasis fixed by the signals".to_string());
    }
    if verdict.conditioning_warning {
        warnings.push("stochastic map search hit a small pivot".to_string());
    }
    let mut epsilon = 0.0;
    let mut w_min = None;
    let mut bounding = None;
    let mut bound_computed = true;

    match verdict.kind {
        VerdictKind::ReversibleVia(_) => {}
        VerdictKind::SymmetricInconclusive => {
            bound_computed = false;
            warnings.push("inconclusive: every bounding coefficient meets a symmetric eigenvalue ratio".into());
        }
        VerdictKind::IrreversibleOffDiagonal => {
            let b = offdiag_bound_detailed(a)?;
            epsilon = b.epsilon_kt;
            bounding = b.bounding.map(|(n, k, l)| BoundingIndices::Signal { n, k, l });
            let blocked = b.candidates.iter().filter(|c| c.blocked.is_some()).count();
            if blocked > 0 {
                warnings.push(format!("{blocked} off-diagonal candidates blocked by vanishing divisors"));
            }
        }
        VerdictKind::IrreversibleDiagonal => {
            if a.dim_in() == 2 && a.dim_out() == 2 && a.signal_count() == 2 {
                let ex = dephasing_excess(a, cfg)?;
                w_min = Some(ex.w_min);
                if ex.w_min == 0.0 {
                    let (q11, q12) = ex.q_diagonal;
                    verdict.kind =
                        VerdictKind::ReversibleVia(StochasticMap::new(vec![vec![q11, q12], vec![1.0 - q11, 1.0 - q12]]));
                    verdict.details = "stochastic map found by the dephasing scan at w = 0".into();
                } else {
                    epsilon = ex.epsilon_kt;
                    bounding = Some(BoundingIndices::Quadruple { i: 0, j: 1, k: 0, l: 0 });
                }
            } else {
                bound_computed = false;
                verdict.kind = VerdictKind::SymmetricInconclusive;
                verdict.details = format!("{}; lower bound not computed for this dimension", verdict.details);
                warnings.push("inconclusive: lower bound not computed (co-diagonal, infeasible, beyond qubit pairs)".into());
            }
        }
    }
    let total = landauer_kt + epsilon;
    if total < -ENTROPY_CLAMP {
        warnings.push(NEGATIVE_TOTAL_WARNING.to_string());
    }
    Ok(ThermoReport {
        units: "kT",
        landauer_kt,
        epsilon_lower_kt: epsilon,
        total_lower_kt: total,
        verdict,
        w_min,
        bounding_quadruple: bounding,
        bound_computed,
        warnings,
    })
}
