//! Signal ensembles, quantum operations, and the aligned coefficient
//! representation used by the reversibility test.

use crate::error::{Error, Result};
use crate::qmat::{self, c, eig_hermitian, ComplexMatrix, DensityMatrix, Spectrum, C64};

/// Tolerance on probabilities summing to one.
pub const PROBABILITY_TOL: f64 = 1e-10;
/// Tolerance on Kraus completeness.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Eigenvalue gaps below this are reported as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-9;

/// A probabilistic mixture of same-dimension input states.
#[derive(Debug, Clone)]
pub struct SignalEnsemble {
    signals: Vec<(f64, DensityMatrix)>,
}

impl SignalEnsemble {
    pub fn new(signals: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        let Some((_, first)) = signals.first() else {
            return Err(Error::Validation("ensemble must contain at least one signal".into()));
        };
        let dim = first.dim();
        if let Some((n, _)) = signals.iter().enumerate().find(|(_, (_, s))| s.dim() != dim) {
            return Err(Error::Dimension(format!("signal {n} has a different dimension")));
        }
        if let Some((n, (p, _))) = signals.iter().enumerate().find(|(_, (p, _))| p.is_nan() || *p < 0.0) {
            return Err(Error::Validation(format!("signal {n} has negative probability {p}")));
        }
        let total: f64 = signals.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::Validation(format!("probabilities must sum to 1 (got {total})")));
        }
        Ok(Self { signals })
    }

    pub fn single(state: DensityMatrix) -> Self {
        Self { signals: vec![(1.0, state)] }
    }

    pub fn signals(&self) -> &[(f64, DensityMatrix)] {
        &self.signals
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.signals.iter().map(|(p, _)| *p).collect()
    }

    pub fn states(&self) -> impl Iterator<Item = &DensityMatrix> {
        self.signals.iter().map(|(_, s)| s)
    }

    pub fn dim(&self) -> usize {
        self.signals[0].1.dim()
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

fn weighted_sum<'a>(items: impl Iterator<Item = (f64, &'a ComplexMatrix)>, dim: usize) -> ComplexMatrix {
    items.fold(ComplexMatrix::zeros(dim, dim), |acc, (p, m)| acc + m * c(p, 0.0))
}

/// The average input `sum_n p_n rho_n`.
pub fn average_state(e: &SignalEnsemble) -> DensityMatrix {
    let m = weighted_sum(e.signals.iter().map(|(p, s)| (*p, s.matrix())), e.dim());
    DensityMatrix::new(m).expect("convex combination of states is a state")
}

/// A CPTP map in Kraus form.
#[derive(Debug, Clone)]
pub struct QuantumOperation {
    kraus: Vec<ComplexMatrix>,
    label: Option<String>,
}

impl QuantumOperation {
    /// Validates completeness `sum_k K_k^dagger K_k = I`.
    pub fn new(kraus: Vec<ComplexMatrix>, label: Option<String>) -> Result<Self> {
        let Some(first) = kraus.first() else {
            return Err(Error::Validation("operation needs at least one Kraus operator".into()));
        };
        let (dout, din) = first.shape();
        if kraus.iter().any(|k| k.shape() != (dout, din)) {
            return Err(Error::Dimension("Kraus operators have inconsistent shapes".into()));
        }
        if kraus.iter().flat_map(|k| k.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("Kraus operator has non-finite entries".into()));
        }
        let sum = kraus
            .iter()
            .fold(ComplexMatrix::zeros(din, din), |acc, k| acc + k.adjoint() * k);
        let defect = (sum - ComplexMatrix::identity(din, din))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if defect > COMPLETENESS_TOL {
            return Err(Error::Validation(format!(
                "Kraus operators are not trace preserving (completeness defect {defect:e})"
            )));
        }
        Ok(Self { kraus, label })
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn dim_in(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn identity(dim: usize) -> Self {
        Self { kraus: vec![ComplexMatrix::identity(dim, dim)], label: Some("identity".into()) }
    }

    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u], Some("unitary".into()))
    }

    /// Replaces every input by `target`.
    pub fn reset_to(target: &DensityMatrix, dim_in: usize) -> Self {
        let spec = eig_hermitian(target.matrix()).expect("states are Hermitian");
        let d = target.dim();
        let mut kraus = Vec::new();
        for (k, &lk) in spec.eigenvalues.iter().enumerate() {
            if lk <= 0.0 {
                continue;
            }
            let amp = c(lk.sqrt(), 0.0);
            for j in 0..dim_in {
                kraus.push(ComplexMatrix::from_fn(d, dim_in, |r, col| {
                    if col == j {
                        spec.eigenvectors[(r, k)] * amp
                    } else {
                        c(0.0, 0.0)
                    }
                }));
            }
        }
        Self { kraus, label: Some("reset".into()) }
    }

    /// Measure in the columns of `basis_in`, then prepare column `k` of
    /// `basis_out` with probability `p[k][i]`.
    pub fn classical(p: &[Vec<f64>], basis_in: &ComplexMatrix, basis_out: &ComplexMatrix) -> Result<Self> {
        if p.len() != basis_out.ncols() || p.iter().any(|row| row.len() != basis_in.ncols()) {
            return Err(Error::Dimension("stochastic matrix does not match the bases".into()));
        }
        let mut kraus = Vec::new();
        for (k, row) in p.iter().enumerate() {
            for (i, &pki) in row.iter().enumerate() {
                if pki <= 0.0 {
                    continue;
                }
                let ket = basis_out.column(k);
                let bra = basis_in.column(i).adjoint();
                kraus.push((ket * bra) * c(pki.sqrt(), 0.0));
            }
        }
        Self::new(kraus, Some("classical".into()))
    }
}

/// `sum_k K rho K^dagger`.
pub fn apply(q: &QuantumOperation, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if q.dim_in() != rho.dim() {
        return Err(Error::Dimension(format!(
            "operation acts on dim {}, state has dim {}",
            q.dim_in(),
            rho.dim()
        )));
    }
    let d = q.dim_out();
    let out = q
        .kraus
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |acc, k| acc + k * rho.matrix() * k.adjoint());
    DensityMatrix::new(hermitize(out))
}

/// Removes round-off anti-Hermitian parts.
pub(crate) fn hermitize(m: ComplexMatrix) -> ComplexMatrix {
    (&m + m.adjoint()) * c(0.5, 0.0)
}

/// Qubit dephasing `rho -> r rho + (1 - r) diag(rho)`.
pub fn dephasing_operation(r: f64) -> Result<QuantumOperation> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Validation(format!("dephasing strength r = {r} outside [0, 1]")));
    }
    let k0 = ComplexMatrix::identity(2, 2) * c(((1.0 + r) / 2.0).sqrt(), 0.0);
    let k1 = qmat::diag(&[1.0, -1.0]) * c(((1.0 - r) / 2.0).sqrt(), 0.0);
    QuantumOperation::new(vec![k0, k1], Some(format!("dephasing({r})")))
}

/// The dephasing strength produced by a CNOT whose target starts in
/// `alpha|0> + beta|1>`: `r = conj(alpha) beta + alpha conj(beta)`.
pub fn cnot_dephasing_r(alpha: C64, beta: C64) -> f64 {
    (alpha.conj() * beta + alpha * beta.conj()).re
}

/// Coefficient description of an ensemble and its image under an
/// operation, each expressed in the eigenbasis of its own average.
#[derive(Debug, Clone)]
pub struct AlignedCoefficients {
    pub probabilities: Vec<f64>,
    /// Eigenvalues of the average input, descending.
    pub lambda_in: Vec<f64>,
    /// Eigenvalues of the average output, descending.
    pub lambda_out: Vec<f64>,
    /// Columns are the input eigenvectors.
    pub basis_in: ComplexMatrix,
    pub basis_out: ComplexMatrix,
    /// Per-signal input matrices in `basis_in`.
    pub mu_in: Vec<ComplexMatrix>,
    /// Per-signal output matrices in `basis_out`.
    pub mu_out: Vec<ComplexMatrix>,
    pub degeneracy_warning: bool,
}

impl AlignedCoefficients {
    pub fn dim_in(&self) -> usize {
        self.lambda_in.len()
    }

    pub fn dim_out(&self) -> usize {
        self.lambda_out.len()
    }

    pub fn signal_count(&self) -> usize {
        self.mu_in.len()
    }

    /// Largest deviation of the type invariants (averages reproduce the
    /// spectra; each mu is Hermitian with unit trace).
    pub fn invariant_defect(&self) -> f64 {
        let avg = |mus: &[ComplexMatrix], lam: &[f64]| -> f64 {
            let d = lam.len();
            let sum = weighted_sum(self.probabilities.iter().copied().zip(mus.iter()), d);
            let mut worst: f64 = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let target = if i == j { lam[i] } else { 0.0 };
                    worst = worst.max((sum[(i, j)] - c(target, 0.0)).norm());
                }
            }
            worst
        };
        let shape = |m: &ComplexMatrix| -> f64 {
            let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            herm.max((m.trace() - c(1.0, 0.0)).norm())
        };
        let mut worst = avg(&self.mu_in, &self.lambda_in).max(avg(&self.mu_out, &self.lambda_out));
        for m in self.mu_in.iter().chain(&self.mu_out) {
            worst = worst.max(shape(m));
        }
        worst
    }
}

/// Within each cluster of (numerically) degenerate eigenvalues, replace the
/// eigenvectors by the eigenbasis of the first signal whose compression to the
/// cluster is non-degenerate. Clusters no signal resolves keep the
/// deterministic basis from [`eig_hermitian`].
fn resolve_degenerate(spec: Spectrum, avg: &ComplexMatrix, signals: &[&ComplexMatrix]) -> Spectrum {
    let n = spec.eigenvalues.len();
    let mut vecs = spec.eigenvectors;
    let mut values = spec.eigenvalues;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end - 1] - values[end] < DEGENERACY_GAP {
            end += 1;
        }
        if end - start > 1 {
            let block = vecs.columns(start, end - start).into_owned();
            for s in signals {
                let compressed = block.adjoint() * *s * &block;
                let compressed = hermitize(compressed);
                let Ok(inner) = eig_hermitian(&compressed) else { continue };
                if inner.min_gap() < DEGENERACY_GAP {
                    continue;
                }
                let rotated = &block * &inner.eigenvectors;
                for (off, col) in (start..end).enumerate() {
                    let mut v: Vec<C64> = rotated.column(off).iter().copied().collect();
                    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
                    let pivot = v.iter().position(|z| z.norm() >= max - 1e-12).unwrap();
                    let phase = v[pivot].conj() / v[pivot].norm();
                    v.iter_mut().for_each(|z| *z *= phase);
                    for (r, z) in v.into_iter().enumerate() {
                        vecs[(r, col)] = z;
                    }
                    let vc = vecs.column(col);
                    values[col] = (vc.adjoint() * avg * vc)[(0, 0)].re;
                }
                break;
            }
        }
        start = end;
    }
    Spectrum { eigenvalues: values, eigenvectors: vecs }
}

/// Diagonalizes the average input and output separately and expresses every
/// signal in the matching basis.
pub fn align(e: &SignalEnsemble, q: &QuantumOperation) -> Result<AlignedCoefficients> {
    let outputs: Vec<DensityMatrix> = e.states().map(|s| apply(q, s)).collect::<Result<_>>()?;
    let probabilities = e.probabilities();

    let avg_in = average_state(e);
    let avg_out = weighted_sum(
        probabilities.iter().copied().zip(outputs.iter().map(|o| o.matrix())),
        q.dim_out(),
    );
    let avg_out = hermitize(avg_out);

    let raw_in = eig_hermitian(avg_in.matrix())?;
    let raw_out = eig_hermitian(&avg_out)?;
    let degeneracy_warning = raw_in.min_gap() < DEGENERACY_GAP || raw_out.min_gap() < DEGENERACY_GAP;

    let inputs: Vec<&ComplexMatrix> = e.states().map(|s| s.matrix()).collect();
    let out_refs: Vec<&ComplexMatrix> = outputs.iter().map(|s| s.matrix()).collect();
    let spec_in = resolve_degenerate(raw_in, avg_in.matrix(), &inputs);
    let spec_out = resolve_degenerate(raw_out, &avg_out, &out_refs);

    let vin = &spec_in.eigenvectors;
    let vout = &spec_out.eigenvectors;
    let mu_in = inputs.iter().map(|s| hermitize(vin.adjoint() * *s * vin)).collect();
    let mu_out = out_refs.iter().map(|s| hermitize(vout.adjoint() * *s * vout)).collect();

    Ok(AlignedCoefficients {
        probabilities,
        lambda_in: spec_in.eigenvalues,
        lambda_out: spec_out.eigenvalues,
        basis_in: spec_in.eigenvectors,
        basis_out: spec_out.eigenvectors,
        mu_in,
        mu_out,
        degeneracy_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::diag;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn max_abs(m: &ComplexMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn case_study() -> SignalEnsemble {
        SignalEnsemble::new(vec![
            (0.3, DensityMatrix::bloch(0.0, 0.0)),
            (0.7, DensityMatrix::bloch(FRAC_PI_2, 0.0)),
        ])
        .unwrap()
    }

    #[test]
    fn average_of_single_signal() {
        let rho = DensityMatrix::bloch(0.4, 0.9);
        let e = SignalEnsemble::single(rho.clone());
        assert!(max_abs(&(average_state(&e).matrix() - rho.matrix())) < 1e-15);
    }

    #[test]
    fn average_of_basis_states() {
        let e = SignalEnsemble::new(vec![
            (0.5, DensityMatrix::diagonal(&[1.0, 0.0]).unwrap()),
            (0.5, DensityMatrix::diagonal(&[0.0, 1.0]).unwrap()),
        ])
        .unwrap();
        assert!(max_abs(&(average_state(&e).matrix() - diag(&[0.5, 0.5]))) < 1e-15);
    }

    #[test]
    fn average_of_case_study() {
        // 0.3 |0><0| + 0.7 |+><+| evaluated entrywise
        let expected = [[0.3 + 0.7 * 0.5, 0.7 * 0.5], [0.7 * 0.5, 0.7 * 0.5]];
        let avg = average_state(&case_study());
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(avg.matrix()[(i, j)].re, expected[i][j], epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(expected[0][0], 0.65, epsilon = 1e-15);
    }

    #[test]
    fn identity_channel_is_noop() {
        let rho = DensityMatrix::bloch(1.0, 2.0);
        let out = apply(&QuantumOperation::identity(2), &rho).unwrap();
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-15);
    }

    #[test]
    fn full_dephasing_of_plus() {
        let out = apply(&dephasing_operation(0.0).unwrap(), &DensityMatrix::bloch(FRAC_PI_2, 0.0)).unwrap();
        assert!(max_abs(&(out.matrix() - diag(&[0.5, 0.5]))) < 1e-15);
    }

    #[test]
    fn partial_dephasing_closed_form() {
        for &r in &[0.0, 0.25, FRAC_1_SQRT_2, 1.0] {
            let v = DensityMatrix::bloch(1.1, -0.6);
            let out = apply(&dephasing_operation(r).unwrap(), &v).unwrap();
            let m = v.matrix();
            let expected = m * c(r, 0.0) + diag(&[m[(0, 0)].re, m[(1, 1)].re]) * c(1.0 - r, 0.0);
            assert!(max_abs(&(out.matrix() - expected)) < 1e-14);
        }
        let out = apply(&dephasing_operation(FRAC_1_SQRT_2).unwrap(), &DensityMatrix::bloch(FRAC_PI_2, 0.0)).unwrap();
        assert_abs_diff_eq!(out.matrix()[(0, 1)].re, 0.5 * FRAC_1_SQRT_2, epsilon = 1e-14);
        assert_abs_diff_eq!(out.matrix()[(0, 0)].re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn dephasing_range_checked() {
        assert!(dephasing_operation(-0.1).is_err());
        assert!(dephasing_operation(1.01).is_err());
    }

    #[test]
    fn ensemble_validation() {
        let s = DensityMatrix::bloch(0.0, 0.0);
        let err = SignalEnsemble::new(vec![(0.5, s.clone()), (0.4, s.clone())]).unwrap_err();
        assert!(err.to_string().contains("probabilities must sum to 1"));
        assert!(SignalEnsemble::new(vec![]).is_err());
        assert!(SignalEnsemble::new(vec![(1.2, s.clone()), (-0.2, s.clone())]).is_err());
        assert!(SignalEnsemble::new(vec![(0.5, s), (0.5, DensityMatrix::maximally_mixed(3))]).is_err());
    }

    #[test]
    fn incomplete_kraus_rejected() {
        let k = ComplexMatrix::identity(2, 2) * c(0.9, 0.0);
        assert!(QuantumOperation::new(vec![k], None).is_err());
    }

    #[test]
    fn cnot_r_formula() {
        assert_abs_diff_eq!(cnot_dephasing_r(c(1.0, 0.0), c(0.0, 0.0)), 0.0);
        let h = FRAC_1_SQRT_2;
        assert_abs_diff_eq!(cnot_dephasing_r(c(h, 0.0), c(h, 0.0)), 1.0, epsilon = 1e-15);
        let (a, b) = ((FRAC_PI_4 / 2.0).cos(), (FRAC_PI_4 / 2.0).sin());
        assert_abs_diff_eq!(cnot_dephasing_r(c(a, 0.0), c(b, 0.0)), FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn classical_ensemble_coefficients() {
        let e = SignalEnsemble::new(vec![
            (0.7, DensityMatrix::diagonal(&[1.0, 0.0]).unwrap()),
            (0.3, DensityMatrix::diagonal(&[0.0, 1.0]).unwrap()),
        ])
        .unwrap();
        let a = align(&e, &dephasing_operation(0.4).unwrap()).unwrap();
        for (n, mu) in a.mu_in.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    let expected = if i == j && i == n { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(mu[(i, j)].norm(), expected, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn single_input_coefficients() {
        let rho = DensityMatrix::new(diag(&[0.6, 0.4]) + ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.0, 0.0)])).unwrap();
        let a = align(&SignalEnsemble::single(rho), &dephasing_operation(0.3).unwrap()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { a.lambda_in[i] } else { 0.0 };
                assert_abs_diff_eq!(a.mu_in[0][(i, j)].norm(), expected, epsilon = 1e-12);
                let expected = if i == j { a.lambda_out[i] } else { 0.0 };
                assert_abs_diff_eq!(a.mu_out[0][(i, j)].norm(), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn case_study_outputs_have_coherences() {
        let q = dephasing_operation(FRAC_1_SQRT_2).unwrap();
        let e = case_study();
        let a = align(&e, &q).unwrap();
        // Oracle: change of basis done by hand from the channel's closed form.
        let outs: Vec<ComplexMatrix> = e
            .states()
            .map(|s| {
                let m = s.matrix();
                m * c(FRAC_1_SQRT_2, 0.0) + diag(&[m[(0, 0)].re, m[(1, 1)].re]) * c(1.0 - FRAC_1_SQRT_2, 0.0)
            })
            .collect();
        for (n, o) in outs.iter().enumerate() {
            let v = &a.basis_out;
            let direct = v.adjoint() * o * v;
            assert!(max_abs(&(direct - &a.mu_out[n])) < 1e-12);
            assert!(a.mu_out[n][(0, 1)].norm() > 1e-3);
        }
        assert!(a.invariant_defect() < 1e-9);
        assert!(!a.degeneracy_warning);
    }

    #[test]
    fn degenerate_average_uses_signal_basis() {
        // Antipodal pure states with equal weight average to I/2.
        let e = SignalEnsemble::new(vec![
            (0.5, DensityMatrix::bloch(FRAC_PI_4, 0.0)),
            (0.5, DensityMatrix::bloch(3.0 * FRAC_PI_4, std::f64::consts::PI)),
        ])
        .unwrap();
        let a = align(&e, &dephasing_operation(0.0).unwrap()).unwrap();
        assert!(a.degeneracy_warning);
        // inputs become classical in the resolved basis
        for mu in &a.mu_in {
            assert!(mu[(0, 1)].norm() < 1e-9);
        }
        // outputs become co-diagonal
        for mu in &a.mu_out {
            assert!(mu[(0, 1)].norm() < 1e-9);
        }
    }
}
