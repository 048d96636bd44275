//! Dense complex-matrix kernel.
//!
//! Everything here works in units where k = T = 1 and entropies are in bits.
//! Matrices are small (dimension at most a few dozen in practice), so all
//! routines are dense and single-threaded.

mod eig;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Tolerance on Hermiticity and unit trace for density matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted in a density matrix.
pub const PSD_SLACK: f64 = 1e-10;
/// Eigenvalues below this are treated as exactly zero in entropies.
pub const ENTROPY_CLAMP: f64 = 1e-14;
/// Eigenvalue cutoff defining the support of a state.
pub const SUPPORT_CUTOFF: f64 = 1e-12;
/// Default cap on any matrix dimension produced by [`tensor`].
pub const DEFAULT_DIM_CAP: usize = 4096;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Builds a real diagonal matrix.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { c(0.0, 0.0) })
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (i..n).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
}

fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation("matrix has non-finite entries".into()))
    }
}

/// A validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        ensure_finite(&m)?;
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "density matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !is_hermitian(&m, HERMITIAN_TOL) {
            return Err(Error::Validation("density matrix is not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return Err(Error::Validation(format!("density matrix trace is {tr}, expected 1")));
        }
        let spec = eig_hermitian(&m)?;
        let min = spec.eigenvalues.last().copied().unwrap_or(0.0);
        if min < -PSD_SLACK {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(Self { m })
    }

    /// `|psi><psi|` for a normalized amplitude vector.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > HERMITIAN_TOL {
            return Err(Error::Validation(format!("state vector has norm^2 {norm}, expected 1")));
        }
        let n = amplitudes.len();
        Self::new(ComplexMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj()))
    }

    /// Pure qubit state `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
    pub fn bloch(theta: f64, phi: f64) -> Self {
        let amps = [
            c((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), phi),
        ];
        Self::pure(&amps).expect("Bloch parameterization is always normalized")
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(diag(probs))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { m: diag(&vec![1.0 / dim as f64; dim]) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns; column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    /// Smallest gap between consecutive eigenvalues (infinite for dim 1).
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = diag(&self.eigenvalues);
        &self.eigenvectors * d * self.eigenvectors.adjoint()
    }
}

/// Rotates a vector's global phase so its largest-magnitude entry is real and
/// positive. Among near-equal magnitudes, the lowest index wins.
fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max - 1e-12).unwrap();
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot] = c(v[pivot].re, 0.0);
}

fn lex_desc(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im));
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

/// Hermitian eigendecomposition with a deterministic ordering and phase.
///
/// Eigenvalues come out descending. Each eigenvector is phase-fixed (largest
/// entry real positive) and eigenvalues closer than 1e-12 are ordered by a
/// lexicographic comparison of their eigenvectors.
pub fn eig_hermitian(h: &ComplexMatrix) -> Result<Spectrum> {
    ensure_finite(h)?;
    if h.nrows() != h.ncols() {
        return Err(Error::Dimension(format!("eig of non-square {}x{}", h.nrows(), h.ncols())));
    }
    if !is_hermitian(h, HERMITIAN_TOL) {
        return Err(Error::Validation("eig_hermitian input is not Hermitian".into()));
    }
    let n = h.nrows();
    let (values, vecs) = eig::jacobi_hermitian(h);
    let mut pairs: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|j| {
            let mut col: Vec<C64> = vecs.column(j).iter().copied().collect();
            fix_phase(&mut col);
            (values[j], col)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[end - 1].0 - pairs[end].0 <= 1e-12 {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lex_desc(&a.1, &b.1));
        start = end;
    }
    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| pairs[j].1[i]);
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// Kronecker product with the default dimension cap.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    tensor_with_cap(a, b, DEFAULT_DIM_CAP)
}

pub fn tensor_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r <= cap && c <= cap => Ok(a.kronecker(b)),
        _ => Err(Error::Dimension(format!(
            "tensor product {}x{} (x) {}x{} exceeds dimension cap {cap}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        ))),
    }
}

/// Tensor product of two density matrices.
pub fn tensor_states(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    Ok(DensityMatrix { m: tensor(a.matrix(), b.matrix())? })
}

/// Partial trace of a square operator on a multipartite space, keeping the
/// factors listed in `keep` (in their original order).
pub fn partial_trace_matrix(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::Dimension(format!(
            "partial trace dims {dims:?} (product {total}) do not match {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() || keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Dimension(format!("invalid kept factors {keep:?} for dims {dims:?}")));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|f| !keep_sorted.contains(f)).collect();
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&f| dims[f]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&f| dims[f]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let tr_dim: usize = traced_dims.iter().product();

    // strides[f] = product of dims after factor f (row-major multi-index)
    let mut strides = vec![1usize; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let offset = |factors: &[usize], fdims: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for (pos, &f) in factors.iter().enumerate().rev() {
            off += (idx % fdims[pos]) * strides[f];
            idx /= fdims[pos];
        }
        off
    };
    let kept_off: Vec<usize> = (0..out_dim).map(|i| offset(&keep_sorted, &kept_dims, i)).collect();
    let tr_off: Vec<usize> = (0..tr_dim).map(|t| offset(&traced, &traced_dims, t)).collect();

    Ok(ComplexMatrix::from_fn(out_dim, out_dim, |i, j| {
        tr_off
            .iter()
            .map(|&t| m[(kept_off[i] + t, kept_off[j] + t)])
            .sum()
    }))
}

pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    DensityMatrix::new(partial_trace_matrix(rho.matrix(), dims, keep)?)
}

fn log2_clamped(x: f64) -> f64 {
    if x < ENTROPY_CLAMP {
        0.0
    } else {
        x * x.log2()
    }
}

/// Von Neumann entropy in bits.
pub fn entropy(rho: &DensityMatrix) -> f64 {
    let spec = eig_hermitian(rho.matrix()).expect("density matrices are Hermitian");
    -spec.eigenvalues.iter().map(|&l| log2_clamped(l)).sum::<f64>()
}

/// Shannon entropy in bits of a probability vector.
pub fn shannon(probs: &[f64]) -> f64 {
    -probs.iter().map(|&p| log2_clamped(p)).sum::<f64>()
}

/// Relative entropy `S(rho||sigma)` in bits; `f64::INFINITY` when the support
/// of `rho` is not contained in that of `sigma`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "relative entropy of dim {} vs dim {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let s = eig_hermitian(sigma.matrix())?;
    let v = &s.eigenvectors;
    let rho_in_sigma = v.adjoint() * rho.matrix() * v;
    let mut cross = 0.0;
    for (k, &sk) in s.eigenvalues.iter().enumerate() {
        let weight = rho_in_sigma[(k, k)].re;
        if sk <= SUPPORT_CUTOFF {
            if weight > SUPPORT_CUTOFF {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += weight * sk.log2();
    }
    Ok(-entropy(rho) - cross)
}

/// Schatten-1 norm: the sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("trace norm of non-square {}x{}", a.nrows(), a.ncols())));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(a.clone().singular_values().iter().sum())
}

/// Checks `U U^dagger = I` and returns the largest entry deviation.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    let prod = u * u.adjoint();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let target = if i == j { 1.0 } else { 0.0 };
            (prod[(i, j)] - c(target, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

/// Serializable complex number as an `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPair(pub f64, pub f64);

impl From<C64> for ComplexPair {
    fn from(z: C64) -> Self {
        Self(z.re, z.im)
    }
}
