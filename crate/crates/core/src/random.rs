//! Seeded random matrices and states for property sweeps and the
//! verification suite.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::qmat::{c, ComplexMatrix, DensityMatrix, C64};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phases of R's
/// diagonal removed).
pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let v = ginibre(dim, 1, rng);
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let amps: Vec<C64> = v.iter().map(|z| z / norm).collect();
    DensityMatrix::pure(&amps).expect("normalized")
}

/// Random mixed state of the given rank (Hilbert-Schmidt style `G G^dagger`).
pub fn mixed_state<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let mut m = m / c(tr, 0.0);
    for i in 0..dim {
        m[(i, i)] = c(m[(i, i)].re, 0.0);
        for j in (i + 1)..dim {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    DensityMatrix::new(m).expect("G G^dagger is a valid state")
}

/// Probability vector drawn uniformly from the simplex.
pub fn probabilities<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Column-stochastic matrix `p[k][i]` with `n_out` rows and `n_in` columns.
pub fn stochastic_matrix<R: Rng + ?Sized>(n_out: usize, n_in: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..n_in).map(|_| probabilities(n_out, rng)).collect();
    (0..n_out).map(|k| (0..n_in).map(|i| cols[i][k]).collect()).collect()
}

/// Random hermitian matrix with entries of order one.
pub fn hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(dim, dim, rng);
    (&g + g.adjoint()) * c(0.5, 0.0)
}
