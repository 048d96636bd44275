//! Block decomposition of an implementation's unitary and of the deviation
//! `rho' - rho*`, with the operators used to bound the coefficients.

use crate::ensemble::AlignedCoefficients;
use crate::error::{Error, Result};
use crate::qmat::{c, ComplexMatrix, C64};

use super::{average_from, product_reference, Implementation};

/// `A[k][i]` blocks of `U` between output basis vector `k` and input basis
/// vector `i`, and `delta[k][l]` blocks of `rho' - rho*` in the output basis.
#[derive(Debug, Clone)]
pub struct ProofOperatorSet {
    pub a: Vec<Vec<ComplexMatrix>>,
    pub delta: Vec<Vec<ComplexMatrix>>,
    pub sigma: ComplexMatrix,
    pub lambda_in: Vec<f64>,
    pub lambda_out: Vec<f64>,
}

impl ProofOperatorSet {
    pub fn build(imp: &Implementation, coeffs: &AlignedCoefficients) -> Result<Self> {
        let (ds, _, _) = imp.dims();
        if coeffs.dim_in() != ds || coeffs.dim_out() != ds {
            return Err(Error::Dimension("aligned coefficients do not match the system".into()));
        }
        let de = imp.env_dim();
        let rho_prime = imp.joint_output(&average_from(coeffs)?)?;
        let reference = product_reference(imp, &rho_prime)?;
        let diff = rho_prime.matrix() - reference.matrix();
        let r = &coeffs.basis_out;
        let delta = (0..ds)
            .map(|k| {
                (0..ds)
                    .map(|l| {
                        let mut blk = ComplexMatrix::zeros(de, de);
                        for s1 in 0..ds {
                            for s2 in 0..ds {
                                let w = r[(s1, k)].conj() * r[(s2, l)];
                                blk += diff.view((s1 * de, s2 * de), (de, de)) * w;
                            }
                        }
                        blk
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            a: imp.blocks(&coeffs.basis_in, &coeffs.basis_out),
            delta,
            sigma: imp.environment_state().into_matrix(),
            lambda_in: coeffs.lambda_in.clone(),
            lambda_out: coeffs.lambda_out.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    fn env_dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn q(&self, k: usize, l: usize, i: usize, j: usize) -> C64 {
        (&self.a[k][i] * &self.sigma * self.a[l][j].adjoint()).trace()
    }

    /// Largest deviation of `sum_m A_km A_lm^dagger` and
    /// `sum_m A_mi^dagger A_mj` from `delta I`.
    pub fn unitarity_defect(&self) -> f64 {
        let (d, de) = (self.dim(), self.env_dim());
        let eye = ComplexMatrix::identity(de, de);
        let mut worst: f64 = 0.0;
        for x in 0..d {
            for y in 0..d {
                let mut rows = ComplexMatrix::zeros(de, de);
                let mut cols = ComplexMatrix::zeros(de, de);
                for m in 0..d {
                    rows += &self.a[x][m] * self.a[y][m].adjoint();
                    cols += self.a[m][x].adjoint() * &self.a[m][y];
                }
                let target = if x == y { eye.clone() } else { ComplexMatrix::zeros(de, de) };
                for m in [rows, cols] {
                    worst = worst.max((m - &target).iter().map(|z| z.norm()).fold(0.0, f64::max));
                }
            }
        }
        worst
    }

    /// Largest residual of `(lambda_j lambda'_k - lambda_i lambda'_l) q(kl|ij) =
    /// sum_m lambda'_k Tr[A_ki A_mj^dagger Delta_ml] - lambda'_l Tr[A_mi A_lj^dagger Delta_km]`.
    pub fn coefficient_identity_residual(&self) -> f64 {
        let d = self.dim();
        let (lam, lamp) = (&self.lambda_in, &self.lambda_out);
        let delta = self.delta_full();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let lhs = self.q(k, l, i, j) * (lam[j] * lamp[k] - lam[i] * lamp[l]);
                        let full_space = (self.g_left(i, j, k, l) * c(lamp[k], 0.0)
                            - self.g_right(i, j, k, l) * c(lamp[l], 0.0))
                            * &delta;
                        worst = worst.max((lhs - full_space.trace()).norm());
                    }
                }
            }
        }
        worst
    }

    /// Largest residual of `(lambda_i - lambda_j) q(kk|ij) = sum_{m != k} Tr[H_ijkm (rho' - rho*)]`.
    pub fn diagonal_identity_residual(&self) -> f64 {
        let d = self.dim();
        let delta = self.delta_full();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                for k in 0..d {
                    let lhs = self.q(k, k, i, j) * (self.lambda_in[i] - self.lambda_in[j]);
                    let rhs: C64 = (0..d).filter(|&m| m != k).map(|m| (self.h_op(i, j, k, m) * &delta).trace()).sum();
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
        worst
    }

    /// Largest excess over one of any diagonal entry of `G^L G^L^dagger`,
    /// `G^R^dagger G^R` or `H H^dagger`.
    pub fn contraction_excess(&self) -> f64 {
        let d = self.dim();
        let excess = |m: ComplexMatrix| -> f64 { (0..m.nrows()).map(|x| m[(x, x)].re - 1.0).fold(f64::MIN, f64::max) };
        let mut worst = f64::MIN;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let gl = self.g_left(i, j, k, l);
                        let gr = self.g_right(i, j, k, l);
                        worst = worst.max(excess(&gl * gl.adjoint())).max(excess(gr.adjoint() * &gr));
                        if i != j && l != k {
                            let h = self.h_op(i, j, k, l);
                            worst = worst.max(excess(&h * h.adjoint()));
                        }
                    }
                }
            }
        }
        worst
    }

    /// `rho' - rho*` assembled from its blocks, in the output frame.
    pub fn delta_full(&self) -> ComplexMatrix {
        let (d, de) = (self.dim(), self.env_dim());
        let mut full = ComplexMatrix::zeros(d * de, d * de);
        for k in 0..d {
            for l in 0..d {
                full.view_mut((k * de, l * de), (de, de)).copy_from(&self.delta[k][l]);
            }
        }
        full
    }

    /// `|x><y| (x) block` in the output frame.
    fn embed(&self, x: usize, y: usize, block: &ComplexMatrix) -> ComplexMatrix {
        let (d, de) = (self.dim(), self.env_dim());
        let mut full = ComplexMatrix::zeros(d * de, d * de);
        full.view_mut((x * de, y * de), (de, de)).copy_from(block);
        full
    }

    /// `F_ijklm = |l><m| (x) A_ki A_mj^dagger`.
    fn f_op(&self, i: usize, j: usize, k: usize, l: usize, m: usize) -> ComplexMatrix {
        self.embed(l, m, &(&self.a[k][i] * self.a[m][j].adjoint()))
    }

    pub fn g_left(&self, i: usize, j: usize, k: usize, l: usize) -> ComplexMatrix {
        let n = self.dim() * self.env_dim();
        (0..self.dim()).fold(ComplexMatrix::zeros(n, n), |acc, m| acc + self.f_op(i, j, k, l, m))
    }

    pub fn g_right(&self, i: usize, j: usize, k: usize, l: usize) -> ComplexMatrix {
        let n = self.dim() * self.env_dim();
        (0..self.dim()).fold(ComplexMatrix::zeros(n, n), |acc, m| acc + self.f_op(j, i, l, k, m).adjoint())
    }

    /// `H_ijkm = |m><k| (x) A_mi A_kj^dagger - |k><m| (x) A_ki A_mj^dagger`.
    pub fn h_op(&self, i: usize, j: usize, k: usize, m: usize) -> ComplexMatrix {
        self.embed(m, k, &(&self.a[m][i] * self.a[k][j].adjoint()))
            - self.embed(k, m, &(&self.a[k][i] * self.a[m][j].adjoint()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{align, SignalEnsemble};
    use crate::qmat::DensityMatrix;
    use crate::random;
    use crate::simulator::{cnot_dephasing_impl, random_reset_impl};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn operator_identities_on_random_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ds in [2, 3] {
            let imp = random_reset_impl(ds, 2, &mut rng).unwrap();
            let e = SignalEnsemble::new(vec![
                (0.35, random::mixed_state(ds, 2, &mut rng)),
                (0.65, random::pure_state(ds, &mut rng)),
            ])
            .unwrap();
            let a = align(&e, &imp.channel().unwrap()).unwrap();
            let ops = ProofOperatorSet::build(&imp, &a).unwrap();
            assert!(ops.unitarity_defect() < 1e-8);
            assert!(ops.coefficient_identity_residual() < 1e-10);
            assert!(ops.diagonal_identity_residual() < 1e-10);
            assert!(ops.contraction_excess() < 1e-10);
        }
    }

    #[test]
    fn cnot_operator_identities() {
        let imp = cnot_dephasing_impl(c(0.8, 0.0), c(0.6, 0.0), 3).unwrap();
        let e = SignalEnsemble::new(vec![(0.3, DensityMatrix::bloch(0.0, 0.0)), (0.7, DensityMatrix::bloch(1.2, 0.4))])
            .unwrap();
        let a = align(&e, &imp.channel().unwrap()).unwrap();
        let ops = ProofOperatorSet::build(&imp, &a).unwrap();
        assert!(ops.unitarity_defect() < 1e-12);
        assert!(ops.coefficient_identity_residual() < 1e-12);
        assert!(ops.diagonal_identity_residual() < 1e-12);
    }
}
