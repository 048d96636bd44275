//! Explicit system-auxiliary-bath implementations of operations, and
//! numerical checks of the cost identities and inequalities on them.
//!
//! Tensor factors are ordered system, auxiliary, bath, with the system
//! index most significant.

mod proof;
mod protocol;

pub use proof::ProofOperatorSet;
pub use protocol::{
    special_case_protocol_ledger, standard_protocol_ledger, standard_protocol_ledger_with_gauge, ProtocolLedger,
};

use std::f64::consts::LN_2;

use rand::Rng;

use crate::ensemble::{average_state, AlignedCoefficients, QuantumOperation, SignalEnsemble};
use crate::error::{Error, Result};
use crate::qmat::{
    self, c, diag, entropy, partial_trace, relative_entropy, tensor, tensor_states, trace_norm, unitarity_defect,
    ComplexMatrix, DensityMatrix, C64,
};
use crate::random;

/// Largest accepted deviation of `U U^dagger` from the identity.
pub const UNITARITY_TOL: f64 = 1e-9;
/// Reset residual above which the cost identity does not apply.
pub const RESET_TOL: f64 = 1e-6;
/// Tolerance on the coefficient-tensor invariants.
pub const EXTRACTION_TOL: f64 = 1e-8;

/// Canonical state of a diagonal Hamiltonian at unit inverse temperature.
#[derive(Debug, Clone)]
pub struct HeatBath {
    energies: Vec<f64>,
    state: DensityMatrix,
}

impl HeatBath {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.is_empty() || energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Validation("bath energies must be finite and non-empty".into()));
        }
        let ground = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = energies.iter().map(|e| (ground - e).exp()).collect();
        let z: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let state = DensityMatrix::diagonal(&probs)?;
        Ok(Self { energies, state })
    }

    /// Levels `0, spacing, 2 spacing, ...`.
    pub fn equally_spaced(dim: usize, spacing: f64) -> Result<Self> {
        Self::new((0..dim).map(|k| k as f64 * spacing).collect())
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn hamiltonian(&self) -> ComplexMatrix {
        diag(&self.energies)
    }

    /// `Tr[H rho]` for a bath-sized matrix.
    pub fn energy_of(&self, rho: &ComplexMatrix) -> f64 {
        self.energies.iter().enumerate().map(|(k, e)| e * rho[(k, k)].re).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Implementation {
    unitary: ComplexMatrix,
    aux_state: DensityMatrix,
    bath: HeatBath,
    system_dim: usize,
}

impl Implementation {
    pub fn new(unitary: ComplexMatrix, aux_state: DensityMatrix, bath: HeatBath, system_dim: usize) -> Result<Self> {
        let total = system_dim * aux_state.dim() * bath.dim();
        if unitary.nrows() != total || unitary.ncols() != total {
            return Err(Error::Dimension(format!(
                "unitary is {}x{}, expected {total}x{total}",
                unitary.nrows(),
                unitary.ncols()
            )));
        }
        let defect = unitarity_defect(&unitary);
        if defect > UNITARITY_TOL {
            return Err(Error::Validation(format!("unitary defect {defect:e} exceeds {UNITARITY_TOL:e}")));
        }
        Ok(Self { unitary, aux_state, bath, system_dim })
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    pub fn aux_state(&self) -> &DensityMatrix {
        &self.aux_state
    }

    pub fn bath(&self) -> &HeatBath {
        &self.bath
    }

    /// `(d_S, d_A, d_B)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.system_dim, self.aux_state.dim(), self.bath.dim())
    }

    fn env_dim(&self) -> usize {
        self.aux_state.dim() * self.bath.dim()
    }

    /// `rho_A (x) rho_B`.
    pub fn environment_state(&self) -> DensityMatrix {
        tensor_states(&self.aux_state, self.bath.state()).expect("environment fits the dimension cap")
    }

    fn joint_output(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.system_dim {
            return Err(Error::Dimension(format!(
                "system state has dim {}, implementation expects {}",
                rho.dim(),
                self.system_dim
            )));
        }
        let joint = tensor(rho.matrix(), self.environment_state().matrix())?;
        let out = &self.unitary * joint * self.unitary.adjoint();
        DensityMatrix::new(crate::ensemble::hermitize(out))
    }

    /// The reduced system channel, with Kraus operators
    /// `sqrt(s_e) (I (x) <f|) U (I (x) |e>)` over the environment eigenbasis.
    pub fn channel(&self) -> Result<QuantumOperation> {
        let env = qmat::eig_hermitian(self.environment_state().matrix())?;
        let (ds, de) = (self.system_dim, self.env_dim());
        let mut kraus = Vec::new();
        for (e, &se) in env.eigenvalues.iter().enumerate() {
            if se <= qmat::SUPPORT_CUTOFF {
                continue;
            }
            let amp = c(se.sqrt(), 0.0);
            let ket = env.eigenvectors.column(e);
            for f in 0..de {
                let k = ComplexMatrix::from_fn(ds, ds, |s1, s2| {
                    (0..de).map(|e2| self.unitary[(s1 * de + f, s2 * de + e2)] * ket[e2]).sum::<C64>() * amp
                });
                kraus.push(k);
            }
        }
        QuantumOperation::new(kraus, Some("implementation".into()))
    }

    /// `A_ki = (<out_k| (x) I) U (|in_i> (x) I)` for columns of the two bases.
    pub fn blocks(&self, basis_in: &ComplexMatrix, basis_out: &ComplexMatrix) -> Vec<Vec<ComplexMatrix>> {
        let (ds, de) = (self.system_dim, self.env_dim());
        (0..ds)
            .map(|k| {
                (0..ds)
                    .map(|i| {
                        let mut blk = ComplexMatrix::zeros(de, de);
                        for s1 in 0..ds {
                            let bra = basis_out[(s1, k)].conj();
                            if bra == C64::new(0.0, 0.0) {
                                continue;
                            }
                            for s2 in 0..ds {
                                let w = bra * basis_in[(s2, i)];
                                if w == C64::new(0.0, 0.0) {
                                    continue;
                                }
                                let sub = self.unitary.view((s1 * de, s2 * de), (de, de));
                                blk += sub * w;
                            }
                        }
                        blk
                    })
                    .collect()
            })
            .collect()
    }
}

/// Target `alpha|0> + beta|1>` for a CNOT whose control is the system qubit.
fn cnot_target(alpha: C64, beta: C64) -> Result<()> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!("CNOT target must be normalized (|alpha|^2 + |beta|^2 = {norm})")));
    }
    Ok(())
}

/// Controlled-X on (system, auxiliary) tensored with the bath identity.
fn cnot_unitary(bath_dim: usize) -> ComplexMatrix {
    let mut cx = ComplexMatrix::zeros(4, 4);
    for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cx[(r, col)] = c(1.0, 0.0);
    }
    tensor(&cx, &ComplexMatrix::identity(bath_dim, bath_dim)).expect("small")
}

/// CNOT implementation of the dephasing channel `Q_r`,
/// `r = alpha* beta + alpha beta*`. The auxiliary enters in the
/// X-dephased form `(I + r X) / 2` of the target, which yields the same
/// channel and resets exactly for every input.
pub fn cnot_dephasing_impl(alpha: C64, beta: C64, bath_dim: usize) -> Result<Implementation> {
    cnot_target(alpha, beta)?;
    let r = crate::ensemble::cnot_dephasing_r(alpha, beta);
    let aux = DensityMatrix::new(ComplexMatrix::from_row_slice(
        2,
        2,
        &[c(0.5, 0.0), c(0.5 * r, 0.0), c(0.5 * r, 0.0), c(0.5, 0.0)],
    ))?;
    Implementation::new(cnot_unitary(bath_dim), aux, HeatBath::equally_spaced(bath_dim, 1.0)?, 2)
}

/// CNOT implementation with the pure target itself as auxiliary. Same
/// channel; the auxiliary only resets when `r = +-1` or the inputs are
/// diagonal.
pub fn cnot_dephasing_impl_pure(alpha: C64, beta: C64, bath_dim: usize) -> Result<Implementation> {
    cnot_target(alpha, beta)?;
    let aux = DensityMatrix::pure(&[alpha, beta])?;
    Implementation::new(cnot_unitary(bath_dim), aux, HeatBath::equally_spaced(bath_dim, 1.0)?, 2)
}

/// Random implementation that resets its auxiliary qubit on every input:
/// `U = sum_i |i><i| (x) X^{f(i)} (x) V_i  .  (U_S (x) I (x) U_B)` with an
/// X-diagonal auxiliary state.
pub fn random_reset_impl<R: Rng + ?Sized>(system_dim: usize, bath_dim: usize, rng: &mut R) -> Result<Implementation> {
    let bath = HeatBath::equally_spaced(bath_dim, 1.0)?;
    let r: f64 = rng.random_range(-0.95..0.95);
    let aux = DensityMatrix::new(ComplexMatrix::from_row_slice(
        2,
        2,
        &[c(0.5, 0.0), c(0.5 * r, 0.0), c(0.5 * r, 0.0), c(0.5, 0.0)],
    ))?;
    let local = tensor(
        &random::unitary(system_dim, rng),
        &tensor(&ComplexMatrix::identity(2, 2), &random::unitary(bath_dim, rng))?,
    )?;
    let x = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let env = 2 * bath_dim;
    let mut controlled = ComplexMatrix::zeros(system_dim * env, system_dim * env);
    for i in 0..system_dim {
        let flip = if rng.random::<bool>() { x.clone() } else { ComplexMatrix::identity(2, 2) };
        let block = tensor(&flip, &random::unitary(bath_dim, rng))?;
        controlled.view_mut((i * env, i * env), (env, env)).copy_from(&block);
    }
    Implementation::new(controlled * local, aux, bath, system_dim)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rho_prime: DensityMatrix,
    pub delta_e_kt: f64,
    pub reset_residual: f64,
    /// `|| Tr_SB[U rho^n (x) rho_AB U^dagger] - rho_A ||_1` per signal.
    pub per_signal_reset: Vec<f64>,
}

fn aux_marginal(imp: &Implementation, joint: &DensityMatrix) -> Result<ComplexMatrix> {
    let (ds, da, db) = imp.dims();
    qmat::partial_trace_matrix(joint.matrix(), &[ds, da, db], &[1])
}

/// Applies the implementation to the average input, measuring the bath
/// energy change directly from its Hamiltonian.
pub fn run(imp: &Implementation, e: &SignalEnsemble) -> Result<RunOutcome> {
    let (ds, da, db) = imp.dims();
    let rho = average_state(e);
    let rho_prime = imp.joint_output(&rho)?;
    let bath_out = qmat::partial_trace_matrix(rho_prime.matrix(), &[ds, da, db], &[2])?;
    let delta_e_kt = imp.bath.energy_of(&bath_out) - imp.bath.energy_of(imp.bath.state().matrix());
    let aux = imp.aux_state.matrix();
    let reset_residual = trace_norm(&(aux_marginal(imp, &rho_prime)? - aux))?;
    let per_signal_reset = e
        .states()
        .map(|s| {
            let out = imp.joint_output(s)?;
            trace_norm(&(aux_marginal(imp, &out)? - aux))
        })
        .collect::<Result<_>>()?;
    Ok(RunOutcome { rho_prime, delta_e_kt, reset_residual, per_signal_reset })
}

/// `rho'_S (x) rho_A (x) rho_B` for a joint output.
pub fn product_reference(imp: &Implementation, rho_prime: &DensityMatrix) -> Result<DensityMatrix> {
    let (ds, da, db) = imp.dims();
    let sys = partial_trace(rho_prime, &[ds, da, db], &[0])?;
    tensor_states(&sys, &imp.environment_state())
}

/// Terms of the cost identity for one run, in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct CostIdentity {
    pub delta_e_bits: f64,
    pub entropy_drop_bits: f64,
    pub relative_entropy_bits: f64,
    pub trace_distance: f64,
}

impl CostIdentity {
    pub fn residual(&self) -> f64 {
        (self.delta_e_bits - self.entropy_drop_bits - self.relative_entropy_bits).abs()
    }
}

pub fn cost_identity(imp: &Implementation, e: &SignalEnsemble) -> Result<CostIdentity> {
    let out = run(imp, e)?;
    if out.reset_residual > RESET_TOL {
        return Err(Error::Contract(format!(
            "auxiliary does not reset (residual {:e} > {RESET_TOL:e})",
            out.reset_residual
        )));
    }
    let (ds, da, db) = imp.dims();
    let rho = average_state(e);
    let rho_s_out = partial_trace(&out.rho_prime, &[ds, da, db], &[0])?;
    let reference = product_reference(imp, &out.rho_prime)?;
    Ok(CostIdentity {
        delta_e_bits: out.delta_e_kt / LN_2,
        entropy_drop_bits: entropy(&rho) - entropy(&rho_s_out),
        relative_entropy_bits: relative_entropy(&out.rho_prime, &reference)?,
        trace_distance: trace_norm(&(out.rho_prime.matrix() - reference.matrix()))?,
    })
}

/// `|dE / ln 2 - (S(rho_S) - S(rho'_S)) - S(rho' || rho*)|`.
pub fn verify_lemma1(imp: &Implementation, e: &SignalEnsemble) -> Result<f64> {
    cost_identity(imp, e).map(|c| c.residual())
}

/// `q(kl|ij)` stored with index `((k * d + l) * d + i) * d + j`.
#[derive(Debug, Clone)]
pub struct ImplementationCoefficients {
    dim: usize,
    q: Vec<C64>,
}

impl ImplementationCoefficients {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, l: usize, i: usize, j: usize) -> C64 {
        let d = self.dim;
        self.q[((k * d + l) * d + i) * d + j]
    }

    /// `sum_ij mu_ij q(kl|ij)`.
    pub fn map_coefficients(&self, mu: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim;
        ComplexMatrix::from_fn(d, d, |k, l| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    acc += mu[(i, j)] * self.get(k, l, i, j);
                }
            }
            acc
        })
    }
}

/// Extracts `q(kl|ij) = Tr[A_ki rho_AB A_lj^dagger]` in the aligned bases and
/// checks positivity, trace preservation and reproduction of every output.
pub fn extract_q(imp: &Implementation, a: &AlignedCoefficients) -> Result<ImplementationCoefficients> {
    let d = imp.system_dim;
    if a.dim_in() != d || a.dim_out() != d {
        return Err(Error::Dimension("aligned coefficients do not match the system".into()));
    }
    let blocks = imp.blocks(&a.basis_in, &a.basis_out);
    let sigma = imp.environment_state().into_matrix();
    let mut q = vec![C64::new(0.0, 0.0); d * d * d * d];
    for k in 0..d {
        for l in 0..d {
            for i in 0..d {
                let left = &blocks[k][i] * &sigma;
                for j in 0..d {
                    q[((k * d + l) * d + i) * d + j] = (&left * blocks[l][j].adjoint()).trace();
                }
            }
        }
    }
    let coeffs = ImplementationCoefficients { dim: d, q };

    let mut positivity: f64 = 0.0;
    let mut trace: f64 = 0.0;
    for i in 0..d {
        for k in 0..d {
            let v = coeffs.get(k, k, i, i);
            positivity = positivity.max(v.im.abs()).max(-v.re);
        }
        for j in 0..d {
            let s: C64 = (0..d).map(|k| coeffs.get(k, k, i, j)).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            trace = trace.max((s - c(target, 0.0)).norm());
        }
    }
    if positivity > 1e-9 {
        return Err(Error::Extraction { what: "q(kk|ii) not real non-negative".into(), residual: positivity });
    }
    if trace > EXTRACTION_TOL {
        return Err(Error::Extraction { what: "sum_k q(kk|ij) != delta_ij".into(), residual: trace });
    }
    let mut reproduction: f64 = 0.0;
    for (mu, mup) in a.mu_in.iter().zip(&a.mu_out) {
        let predicted = coeffs.map_coefficients(mu);
        reproduction = reproduction.max((predicted - mup).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    if reproduction > EXTRACTION_TOL {
        return Err(Error::Extraction { what: "coefficients do not reproduce the outputs".into(), residual: reproduction });
    }
    Ok(coeffs)
}

fn trace_distance_to_reference(imp: &Implementation, e_avg: &DensityMatrix) -> Result<f64> {
    let rho_prime = imp.joint_output(e_avg)?;
    let reference = product_reference(imp, &rho_prime)?;
    trace_norm(&(rho_prime.matrix() - reference.matrix()))
}

fn average_from(a: &AlignedCoefficients) -> Result<DensityMatrix> {
    let lam = diag(&a.lambda_in);
    DensityMatrix::new(crate::ensemble::hermitize(&a.basis_in * lam * a.basis_in.adjoint()))
}

/// `min_{ijkl} ||rho' - rho*||_1 - |lambda_j lambda'_k - lambda_i lambda'_l| /
/// (lambda'_k + lambda'_l) |q(kl|ij)|`.
pub fn verify_lemma3(imp: &Implementation, a: &AlignedCoefficients) -> Result<f64> {
    let q = extract_q(imp, a)?;
    let distance = trace_distance_to_reference(imp, &average_from(a)?)?;
    let (lam, lamp) = (&a.lambda_in, &a.lambda_out);
    let d = q.dim();
    let mut worst = f64::INFINITY;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let weight = lamp[k] + lamp[l];
                    let rhs = if weight > 0.0 {
                        (lam[j] * lamp[k] - lam[i] * lamp[l]).abs() / weight * q.get(k, l, i, j).norm()
                    } else {
                        0.0
                    };
                    worst = worst.min(distance - rhs);
                }
            }
        }
    }
    Ok(worst)
}

/// Qubit variant: `min_{i != j, k} ||rho' - rho*||_1 - |lambda_i - lambda_j| |q(kk|ij)|`.
pub fn verify_lemma2(imp: &Implementation, a: &AlignedCoefficients) -> Result<f64> {
    if imp.system_dim != 2 {
        return Err(Error::Contract("the diagonal variant is stated for qubits".into()));
    }
    let q = extract_q(imp, a)?;
    let distance = trace_distance_to_reference(imp, &average_from(a)?)?;
    let lam = &a.lambda_in;
    let mut worst = f64::INFINITY;
    for (i, j) in [(0, 1), (1, 0)] {
        for k in 0..2 {
            worst = worst.min(distance - (lam[i] - lam[j]).abs() * q.get(k, k, i, j).norm());
        }
    }
    Ok(worst)
}

/// Energy change and scaled relative entropy when a perturbation `delta` is
/// spread evenly over `n` independent copies of the bath.
pub fn ncopy_demo(bath: &HeatBath, delta: &ComplexMatrix, n_copies: usize) -> Result<(f64, f64)> {
    if n_copies == 0 {
        return Err(Error::Validation("need at least one copy".into()));
    }
    if delta.nrows() != bath.dim() || delta.ncols() != bath.dim() {
        return Err(Error::Dimension("perturbation does not match the bath".into()));
    }
    let n = n_copies as f64;
    let eps = 1.0 / n;
    let perturbed = DensityMatrix::new(bath.state().matrix() + delta * c(eps, 0.0))
        .map_err(|err| Error::Validation(format!("perturbed bath state is invalid: {err}")))?;
    let delta_e = n * eps * bath.energy_of(delta);
    let rel = n * relative_entropy(&perturbed, bath.state())?;
    Ok((delta_e, rel))
}
