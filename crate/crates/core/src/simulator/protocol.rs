//! Quasi-static cost bookkeeping for the two reversible protocols.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::ensemble::AlignedCoefficients;
use crate::error::{Error, Result};
use crate::qmat::{eig_hermitian, shannon, DensityMatrix, SUPPORT_CUTOFF};
use crate::reversibility::{outputs_codiagonal, StochasticMap, MAP_RESIDUAL_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolLedger {
    pub steps: Vec<(String, f64)>,
    pub total_kt: f64,
}

impl ProtocolLedger {
    fn from_steps(steps: Vec<(&str, f64)>) -> Self {
        let total_kt = steps.iter().map(|(_, e)| e).sum();
        Self { steps: steps.into_iter().map(|(l, e)| (l.to_string(), e)).collect(), total_kt }
    }
}

fn full_support_spectrum(rho: &DensityMatrix, which: &str) -> Result<Vec<f64>> {
    let lam = eig_hermitian(rho.matrix())?.eigenvalues;
    if let Some(min) = lam.iter().copied().find(|&l| l <= SUPPORT_CUTOFF) {
        return Err(Error::Support(format!("{which} has eigenvalue {min:e}; level energies would diverge")));
    }
    Ok(lam)
}

fn ln_partition(energies: &[f64]) -> f64 {
    energies.iter().map(|e| (-e).exp()).sum::<f64>().ln()
}

/// Raise levels to `E_i = -ln lambda_i`, shift isothermally to
/// `E'_i = -ln lambda'_i`, lower them to zero and rotate. Each energy
/// assignment uses the gauge in which the partition function is one.
pub fn standard_protocol_ledger(rho: &DensityMatrix, rho_prime: &DensityMatrix) -> Result<ProtocolLedger> {
    standard_protocol_ledger_with_gauge(rho, rho_prime, 0.0, 0.0)
}

/// As [`standard_protocol_ledger`] with the additive offsets `c_in` and
/// `c_out` added to the initial and final level energies.
pub fn standard_protocol_ledger_with_gauge(
    rho: &DensityMatrix,
    rho_prime: &DensityMatrix,
    c_in: f64,
    c_out: f64,
) -> Result<ProtocolLedger> {
    if rho.dim() != rho_prime.dim() {
        return Err(Error::Dimension("protocol states differ in dimension".into()));
    }
    let lam = full_support_spectrum(rho, "initial state")?;
    let lamp = full_support_spectrum(rho_prime, "final state")?;
    let energies: Vec<f64> = lam.iter().map(|l| -l.ln() + c_in).collect();
    let energies_out: Vec<f64> = lamp.iter().map(|l| -l.ln() + c_out).collect();
    let raise: f64 = lam.iter().zip(&energies).map(|(l, e)| l * e).sum();
    let shift = ln_partition(&energies) - ln_partition(&energies_out);
    let lower: f64 = -lamp.iter().zip(&energies_out).map(|(l, e)| l * e).sum::<f64>();
    Ok(ProtocolLedger::from_steps(vec![
        ("raise levels", raise),
        ("attach heat bath", 0.0),
        ("isothermal level shift", shift),
        ("detach heat bath", 0.0),
        ("lower levels", lower),
        ("rotate eigenbasis", 0.0),
    ]))
}

/// Correlate an auxiliary with the input, convert each `|phi_i>` to the
/// mixture `sum_k P(k|i) |phi'_k>`, then reset the auxiliary against the
/// Bayesian posterior `P(k|i) lambda_i / lambda'_k`.
pub fn special_case_protocol_ledger(
    a: &AlignedCoefficients,
    map: &StochasticMap,
    probs: &[f64],
) -> Result<ProtocolLedger> {
    if probs.len() != a.signal_count() {
        return Err(Error::Dimension("one probability per signal is required".into()));
    }
    if map.n_in() != a.dim_in() || map.n_out() != a.dim_out() {
        return Err(Error::Dimension("stochastic map does not match the coefficients".into()));
    }
    let residual = map.residual(a);
    if !outputs_codiagonal(a) || residual > MAP_RESIDUAL_TOL || map.column_defect() > MAP_RESIDUAL_TOL {
        return Err(Error::Contract(format!(
            "map fails to implement the operation (residual {residual:e})"
        )));
    }
    let (din, dout) = (a.dim_in(), a.dim_out());
    let lam: Vec<f64> = (0..din).map(|i| probs.iter().zip(&a.mu_in).map(|(p, mu)| p * mu[(i, i)].re).sum()).collect();
    let convert: f64 = -LN_2
        * (0..din)
            .map(|i| {
                let column: Vec<f64> = (0..dout).map(|k| map.get(k, i)).collect();
                lam[i] * shannon(&column)
            })
            .sum::<f64>();
    let mut reset = 0.0;
    for k in 0..dout {
        let joint: Vec<f64> = (0..din).map(|i| map.get(k, i) * lam[i]).collect();
        let lk: f64 = joint.iter().sum();
        if lk <= 0.0 {
            continue;
        }
        let posterior: Vec<f64> = joint.iter().map(|x| x / lk).collect();
        reset += LN_2 * lk * shannon(&posterior);
    }
    Ok(ProtocolLedger::from_steps(vec![
        ("correlate auxiliary", 0.0),
        ("conditional convert", convert),
        ("conditional reset", reset),
    ]))
}
