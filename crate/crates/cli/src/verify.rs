//! Seeded self-verification of the simulator identities and inequalities.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qtherm_core::bounds::{analyze, landauer_from_spectra, ScanConfig};
use qtherm_core::ensemble::{align, QuantumOperation, SignalEnsemble};
use qtherm_core::qmat::{c, entropy, tensor, trace_norm, ComplexMatrix, C64};
use qtherm_core::random;
use qtherm_core::reversibility::find_stochastic_map;
use qtherm_core::simulator::{
    cnot_dephasing_impl, cost_identity, ncopy_demo, product_reference, random_reset_impl, run,
    special_case_protocol_ledger, standard_protocol_ledger, verify_lemma2, verify_lemma3, HeatBath, Implementation,
    RESET_TOL,
};

pub const DEFAULT_SEED: u64 = 1;

const RESET_TRIALS: usize = 50;
const CNOT_TRIALS: usize = 100;
const LEDGER_TRIALS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// Aggregated outcome of one check. `worst` is `None` when some trial
/// could not be evaluated at all.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub trials: usize,
    pub worst: Option<f64>,
    pub comparison: Comparison,
    pub bound: f64,
    pub pass: bool,
    pub failures: Vec<String>,
}

struct Tally {
    name: &'static str,
    comparison: Comparison,
    bound: f64,
    trials: usize,
    worst: Option<f64>,
    failures: Vec<String>,
}

const MAX_LISTED_FAILURES: usize = 5;

impl Tally {
    fn new(name: &'static str, comparison: Comparison, bound: f64) -> Self {
        Self { name, comparison, bound, trials: 0, worst: None, failures: Vec::new() }
    }

    fn record(&mut self, value: qtherm_core::Result<f64>) {
        self.trials += 1;
        match value {
            Ok(v) => {
                let ok = match self.comparison {
                    Comparison::AtMost => v <= self.bound,
                    Comparison::AtLeast => v >= self.bound,
                };
                if !ok {
                    self.fail(format!("trial {}: {v:e}", self.trials - 1));
                }
                self.worst = Some(match (self.worst, self.comparison) {
                    (None, _) => v,
                    (Some(w), Comparison::AtMost) => w.max(v),
                    (Some(w), Comparison::AtLeast) => w.min(v),
                });
            }
            Err(e) => self.fail(format!("trial {}: {e}", self.trials - 1)),
        }
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < MAX_LISTED_FAILURES {
            self.failures.push(msg);
        } else if self.failures.len() == MAX_LISTED_FAILURES {
            self.failures.push("...".into());
        }
    }

    fn finish(self) -> Check {
        let pass = self.failures.is_empty() && self.trials > 0;
        Check {
            name: self.name,
            trials: self.trials,
            worst: self.worst,
            comparison: self.comparison,
            bound: self.bound,
            pass,
            failures: self.failures,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub seed: u64,
    pub corrupted: bool,
    pub all_pass: bool,
    pub checks: Vec<Check>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn random_ensemble(r: &mut ChaCha8Rng, dim: usize) -> qtherm_core::Result<SignalEnsemble> {
    let n = r.random_range(1..=3);
    let probs = random::probabilities(n, r);
    let states: Vec<_> = (0..n)
        .map(|_| {
            let rank = r.random_range(1..=dim);
            random::mixed_state(dim, rank, r)
        })
        .collect();
    SignalEnsemble::new(probs.into_iter().zip(states).collect())
}

/// Composes a random system-auxiliary unitary after `U`, which breaks the
/// reset of the auxiliary.
fn corrupt(imp: &Implementation, r: &mut ChaCha8Rng) -> qtherm_core::Result<Implementation> {
    let (ds, da, db) = imp.dims();
    let v = tensor(&random::unitary(ds * da, r), &ComplexMatrix::identity(db, db))?;
    Implementation::new(v * imp.unitary(), imp.aux_state().clone(), imp.bath().clone(), ds)
}

fn reset_checks(seed: u64, corrupted: bool) -> Vec<Check> {
    let mut r = stream(seed, 1);
    let mut reset = Tally::new("auxiliary_reset", Comparison::AtMost, RESET_TOL);
    let mut identity = Tally::new("energy_identity", Comparison::AtMost, 1e-7);
    let mut cost = Tally::new("excess_exceeds_squared_distance", Comparison::AtLeast, -1e-7);
    for _ in 0..RESET_TRIALS {
        let ds = r.random_range(2..=3);
        let db = r.random_range(2..=3);
        let built = random_reset_impl(ds, db, &mut r).and_then(|imp| if corrupted { corrupt(&imp, &mut r) } else { Ok(imp) });
        let e = random_ensemble(&mut r, ds);
        let (imp, e) = match (built, e) {
            (Ok(imp), Ok(e)) => (imp, e),
            (Err(err), _) | (_, Err(err)) => {
                for t in [&mut reset, &mut identity, &mut cost] {
                    t.record(Err(err.clone()));
                }
                continue;
            }
        };
        reset.record(run(&imp, &e).map(|o| o.reset_residual));
        let id = cost_identity(&imp, &e);
        identity.record(id.clone().map(|id| id.residual()));
        cost.record(id.map(|id| (id.delta_e_bits - id.entropy_drop_bits) * LN_2 - 0.5 * id.trace_distance.powi(2)));
    }
    vec![reset.finish(), identity.finish(), cost.finish()]
}

fn cnot_checks(seed: u64) -> Vec<Check> {
    let mut r = stream(seed, 2);
    let mut offdiagonal = Tally::new("offdiagonal_coefficient_inequality", Comparison::AtLeast, -1e-8);
    let mut diagonal = Tally::new("diagonal_coefficient_inequality", Comparison::AtLeast, -1e-8);
    let mut bound = Tally::new("bound_below_implementation", Comparison::AtLeast, -1e-6);
    let cfg = ScanConfig { radius_step: 1e-3, ..ScanConfig::default() };
    for _ in 0..CNOT_TRIALS {
        let t: f64 = r.random_range(0.0..PI);
        let phase: f64 = r.random_range(0.0..2.0 * PI);
        let (alpha, beta) = (c(t.cos(), 0.0), C64::from_polar(t.sin(), phase));
        let db = r.random_range(2..=3);
        let prepared = cnot_dephasing_impl(alpha, beta, db).and_then(|imp| {
            let e = random_ensemble(&mut r, 2)?;
            let a = align(&e, &imp.channel()?)?;
            Ok((imp, e, a))
        });
        let (imp, e, a) = match prepared {
            Ok(x) => x,
            Err(err) => {
                for t in [&mut offdiagonal, &mut diagonal, &mut bound] {
                    t.record(Err(err.clone()));
                }
                continue;
            }
        };
        offdiagonal.record(verify_lemma3(&imp, &a));
        diagonal.record(verify_lemma2(&imp, &a));
        // Scan failures leave no bound to compare against.
        if let Ok(rep) = imp.channel().and_then(|q| analyze(&e, &q, &cfg)) {
            bound.record(run(&imp, &e).and_then(|out| {
                let reference = product_reference(&imp, &out.rho_prime)?;
                let tn = trace_norm(&(out.rho_prime.matrix() - reference.matrix()))?;
                Ok(0.5 * tn * tn - rep.epsilon_lower_kt)
            }));
        }
    }
    vec![offdiagonal.finish(), diagonal.finish(), bound.finish()]
}

fn ledger_checks(seed: u64) -> Vec<Check> {
    let mut r = stream(seed, 3);
    let mut standard = Tally::new("standard_protocol_ledger", Comparison::AtMost, 1e-9);
    let mut special = Tally::new("special_case_protocol_ledger", Comparison::AtMost, 1e-9);
    for _ in 0..LEDGER_TRIALS {
        let dim = r.random_range(2..=4);
        let rho = random::mixed_state(dim, dim, &mut r);
        let target = random::mixed_state(dim, dim, &mut r);
        standard.record(
            standard_protocol_ledger(&rho, &target)
                .map(|l| (l.total_kt - LN_2 * (entropy(&rho) - entropy(&target))).abs()),
        );
        special.record(random_ensemble(&mut r, dim).and_then(|e| {
            let a = align(&e, &QuantumOperation::reset_to(&target, dim))?;
            let map = find_stochastic_map(&a)
                .map()
                .cloned()
                .ok_or_else(|| qtherm_core::Error::Contract("reset admits no stochastic map".into()))?;
            let l = special_case_protocol_ledger(&a, &map, &e.probabilities())?;
            Ok((l.total_kt - landauer_from_spectra(&a.lambda_in, &a.lambda_out)).abs())
        }));
    }
    vec![standard.finish(), special.finish()]
}

fn ncopy_checks(seed: u64) -> Vec<Check> {
    let mut r = stream(seed, 4);
    let mut energy = Tally::new("ncopy_energy_constant", Comparison::AtMost, 1e-12);
    let mut ratio = Tally::new("ncopy_relative_entropy_ratio", Comparison::AtLeast, 50.0);
    let bath = HeatBath::equally_spaced(3, 1.0).expect("valid bath");
    let h = random::hermitian(3, &mut r);
    let shift = h.trace() / c(3.0, 0.0);
    let traceless = h - ComplexMatrix::identity(3, 3) * shift;
    let scale = 0.02 / traceless.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let delta = traceless * c(scale, 0.0);
    let outcome = ncopy_demo(&bath, &delta, 1).and_then(|(e1, r1)| {
        let (e100, r100) = ncopy_demo(&bath, &delta, 100)?;
        let spread = [10, 50]
            .iter()
            .map(|&n| ncopy_demo(&bath, &delta, n).map(|(e, _)| (e - e1).abs()))
            .try_fold((e100 - e1).abs(), |acc, x| x.map(|x| acc.max(x)))?;
        Ok((spread, r1 / r100))
    });
    match outcome {
        Ok((spread, fall)) => {
            energy.record(Ok(spread));
            ratio.record(Ok(fall));
        }
        Err(e) => {
            energy.record(Err(e.clone()));
            ratio.record(Err(e));
        }
    }
    vec![energy.finish(), ratio.finish()]
}

/// Runs every check. `corrupted` perturbs the reset-satisfying
/// implementations so the energy identity must fail.
pub fn run_verify(seed: u64, corrupted: bool) -> VerifySummary {
    let mut checks = reset_checks(seed, corrupted);
    checks.extend(cnot_checks(seed));
    checks.extend(ledger_checks(seed));
    checks.extend(ncopy_checks(seed));
    let all_pass = checks.iter().all(|c| c.pass);
    VerifySummary { seed, corrupted, all_pass, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_seed_passes() {
        let s = run_verify(DEFAULT_SEED, false);
        for c in &s.checks {
            assert!(c.pass, "{} failed: {:?}", c.name, c.failures);
        }
        assert!(s.all_pass);
    }

    #[test]
    fn corruption_breaks_energy_identity() {
        let s = run_verify(DEFAULT_SEED, true);
        assert!(!s.all_pass);
        let identity = s.checks.iter().find(|c| c.name == "energy_identity").unwrap();
        assert!(!identity.pass);
    }

    #[test]
    fn tally_directions() {
        let mut t = Tally::new("x", Comparison::AtLeast, 0.0);
        t.record(Ok(2.0));
        t.record(Ok(1.0));
        let c = t.finish();
        assert_eq!(c.worst, Some(1.0));
        assert!(c.pass);
        let mut t = Tally::new("y", Comparison::AtMost, 0.5);
        t.record(Ok(0.1));
        t.record(Ok(0.7));
        assert!(!t.finish().pass);
    }
}
