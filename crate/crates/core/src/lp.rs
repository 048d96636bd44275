//! Dense phase-I simplex for equality-constrained feasibility problems
//! `A x = b, x >= 0`. Bland's rule is used for both the entering and the
//! leaving variable, so the method cannot cycle.

/// Pivot elements smaller than this are treated as zero.
const PIVOT_TOL: f64 = 1e-12;
/// Reduced costs above `-COST_TOL` count as non-negative.
const COST_TOL: f64 = 1e-12;
/// Pivots smaller than this trigger a conditioning warning.
const CONDITIONING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOne {
    Feasible { x: Vec<f64>, ill_conditioned: bool },
    /// Optimal sum of artificial variables, which exceeded the tolerance.
    Infeasible { residual: f64 },
}

/// Solves the phase-I problem `min sum(artificials)` on a dense tableau.
///
/// `a` is row-major with `rows.len() == b.len()`. Returns a basic feasible
/// point when the optimal artificial sum is at most `feas_tol`.
pub fn phase_one(a: &[Vec<f64>], b: &[f64], feas_tol: f64) -> PhaseOne {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let width = n + m + 1;
    let rhs = n + m;

    let mut t = vec![vec![0.0; width]; m];
    for (r, (row, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        for (j, &v) in row.iter().enumerate() {
            t[r][j] = sign * v;
        }
        t[r][n + r] = 1.0;
        t[r][rhs] = sign * bi;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Reduced costs for minimizing the artificial sum.
    let mut cost = vec![0.0; width];
    for row in &t {
        for j in 0..n {
            cost[j] -= row[j];
        }
        cost[rhs] -= row[rhs];
    }

    let mut ill_conditioned = false;
    let max_iters = 50 * (n + m).max(1);
    for _ in 0..max_iters {
        let Some(enter) = (0..n + m).find(|&j| cost[j] < -COST_TOL) else { break };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let coef = t[r][enter];
            if coef > PIVOT_TOL {
                let ratio = t[r][rhs] / coef;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-15 || (ratio <= lratio + 1e-15 && basis[r] < basis[lr]) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        // Phase I is bounded below by zero, so an entering column always has a
        // positive entry unless round-off hid it; stop in that case.
        let Some((pr, _)) = leave else { break };
        let pivot = t[pr][enter];
        if pivot.abs() < CONDITIONING_TOL {
            ill_conditioned = true;
        }
        for v in t[pr].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = t[pr].clone();
        for (r, row) in t.iter_mut().enumerate() {
            if r == pr {
                continue;
            }
            let f = row[enter];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        let f = cost[enter];
        for (v, p) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * p;
        }
        basis[pr] = enter;
    }

    let residual = -cost[rhs];
    if residual > feas_tol {
        return PhaseOne::Infeasible { residual };
    }
    let mut x = vec![0.0; n];
    for (r, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[r][rhs].max(0.0);
        }
    }
    PhaseOne::Feasible { x, ill_conditioned }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(row, bi)| (row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn simple_feasible_system() {
        let a = vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]];
        let b = vec![1.0, 0.5];
        match phase_one(&a, &b, 1e-9) {
            PhaseOne::Feasible { x, .. } => {
                assert!(residual(&a, &b, &x) < 1e-12);
                assert!(x.iter().all(|&v| v >= 0.0));
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn infeasible_sign_pattern() {
        // x0 + x1 = 1 and x0 + x1 = 2 cannot both hold
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![1.0, 2.0];
        assert!(matches!(phase_one(&a, &b, 1e-9), PhaseOne::Infeasible { residual } if (residual - 1.0).abs() < 1e-12));
    }

    #[test]
    fn negative_rhs_is_normalized() {
        let a = vec![vec![-1.0, 0.0], vec![0.0, 1.0]];
        let b = vec![-0.25, 0.75];
        match phase_one(&a, &b, 1e-9) {
            PhaseOne::Feasible { x, .. } => assert!(residual(&a, &b, &x) < 1e-12),
            other => panic!("expected feasible, got {other:?}"),
        }
        assert!(matches!(phase_one(&[vec![1.0]], &[-1.0], 1e-9), PhaseOne::Infeasible { .. }));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![1.0, 0.0]];
        let b = vec![1.0, 2.0, 0.3];
        match phase_one(&a, &b, 1e-9) {
            PhaseOne::Feasible { x, .. } => assert!(residual(&a, &b, &x) < 1e-12),
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_vertex_does_not_cycle() {
        // Classic degenerate structure: many zero right-hand sides.
        let a = vec![
            vec![1.0, -1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, -1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, -1.0, 0.0],
            vec![1.0, 1.0, 1.0, 1.0, 1.0],
        ];
        let b = vec![0.0, 0.0, 0.0, 1.0];
        match phase_one(&a, &b, 1e-9) {
            PhaseOne::Feasible { x, .. } => assert!(residual(&a, &b, &x) < 1e-12),
            other => panic!("expected feasible, got {other:?}"),
        }
    }
}
