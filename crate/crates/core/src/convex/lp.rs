//! Two-phase dense tableau simplex with Bland's anti-cycling rule.

use super::{SolveOutcome, SolveStatus};

/// `minimize cᵀx  s.t.  A x ≤ b,  x ≥ lower`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub lower: Vec<f64>,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { objective, a_ub: Vec::new(), b_ub: Vec::new(), lower: vec![0.0; n] }
    }

    /// Builds a minimization of `-c`; the reported objective stays in the
    /// minimization sense.
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::minimize(objective.into_iter().map(|c| -c).collect())
    }

    pub fn le(mut self, row: Vec<f64>, rhs: f64) -> Self {
        assert_eq!(row.len(), self.objective.len(), "constraint row has wrong length");
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

struct Tableau {
    /// `rows × (cols + 1)`; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
    MaxIters,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Minimizes `cost · x` over the current tableau with Bland's rule.
    /// Only columns with `allowed[j]` may enter.
    fn run(&mut self, cost: &[f64], allowed: &[bool]) -> Phase {
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Phase::MaxIters;
            }
            let scale = cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
            // reduced costs d_j = c_j - c_B B^-1 a_j
            let entering = (0..self.cols).filter(|&j| allowed[j]).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let d = cost[j] - self.basis.iter().enumerate().map(|(r, &b)| cost[b] * self.t[r][j]).sum::<f64>();
                d < -PIVOT_EPS * scale
            });
            let Some(c) = entering else {
                return Phase::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * lratio.abs().max(1.0);
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Phase::Unbounded,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

/// Solves `lp` to a basic optimal solution. Deterministic for identical input.
pub fn solve_lp(lp: &LinearProgram) -> SolveOutcome {
    solve_lp_with_duals(lp).0
}

/// Like [`solve_lp`], also returning the row multipliers `∂objective/∂b_i`
/// (non-positive at an optimum). Empty unless the status is optimal.
pub fn solve_lp_with_duals(lp: &LinearProgram) -> (SolveOutcome, Vec<f64>) {
    let n = lp.num_vars();
    let m = lp.a_ub.len();
    assert_eq!(lp.b_ub.len(), m);
    assert_eq!(lp.lower.len(), n);

    // substitute x = lower + y with y ≥ 0
    let rhs: Vec<f64> = lp
        .a_ub
        .iter()
        .zip(&lp.b_ub)
        .map(|(row, b)| b - row.iter().zip(&lp.lower).map(|(a, l)| a * l).sum::<f64>())
        .collect();

    // columns: y (n), slacks (m), artificials (one per negative-rhs row)
    let neg_rows: Vec<usize> = (0..m).filter(|&i| rhs[i] < 0.0).collect();
    let n_art = neg_rows.len();
    let cols = n + m + n_art;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut art = 0;
    for i in 0..m {
        let sign = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * lp.a_ub[i][j];
        }
        t[i][n + i] = sign;
        t[i][cols] = sign * rhs[i];
        if sign < 0.0 {
            t[i][n + m + art] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau { t, basis, cols, pivots: 0 };

    if n_art > 0 {
        let mut cost1 = vec![0.0; cols];
        for c in cost1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        let allowed = vec![true; cols];
        if let Phase::MaxIters = tab.run(&cost1, &allowed) {
            return (outcome(vec![f64::NAN; n], f64::NAN, SolveStatus::MaxIters, tab.pivots), Vec::new());
        }
        let infeas: f64 = (0..m).filter(|&r| tab.basis[r] >= n + m).map(|r| tab.rhs(r)).sum();
        let scale = rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        if infeas > 1e-9 * scale {
            return (outcome(vec![f64::NAN; n], infeas, SolveStatus::Infeasible, tab.pivots), Vec::new());
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..m {
            if tab.basis[r] >= n + m {
                if let Some(c) = (0..n + m).find(|&j| tab.t[r][j].abs() > PIVOT_EPS) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    let mut allowed = vec![true; cols];
    for a in allowed.iter_mut().skip(n + m) {
        *a = false;
    }
    let status = match tab.run(&cost, &allowed) {
        Phase::Optimal => SolveStatus::Optimal,
        Phase::Unbounded => SolveStatus::Unbounded,
        Phase::MaxIters => SolveStatus::MaxIters,
    };
    let mut y = vec![0.0; cols];
    for (r, &b) in tab.basis.iter().enumerate() {
        y[b] = tab.rhs(r);
    }
    let x: Vec<f64> = (0..n).map(|j| lp.lower[j] + y[j].max(0.0)).collect();
    let obj = if status == SolveStatus::Unbounded {
        f64::NEG_INFINITY
    } else {
        lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>()
    };
    let duals = if status == SolveStatus::Optimal {
        (0..m).map(|i| tab.basis.iter().enumerate().map(|(r, &b)| cost[b] * tab.t[r][n + i]).sum()).collect()
    } else {
        Vec::new()
    };
    (outcome(x, obj, status, tab.pivots), duals)
}

fn outcome(x: Vec<f64>, objective: f64, status: SolveStatus, iterations: usize) -> SolveOutcome {
    SolveOutcome { x, objective, status, iterations, gap: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_bound() {
        let t = 20.0;
        let lp = LinearProgram::maximize(vec![1.0]).le(vec![1.0], t);
        let out = solve_lp(&lp);
        assert!(out.is_optimal());
        assert_eq!(out.x, vec![t]);
    }

    #[test]
    fn time_sharing_single_candidate() {
        let t = 20.0;
        let p_ave = 0.7;
        for p in [0.5 * p_ave, p_ave, 2.0 * p_ave] {
            // maximize τ s.t. τ P ≤ T P_ave, τ ≤ T
            let lp = LinearProgram::maximize(vec![1.0]).le(vec![p], t * p_ave).le(vec![1.0], t);
            let out = solve_lp(&lp);
            let expected = (t * p_ave / p).min(t);
            assert_relative_eq!(out.x[0], expected, max_relative = 1e-12);
            let outage = (t - out.x[0]) / t;
            if p > p_ave {
                assert_relative_eq!(outage, 0.5, max_relative = 1e-12);
            } else {
                assert_eq!(outage, 0.0);
            }
        }
    }

    #[test]
    fn duals_are_shadow_prices() {
        // max x + 2y s.t. x + y ≤ 4, y ≤ 3  →  (1, 3), prices (1, 1)
        let lp = LinearProgram::maximize(vec![1.0, 2.0]).le(vec![1.0, 1.0], 4.0).le(vec![0.0, 1.0], 3.0);
        let (out, duals) = solve_lp_with_duals(&lp);
        assert_relative_eq!(out.objective, -7.0, max_relative = 1e-12);
        assert_relative_eq!(duals[0], -1.0, max_relative = 1e-12);
        assert_relative_eq!(duals[1], -1.0, max_relative = 1e-12);
        // a negative rhs goes through phase one
        let lp = LinearProgram::minimize(vec![1.0]).le(vec![-1.0], -2.0);
        let (out, duals) = solve_lp_with_duals(&lp);
        assert_relative_eq!(out.x[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(duals[0], -1.0, max_relative = 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram::minimize(vec![1.0]).le(vec![1.0], -1.0);
        assert_eq!(solve_lp(&lp).status, SolveStatus::Infeasible);
        let lp = LinearProgram::minimize(vec![-1.0, 0.0]).le(vec![0.0, 1.0], 1.0);
        assert_eq!(solve_lp(&lp).status, SolveStatus::Unbounded);
    }

    #[test]
    fn needs_phase_one() {
        // minimize x + y s.t. x + y ≥ 2, x ≤ 3, y ≤ 3
        let lp = LinearProgram::minimize(vec![1.0, 2.0])
            .le(vec![-1.0, -1.0], -2.0)
            .le(vec![1.0, 0.0], 3.0)
            .le(vec![0.0, 1.0], 3.0);
        let out = solve_lp(&lp);
        assert!(out.is_optimal());
        assert_relative_eq!(out.x[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(out.x[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.objective, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn lower_bounds_are_honored() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]).le(vec![1.0, 1.0], 10.0);
        lp.lower = vec![2.0, -1.0];
        let out = solve_lp(&lp);
        assert_eq!(out.x, vec![2.0, -1.0]);
        assert_relative_eq!(out.objective, 1.0);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0])
            .le(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .le(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let out = solve_lp(&lp);
        assert!(out.is_optimal());
        assert_relative_eq!(out.objective, -0.05, epsilon = 1e-12);
    }

    proptest::proptest! {
        // diagonal LPs: maximize Σ c_i x_i s.t. a_i x_i ≤ b_i has x_i = b_i / a_i
        #[test]
        fn diagonal_instances(
            data in proptest::collection::vec((0.1f64..10.0, 0.1f64..10.0, 0.1f64..10.0), 1..8)
        ) {
            let n = data.len();
            let mut lp = LinearProgram::maximize(data.iter().map(|d| d.0).collect());
            for (i, d) in data.iter().enumerate() {
                let mut row = vec![0.0; n];
                row[i] = d.1;
                lp = lp.le(row, d.2);
            }
            let out = solve_lp(&lp);
            proptest::prop_assert!(out.is_optimal());
            let opt: f64 = data.iter().map(|d| d.0 * d.2 / d.1).sum();
            proptest::prop_assert!(((-out.objective) - opt).abs() <= 1e-9 * opt);
            let again = solve_lp(&lp);
            proptest::prop_assert_eq!(out, again);
        }
    }
}
