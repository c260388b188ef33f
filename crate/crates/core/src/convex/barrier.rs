//! Log-barrier interior-point method with damped Newton centering.
//!
//! Minimizes `f(x)` subject to `g_i(x) ≤ 0` from a strictly feasible start by
//! following the central path of `t f(x) − Σ log(−g_i(x))`, multiplying `t`
//! by [`BarrierOptions::mu`] after each centering.

use super::linalg::StructuredMatrix;
use super::{SolveOutcome, SolveStatus};

/// Sparsity layout of the Newton system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HessianLayout {
    Dense,
    /// The first `dim − border` variables couple only within `bandwidth`
    /// (through the objective and through constraints whose gradients fit the
    /// band); the trailing `border` variables may couple with anything.
    /// Constraints with wider gradients are handled as low-rank updates and
    /// must have Hessians inside the band.
    Banded { bandwidth: usize, border: usize },
}

/// A smooth convex program `min f(x) s.t. g_i(x) ≤ 0`.
///
/// Hessian entries are reported as lower-triangle triplets `(i, j, v)` with
/// `i ≥ j`; an off-diagonal triplet stands for both symmetric positions.
pub trait SmoothConvexProgram {
    fn dim(&self) -> usize;

    fn layout(&self) -> HessianLayout {
        HessianLayout::Dense
    }

    fn objective(&self, x: &[f64]) -> f64;

    /// Writes `∇f(x)` into `grad` (pre-zeroed) and pushes Hessian triplets.
    fn objective_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut Vec<(usize, usize, f64)>);

    /// Appends `g_i(x)` for every constraint, in a fixed order.
    fn constraint_values(&self, x: &[f64], out: &mut Vec<f64>);

    /// Reports value, sparse gradient and Hessian of every constraint.
    fn constraint_derivatives(&self, x: &[f64], sink: &mut ConstraintSink);
}

/// Accumulates barrier gradient and Hessian contributions.
pub struct ConstraintSink {
    grad: Vec<f64>,
    hess: StructuredMatrix,
    count: usize,
    infeasible: bool,
}

impl ConstraintSink {
    fn new(n: usize, layout: HessianLayout) -> Self {
        let hess = match layout {
            HessianLayout::Dense => StructuredMatrix::zeros(n, n.saturating_sub(1), 0),
            HessianLayout::Banded { bandwidth, border } => {
                assert!(border <= n, "border larger than dimension");
                StructuredMatrix::zeros(n - border, bandwidth, border)
            }
        };
        ConstraintSink { grad: vec![0.0; n], hess, count: 0, infeasible: false }
    }

    /// Adds the barrier terms of one constraint `g(x) ≤ 0`.
    pub fn push(&mut self, value: f64, grad: &[(usize, f64)], hess: &[(usize, usize, f64)]) {
        self.count += 1;
        if !(value < 0.0) {
            self.infeasible = true;
            return;
        }
        let inv = -1.0 / value;
        for &(i, g) in grad {
            self.grad[i] += inv * g;
        }
        self.hess.add_outer(inv * inv, grad);
        for &(i, j, h) in hess {
            self.hess.add(i, j, inv * h);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierOptions {
    /// Barrier parameter growth per outer step.
    pub mu: f64,
    /// Initial barrier parameter; `None` picks `m`, i.e. an initial gap of 1.
    pub t0: Option<f64>,
    /// Stop when the duality-gap bound `m / t` falls below this value.
    pub gap_tol: f64,
    /// Newton decrement threshold `λ² / 2` for centering.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions { mu: 10.0, t0: None, gap_tol: 1e-8, newton_tol: 1e-10, max_newton: 200, armijo: 0.01 }
    }
}

impl BarrierOptions {
    pub fn with_gap_tol(mut self, tol: f64) -> Self {
        self.gap_tol = tol;
        self
    }

    pub fn with_max_newton(mut self, n: usize) -> Self {
        self.max_newton = n;
        self
    }
}

/// Runs the barrier method from the strictly feasible point `x0`.
///
/// A start that violates any constraint yields `SolveStatus::Infeasible`
/// with `x0` echoed back. Exhausting the Newton budget yields
/// `SolveStatus::MaxIters` with the last (strictly feasible) iterate.
pub fn solve_barrier<P: SmoothConvexProgram + ?Sized>(p: &P, x0: &[f64], opts: &BarrierOptions) -> SolveOutcome {
    let n = p.dim();
    assert_eq!(x0.len(), n, "start point has wrong dimension");
    let mut x = x0.to_vec();
    let mut gvals = Vec::new();
    p.constraint_values(&x, &mut gvals);
    let m = gvals.len();
    if gvals.iter().any(|&g| !(g < 0.0)) || x.iter().any(|v| !v.is_finite()) {
        return SolveOutcome {
            objective: p.objective(&x),
            x,
            status: SolveStatus::Infeasible,
            iterations: 0,
            gap: f64::INFINITY,
        };
    }

    let mut t = opts.t0.unwrap_or((m as f64).max(1.0));
    let mut iterations = 0usize;
    let mut hess_obj = Vec::new();
    let mut trial = vec![0.0; n];

    let phi = |x: &[f64], t: f64, buf: &mut Vec<f64>| -> f64 {
        buf.clear();
        p.constraint_values(x, buf);
        if buf.iter().any(|&g| !(g < 0.0)) {
            return f64::INFINITY;
        }
        t * p.objective(x) - buf.iter().map(|g| (-g).ln()).sum::<f64>()
    };

    loop {
        // centering
        loop {
            if iterations >= opts.max_newton {
                return finish(p, x, SolveStatus::MaxIters, iterations, m as f64 / t);
            }
            let mut sink = ConstraintSink::new(n, p.layout());
            p.constraint_derivatives(&x, &mut sink);
            debug_assert_eq!(sink.count, m, "constraint count changed between calls");
            if sink.infeasible {
                // cannot happen for iterates produced by the line search
                return finish(p, x, SolveStatus::MaxIters, iterations, f64::INFINITY);
            }
            let mut grad_f = vec![0.0; n];
            hess_obj.clear();
            p.objective_derivatives(&x, &mut grad_f, &mut hess_obj);
            let grad: Vec<f64> = grad_f.iter().zip(&sink.grad).map(|(gf, gb)| t * gf + gb).collect();
            for &(i, j, h) in &hess_obj {
                sink.hess.add(i, j, t * h);
            }
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some(dx) = sink.hess.solve(&neg) else {
                return finish(p, x, SolveStatus::MaxIters, iterations, m as f64 / t);
            };
            iterations += 1;
            let slope: f64 = grad.iter().zip(&dx).map(|(g, d)| g * d).sum();
            let lambda_sq = -slope;
            let f0 = phi(&x, t, &mut gvals);
            // below this the decrement is lost in the rounding of φ itself
            let noise = 64.0 * f64::EPSILON * f0.abs();
            if !(lambda_sq / 2.0 > opts.newton_tol.max(noise)) {
                break;
            }
            let mut s = 1.0;
            let mut accepted = false;
            while s > 1e-16 {
                for ((ti, xi), di) in trial.iter_mut().zip(&x).zip(&dx) {
                    *ti = xi + s * di;
                }
                let f1 = phi(&trial, t, &mut gvals);
                if f1 <= f0 + opts.armijo * s * slope {
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted {
                // no further progress possible at this t
                break;
            }
            std::mem::swap(&mut x, &mut trial);
        }
        let gap = if m == 0 { 0.0 } else { m as f64 / t };
        if gap < opts.gap_tol {
            return finish(p, x, SolveStatus::Optimal, iterations, gap);
        }
        t *= opts.mu;
    }
}

fn finish<P: SmoothConvexProgram + ?Sized>(p: &P, x: Vec<f64>, status: SolveStatus, iterations: usize, gap: f64) -> SolveOutcome {
    SolveOutcome { objective: p.objective(&x), x, status, iterations, gap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// min Σ μ_k x_k² s.t. Σ c_k x_k ≥ b.
    struct WeightedQuadratic {
        mu: Vec<f64>,
        c: Vec<f64>,
        b: f64,
    }

    impl SmoothConvexProgram for WeightedQuadratic {
        fn dim(&self) -> usize {
            self.mu.len()
        }
        fn objective(&self, x: &[f64]) -> f64 {
            self.mu.iter().zip(x).map(|(m, v)| m * v * v).sum()
        }
        fn objective_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut Vec<(usize, usize, f64)>) {
            for i in 0..x.len() {
                grad[i] = 2.0 * self.mu[i] * x[i];
                hess.push((i, i, 2.0 * self.mu[i]));
            }
        }
        fn constraint_values(&self, x: &[f64], out: &mut Vec<f64>) {
            out.push(self.b - self.c.iter().zip(x).map(|(c, v)| c * v).sum::<f64>());
        }
        fn constraint_derivatives(&self, x: &[f64], sink: &mut ConstraintSink) {
            let mut v = Vec::new();
            self.constraint_values(x, &mut v);
            let g: Vec<(usize, f64)> = self.c.iter().enumerate().map(|(i, c)| (i, -c)).collect();
            sink.push(v[0], &g, &[]);
        }
    }

    /// min x² s.t. 1 − x ≤ 0
    struct Square;

    impl SmoothConvexProgram for Square {
        fn dim(&self) -> usize {
            1
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0] * x[0]
        }
        fn objective_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut Vec<(usize, usize, f64)>) {
            grad[0] = 2.0 * x[0];
            hess.push((0, 0, 2.0));
        }
        fn constraint_values(&self, x: &[f64], out: &mut Vec<f64>) {
            out.push(1.0 - x[0]);
        }
        fn constraint_derivatives(&self, x: &[f64], sink: &mut ConstraintSink) {
            sink.push(1.0 - x[0], &[(0, -1.0)], &[]);
        }
    }

    #[test]
    fn square_with_lower_bound() {
        let out = solve_barrier(&Square, &[3.0], &BarrierOptions::default());
        assert!(out.is_optimal());
        assert_relative_eq!(out.x[0], 1.0, epsilon = 1e-7);
        assert!(1.0 - out.x[0] <= 1e-8);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let out = solve_barrier(&Square, &[0.5], &BarrierOptions::default());
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn max_iters_returns_feasible_iterate() {
        let out = solve_barrier(&Square, &[3.0], &BarrierOptions::default().with_max_newton(2));
        assert_eq!(out.status, SolveStatus::MaxIters);
        assert!(out.x[0] > 1.0);
    }

    #[test]
    fn weighted_quadratic_matches_stationarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let k = rng.gen_range(1..6);
            let mu: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..5.0)).collect();
            let c: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..5.0)).collect();
            let b = rng.gen_range(0.5..5.0);
            let prob = WeightedQuadratic { mu: mu.clone(), c: c.clone(), b };
            let start = vec![2.0 * b / c.iter().sum::<f64>(); k];
            let out = solve_barrier(&prob, &start, &BarrierOptions::default().with_gap_tol(1e-12));
            assert!(out.is_optimal());
            let denom: f64 = c.iter().zip(&mu).map(|(c, m)| c * c / m).sum();
            for i in 0..k {
                let expected = b * (c[i] / mu[i]) / denom;
                assert_relative_eq!(out.x[i], expected, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn golden_section_oracle_1d() {
        // min (x − 3)² + e^{x} s.t. x ≤ 2, x ≥ −1
        struct P;
        impl SmoothConvexProgram for P {
            fn dim(&self) -> usize {
                1
            }
            fn objective(&self, x: &[f64]) -> f64 {
                (x[0] - 3.0).powi(2) + x[0].exp()
            }
            fn objective_derivatives(&self, x: &[f64], g: &mut [f64], h: &mut Vec<(usize, usize, f64)>) {
                g[0] = 2.0 * (x[0] - 3.0) + x[0].exp();
                h.push((0, 0, 2.0 + x[0].exp()));
            }
            fn constraint_values(&self, x: &[f64], out: &mut Vec<f64>) {
                out.push(x[0] - 2.0);
                out.push(-1.0 - x[0]);
            }
            fn constraint_derivatives(&self, x: &[f64], sink: &mut ConstraintSink) {
                sink.push(x[0] - 2.0, &[(0, 1.0)], &[]);
                sink.push(-1.0 - x[0], &[(0, -1.0)], &[]);
            }
        }
        let out = solve_barrier(&P, &[0.0], &BarrierOptions::default());
        let (mut a, mut b) = (-1.0f64, 2.0f64);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let f = |x: f64| (x - 3.0).powi(2) + x.exp();
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let oracle = f(0.5 * (a + b));
        assert!(((out.objective - oracle) / oracle).abs() <= 1e-6);
    }

    #[test]
    fn grid_oracle_2d_quadratic_constraint() {
        // min (x−2)² + (y−1)² s.t. x² + y² ≤ 1
        struct P;
        impl SmoothConvexProgram for P {
            fn dim(&self) -> usize {
                2
            }
            fn objective(&self, x: &[f64]) -> f64 {
                (x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2)
            }
            fn objective_derivatives(&self, x: &[f64], g: &mut [f64], h: &mut Vec<(usize, usize, f64)>) {
                g[0] = 2.0 * (x[0] - 2.0);
                g[1] = 2.0 * (x[1] - 1.0);
                h.push((0, 0, 2.0));
                h.push((1, 1, 2.0));
            }
            fn constraint_values(&self, x: &[f64], out: &mut Vec<f64>) {
                out.push(x[0] * x[0] + x[1] * x[1] - 1.0);
            }
            fn constraint_derivatives(&self, x: &[f64], sink: &mut ConstraintSink) {
                sink.push(
                    x[0] * x[0] + x[1] * x[1] - 1.0,
                    &[(0, 2.0 * x[0]), (1, 2.0 * x[1])],
                    &[(0, 0, 2.0), (1, 1, 2.0)],
                );
            }
        }
        let out = solve_barrier(&P, &[0.0, 0.0], &BarrierOptions::default());
        // boundary is parametrized by angle; fine 1D grid on it
        let oracle = (0..2_000_000)
            .map(|i| {
                let th = i as f64 / 2_000_000.0 * std::f64::consts::TAU;
                (th.cos() - 2.0).powi(2) + (th.sin() - 1.0).powi(2)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(((out.objective - oracle) / oracle).abs() <= 1e-6, "{} vs {}", out.objective, oracle);
        assert!(out.x[0].powi(2) + out.x[1].powi(2) - 1.0 <= 1e-8);
    }

    #[test]
    fn deterministic() {
        let prob = WeightedQuadratic { mu: vec![1.0, 2.0, 3.0], c: vec![0.3, 0.2, 0.9], b: 1.0 };
        let a = solve_barrier(&prob, &[5.0, 5.0, 5.0], &BarrierOptions::default());
        let b = solve_barrier(&prob, &[5.0, 5.0, 5.0], &BarrierOptions::default());
        assert_eq!(a, b);
    }
}
