//! Alternating successive convex approximation for a finite mission.
//!
//! The outage count is replaced by the capped SNR sum `(1/N) Σ min(γ, SNR[n])`.
//! Each round linearizes the non-concave pieces at the current plan and
//! solves two convex programs in turn: one over the trajectory with powers
//! fixed, one over the powers with the trajectory fixed. The auxiliary
//! amplitudes are eliminated in favor of their lower bounds, which is exact
//! because the objective only ever wants them larger.

use std::io::Write;

use serde::Serialize;

use crate::channel::{channel_gain, channel_gains, snr_from_gains};
use crate::convex::{solve_barrier, BarrierOptions, ConstraintSink, HessianLayout, SmoothConvexProgram};
use crate::error::Result;
use crate::io::fmt_sig;
use crate::relaxed::HoverPlan;
use crate::scenario::{Point, PowerSchedule, Scenario, Trajectory};

pub const MAX_ROUNDS: usize = 50;
pub const REL_IMPROVEMENT_TOL: f64 = 1e-4;

const BARRIER_GAP: f64 = 1e-9;
const BARRIER_MAX_NEWTON: usize = 400;
/// Interior-start blend toward the straight path and toward the budget.
const INTERIOR_BLEND: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Init,
    Trajectory,
    Power,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Init => "init",
            StepKind::Trajectory => "trajectory",
            StepKind::Power => "power",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iter: usize,
    /// Capped SNR average of the state after this step (of the kept state if
    /// the step was rejected).
    pub objective: f64,
    pub step_kind: StepKind,
    pub accepted: bool,
}

/// Current SCA iterate with its auxiliaries evaluated on the true channel.
#[derive(Clone, Debug)]
pub struct ScaState {
    pub trajectory: Trajectory,
    pub powers: PowerSchedule,
    /// Received amplitudes `a_k[n] = sqrt(P_k[n] g_k(q[n]))`, `[sensor][slot]`.
    pub amplitudes: Vec<Vec<f64>>,
    /// Capped received power `A[n] = min(γ σ², (Σ_k a_k[n])²)`, watts.
    pub received: Vec<f64>,
    pub iteration: usize,
    pub trace: Vec<TraceEntry>,
}

impl ScaState {
    pub fn new(s: &Scenario, trajectory: Trajectory, powers: PowerSchedule) -> Self {
        let mut st = ScaState {
            trajectory,
            powers,
            amplitudes: Vec::new(),
            received: Vec::new(),
            iteration: 0,
            trace: Vec::new(),
        };
        st.refresh(s);
        let objective = st.objective(s);
        st.trace.push(TraceEntry { iter: 0, objective, step_kind: StepKind::Init, accepted: true });
        st
    }

    fn refresh(&mut self, s: &Scenario) {
        let k = s.num_sensors();
        let n = s.slots;
        let cap = s.snr_threshold * s.noise_power;
        self.amplitudes = vec![vec![0.0; n]; k];
        self.received = vec![0.0; n];
        for slot in 0..n {
            let q = self.trajectory.slot_point(slot);
            let mut sum = 0.0;
            for j in 0..k {
                let a = (self.powers.powers[j][slot].max(0.0) * channel_gain(q, j, s)).sqrt();
                self.amplitudes[j][slot] = a;
                sum += a;
            }
            self.received[slot] = (sum * sum).min(cap);
        }
    }

    /// `(1/N) Σ A[n] / σ²`, the capped SNR average.
    pub fn objective(&self, s: &Scenario) -> f64 {
        self.received.iter().sum::<f64>() / (s.noise_power * s.slots as f64)
    }

    pub fn last_objective(&self) -> f64 {
        self.trace.last().map_or(0.0, |e| e.objective)
    }

    fn amplitude_sums(&self, s: &Scenario) -> Vec<f64> {
        (0..s.slots).map(|n| self.amplitudes.iter().map(|row| row[n]).sum()).collect()
    }

    /// Writes the objective trace as `iter,objective,step_kind,accepted`.
    pub fn write_trace_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "objective", "step_kind", "accepted"])?;
        for e in &self.trace {
            out.write_record([e.iter.to_string(), fmt_sig(e.objective), e.step_kind.as_str().into(), e.accepted.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// First-order lower bound of the received amplitude of sensor `k` around
/// `q_ref`, evaluated at `q`. Tight at `q = q_ref`.
pub fn amplitude_lower_bound(q: Point, q_ref: Point, p: f64, k: usize, s: &Scenario) -> f64 {
    let (c0, c1) = amplitude_bound_coeffs(q_ref, p, k, s);
    c0 + c1 * q.dist_sq(s.sensors[k].position)
}

/// `(c0, c1)` with bound `c0 + c1 ‖q − S_k‖²`; `c1 ≤ 0`.
fn amplitude_bound_coeffs(q_ref: Point, p: f64, k: usize, s: &Scenario) -> (f64, f64) {
    let h2 = s.altitude * s.altitude;
    let x0 = q_ref.dist_sq(s.sensors[k].position) + h2;
    let e = s.path_loss_exp / 4.0;
    let w = (p.max(0.0) * s.ref_gain).sqrt();
    let f0 = x0.powf(-e);
    let f1 = -e * f0 / x0;
    (w * (f0 + f1 * (h2 - x0)), w * f1)
}

/// Tangent lower bound of `(Σ a)²` at `a_ref`.
pub fn square_sum_lower_bound(a: &[f64], a_ref: &[f64]) -> f64 {
    let r: f64 = a_ref.iter().sum();
    let x: f64 = a.iter().sum();
    r * r + 2.0 * r * (x - r)
}

fn barrier_options() -> BarrierOptions {
    BarrierOptions::default().with_gap_tol(BARRIER_GAP).with_max_newton(BARRIER_MAX_NEWTON)
}

/// Trajectory subproblem in normalized units: received amplitudes are
/// divided by `sqrt(γ σ²)` so the cap on `A'` is 1.
///
/// Variables: `[x_w, y_w, A'_{w−1}]` for free waypoints `w = 1..N−1`, then
/// `A'_{N−1}` for the last slot, which sits on `q_F`.
struct TrajectoryProgram {
    n: usize,
    start: Point,
    finish: Point,
    step_sq: f64,
    sites: Vec<Point>,
    /// Per slot: reference amplitude sum `S̃`.
    s_ref: Vec<f64>,
    /// Per slot, per sensor: bound coefficients (normalized).
    coeffs: Vec<Vec<(f64, f64)>>,
}

impl TrajectoryProgram {
    fn waypoint(&self, x: &[f64], w: usize) -> Point {
        if w == 0 {
            self.start
        } else if w == self.n {
            self.finish
        } else {
            Point::new(x[3 * (w - 1)], x[3 * (w - 1) + 1])
        }
    }

    fn a_index(&self, slot: usize) -> usize {
        if slot + 1 < self.n {
            3 * slot + 2
        } else {
            3 * (self.n - 1)
        }
    }

    fn bound_sum(&self, slot: usize, q: Point) -> f64 {
        self.coeffs[slot].iter().zip(&self.sites).map(|(&(c0, c1), &site)| c0 + c1 * q.dist_sq(site)).sum()
    }

    /// `A' − [S̃² + 2 S̃ (Σ ã_low(q) − S̃)]`.
    fn tangent_gap(&self, x: &[f64], slot: usize) -> f64 {
        let r = self.s_ref[slot];
        let q = self.waypoint(x, slot + 1);
        x[self.a_index(slot)] + r * r - 2.0 * r * self.bound_sum(slot, q)
    }
}

impl SmoothConvexProgram for TrajectoryProgram {
    fn dim(&self) -> usize {
        3 * (self.n - 1) + 1
    }

    fn layout(&self) -> HessianLayout {
        HessianLayout::Banded { bandwidth: 4, border: 0 }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        -(0..self.n).map(|s| x[self.a_index(s)]).sum::<f64>() / self.n as f64
    }

    fn objective_derivatives(&self, _x: &[f64], grad: &mut [f64], _hess: &mut Vec<(usize, usize, f64)>) {
        for s in 0..self.n {
            grad[self.a_index(s)] = -1.0 / self.n as f64;
        }
    }

    fn constraint_values(&self, x: &[f64], out: &mut Vec<f64>) {
        for slot in 0..self.n {
            out.push(self.tangent_gap(x, slot));
            out.push(x[self.a_index(slot)] - 1.0);
        }
        for w in 1..=self.n {
            let d = self.waypoint(x, w).dist_sq(self.waypoint(x, w - 1));
            out.push(d / self.step_sq - 1.0);
        }
    }

    fn constraint_derivatives(&self, x: &[f64], sink: &mut ConstraintSink) {
        for slot in 0..self.n {
            let ai = self.a_index(slot);
            let gap = self.tangent_gap(x, slot);
            if slot + 1 < self.n {
                let r = self.s_ref[slot];
                let q = self.waypoint(x, slot + 1);
                let (mut gx, mut gy, mut curv) = (0.0, 0.0, 0.0);
                for (&(_, c1), &site) in self.coeffs[slot].iter().zip(&self.sites) {
                    gx += c1 * 2.0 * (q.x - site.x);
                    gy += c1 * 2.0 * (q.y - site.y);
                    curv += c1 * 2.0;
                }
                let (ix, iy) = (3 * slot, 3 * slot + 1);
                let h = -2.0 * r * curv;
                sink.push(gap, &[(ix, -2.0 * r * gx), (iy, -2.0 * r * gy), (ai, 1.0)], &[(ix, ix, h), (iy, iy, h)]);
            } else {
                sink.push(gap, &[(ai, 1.0)], &[]);
            }
            sink.push(x[ai] - 1.0, &[(ai, 1.0)], &[]);
        }
        let c = 1.0 / self.step_sq;
        for w in 1..=self.n {
            let (p, q) = (self.waypoint(x, w), self.waypoint(x, w - 1));
            let d = p - q;
            let val = d.norm_sq() * c - 1.0;
            let mut grad = Vec::with_capacity(4);
            let mut hess = Vec::with_capacity(6);
            let cur = (w < self.n).then(|| 3 * (w - 1));
            let prev = (w > 1).then(|| 3 * (w - 2));
            if let Some(i) = prev {
                grad.push((i, -2.0 * c * d.x));
                grad.push((i + 1, -2.0 * c * d.y));
                hess.push((i, i, 2.0 * c));
                hess.push((i + 1, i + 1, 2.0 * c));
            }
            if let Some(i) = cur {
                grad.push((i, 2.0 * c * d.x));
                grad.push((i + 1, 2.0 * c * d.y));
                hess.push((i, i, 2.0 * c));
                hess.push((i + 1, i + 1, 2.0 * c));
            }
            if let (Some(i), Some(j)) = (cur, prev) {
                hess.push((i, j, -2.0 * c));
                hess.push((i + 1, j + 1, -2.0 * c));
            }
            sink.push(val, &grad, &hess);
        }
    }
}

fn threshold_amplitude(s: &Scenario) -> f64 {
    (s.snr_threshold * s.noise_power).sqrt()
}

fn trajectory_program(state: &ScaState, s: &Scenario) -> TrajectoryProgram {
    let n = s.slots;
    let norm = threshold_amplitude(s);
    let sums = state.amplitude_sums(s);
    let coeffs = (0..n)
        .map(|slot| {
            let q = state.trajectory.slot_point(slot);
            (0..s.num_sensors())
                .map(|k| {
                    let (c0, c1) = amplitude_bound_coeffs(q, state.powers.powers[k][slot], k, s);
                    (c0 / norm, c1 / norm)
                })
                .collect()
        })
        .collect();
    TrajectoryProgram {
        n,
        start: s.start,
        finish: s.finish,
        step_sq: s.max_step() * s.max_step(),
        sites: s.sensors.iter().map(|x| x.position).collect(),
        s_ref: sums.iter().map(|a| a / norm).collect(),
        coeffs,
    }
}

/// Keeps the candidate only if it does not lower the capped SNR average.
fn accept_or_keep(mut state: ScaState, mut cand: ScaState, s: &Scenario, kind: StepKind) -> ScaState {
    let before = state.objective(s);
    state.iteration += 1;
    cand.refresh(s);
    let after = cand.objective(s);
    if after >= before && after.is_finite() {
        cand.iteration = state.iteration;
        cand.trace = std::mem::take(&mut state.trace);
        cand.trace.push(TraceEntry { iter: cand.iteration, objective: after, step_kind: kind, accepted: true });
        cand
    } else {
        state.trace.push(TraceEntry { iter: state.iteration, objective: before, step_kind: kind, accepted: false });
        state
    }
}

fn reject(mut state: ScaState, s: &Scenario, kind: StepKind) -> ScaState {
    state.iteration += 1;
    let objective = state.objective(s);
    state.trace.push(TraceEntry { iter: state.iteration, objective, step_kind: kind, accepted: false });
    state
}

/// One SCA step over the trajectory with powers fixed.
///
/// When the straight path is the only feasible trajectory (mission length
/// equal to the range at full speed) or `N = 1`, there is nothing to move and
/// the step is recorded as rejected.
pub fn trajectory_step(state: ScaState, s: &Scenario) -> ScaState {
    let n = s.slots;
    let kind = StepKind::Trajectory;
    let line = Trajectory::direct(s);
    let direct_step = s.start.dist(s.finish) / n as f64;
    if n < 2 || s.snr_threshold <= 0.0 || direct_step >= s.max_step() * (1.0 - 1e-9) {
        return reject(state, s, kind);
    }
    let prog = trajectory_program(&state, s);
    let mut x0 = vec![0.0; prog.dim()];
    for w in 1..n {
        let q = state.trajectory.waypoints[w].lerp(line.waypoints[w], INTERIOR_BLEND);
        x0[3 * (w - 1)] = q.x;
        x0[3 * (w - 1) + 1] = q.y;
    }
    for slot in 0..n {
        // strictly below both the tangent bound and the cap
        let i = prog.a_index(slot);
        x0[i] = 0.0;
        let room = -prog.tangent_gap(&x0, slot);
        x0[i] = room.min(1.0) - 0.01;
    }
    let out = solve_barrier(&prog, &x0, &barrier_options());
    if !out.is_optimal() {
        log::debug!("trajectory step stopped with {:?}", out.status);
        return reject(state, s, kind);
    }
    let mut cand = state.clone();
    for w in 1..n {
        cand.trajectory.waypoints[w] = prog.waypoint(&out.x, w);
    }
    accept_or_keep(state, cand, s, kind)
}

/// Power subproblem, normalized: `P' = P / P_ave` for the sensors with a
/// positive budget. Variables per slot are `[P'_1..P'_K', A']`.
struct PowerProgram {
    n: usize,
    k: usize,
    /// Per slot: `S̃`.
    s_ref: Vec<f64>,
    /// `w[slot][j] = sqrt(P_ave_j g_j / (γ σ²))`.
    w: Vec<Vec<f64>>,
    /// Budget row bound: `Σ_n P'_j[n] ≤ limit`.
    limit: f64,
}

impl PowerProgram {
    fn block(&self) -> usize {
        self.k + 1
    }

    fn a_index(&self, slot: usize) -> usize {
        slot * self.block() + self.k
    }

    fn tangent_gap(&self, x: &[f64], slot: usize) -> f64 {
        let r = self.s_ref[slot];
        let base = slot * self.block();
        let amp: f64 = (0..self.k).map(|j| self.w[slot][j] * x[base + j].max(0.0).sqrt()).sum();
        x[self.a_index(slot)] + r * r - 2.0 * r * amp
    }
}

impl SmoothConvexProgram for PowerProgram {
    fn dim(&self) -> usize {
        self.n * self.block()
    }

    fn layout(&self) -> HessianLayout {
        HessianLayout::Banded { bandwidth: self.k, border: 0 }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        -(0..self.n).map(|s| x[self.a_index(s)]).sum::<f64>() / self.n as f64
    }

    fn objective_derivatives(&self, _x: &[f64], grad: &mut [f64], _hess: &mut Vec<(usize, usize, f64)>) {
        for s in 0..self.n {
            grad[self.a_index(s)] = -1.0 / self.n as f64;
        }
    }

    fn constraint_values(&self, x: &[f64], out: &mut Vec<f64>) {
        for slot in 0..self.n {
            let base = slot * self.block();
            // positivity first so the square roots below stay real
            for j in 0..self.k {
                out.push(-x[base + j]);
            }
            out.push(self.tangent_gap(x, slot));
            out.push(x[self.a_index(slot)] - 1.0);
        }
        for j in 0..self.k {
            let used: f64 = (0..self.n).map(|s| x[s * self.block() + j]).sum();
            out.push(used - self.limit);
        }
    }

    fn constraint_derivatives(&self, x: &[f64], sink: &mut ConstraintSink) {
        let mut grad = Vec::with_capacity(self.block());
        let mut hess = Vec::with_capacity(self.k);
        for slot in 0..self.n {
            let base = slot * self.block();
            for j in 0..self.k {
                sink.push(-x[base + j], &[(base + j, -1.0)], &[]);
            }
            let r = self.s_ref[slot];
            grad.clear();
            hess.clear();
            for j in 0..self.k {
                let p = x[base + j];
                let root = p.sqrt();
                grad.push((base + j, -r * self.w[slot][j] / root));
                hess.push((base + j, base + j, 0.5 * r * self.w[slot][j] / (p * root)));
            }
            let ai = self.a_index(slot);
            grad.push((ai, 1.0));
            sink.push(self.tangent_gap(x, slot), &grad, &hess);
            sink.push(x[ai] - 1.0, &[(ai, 1.0)], &[]);
        }
        for j in 0..self.k {
            let used: f64 = (0..self.n).map(|s| x[s * self.block() + j]).sum();
            let g: Vec<(usize, f64)> = (0..self.n).map(|s| (s * self.block() + j, 1.0)).collect();
            sink.push(used - self.limit, &g, &[]);
        }
    }
}

/// One SCA step over the powers with the trajectory fixed. Sensors with a
/// zero budget stay silent.
pub fn power_step(state: ScaState, s: &Scenario) -> ScaState {
    let kind = StepKind::Power;
    let active: Vec<usize> = (0..s.num_sensors()).filter(|&k| s.sensors[k].avg_power_budget > 0.0).collect();
    if active.is_empty() || s.snr_threshold <= 0.0 {
        return reject(state, s, kind);
    }
    let n = s.slots;
    let norm = threshold_amplitude(s);
    let sums = state.amplitude_sums(s);
    let w = (0..n)
        .map(|slot| {
            let g = channel_gains(state.trajectory.slot_point(slot), s);
            active.iter().map(|&k| (s.sensors[k].avg_power_budget * g[k]).sqrt() / norm).collect()
        })
        .collect();
    let prog = PowerProgram {
        n,
        k: active.len(),
        s_ref: sums.iter().map(|a| a / norm).collect(),
        w,
        limit: n as f64,
    };
    let mut x0 = vec![0.0; prog.dim()];
    for slot in 0..n {
        let base = slot * prog.block();
        for (j, &k) in active.iter().enumerate() {
            let p = state.powers.powers[k][slot] / s.sensors[k].avg_power_budget;
            x0[base + j] = (1.0 - INTERIOR_BLEND) * p + 0.5 * INTERIOR_BLEND;
        }
    }
    for slot in 0..n {
        let i = prog.a_index(slot);
        x0[i] = 0.0;
        let room = -prog.tangent_gap(&x0, slot);
        x0[i] = room.min(1.0) - 0.01;
    }
    let out = solve_barrier(&prog, &x0, &barrier_options());
    if !out.is_optimal() {
        log::debug!("power step stopped with {:?}", out.status);
        return reject(state, s, kind);
    }
    let mut cand = state.clone();
    for slot in 0..n {
        let base = slot * prog.block();
        for (j, &k) in active.iter().enumerate() {
            cand.powers.powers[k][slot] = out.x[base + j].max(0.0) * s.sensors[k].avg_power_budget;
        }
    }
    accept_or_keep(state, cand, s, kind)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Shf,
    Direct,
}

/// Starting trajectory for the SCA iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct InitTrajectory {
    pub kind: InitKind,
    pub waypoints: Vec<Point>,
}

impl InitTrajectory {
    pub fn direct(s: &Scenario) -> Self {
        InitTrajectory { kind: InitKind::Direct, waypoints: Trajectory::direct(s).waypoints }
    }

    pub fn trajectory(&self, s: &Scenario) -> Trajectory {
        Trajectory::new(self.waypoints.clone(), s.slot_length())
    }
}

/// Result of [`plan_sca`].
#[derive(Clone, Debug)]
pub struct ScaPlan {
    pub trajectory: Trajectory,
    pub powers: PowerSchedule,
    pub state: ScaState,
}

/// Alternates trajectory and power steps from `init` with uniform powers
/// until a round improves the objective by less than [`REL_IMPROVEMENT_TOL`]
/// (relative) or [`MAX_ROUNDS`] rounds have run.
pub fn plan_sca(s: &Scenario, init: &InitTrajectory) -> ScaPlan {
    iterate(s, init, true)
}

/// Trajectory-only variant: powers stay at their uniform start.
pub fn plan_trajectory_only(s: &Scenario, init: &InitTrajectory) -> ScaPlan {
    iterate(s, init, false)
}

fn iterate(s: &Scenario, init: &InitTrajectory, with_power: bool) -> ScaPlan {
    let mut state = ScaState::new(s, init.trajectory(s), PowerSchedule::uniform(s));
    for _ in 0..MAX_ROUNDS {
        let before = state.objective(s);
        state = trajectory_step(state, s);
        if with_power {
            state = power_step(state, s);
        }
        let after = state.objective(s);
        if after - before <= REL_IMPROVEMENT_TOL * before.abs() {
            break;
        }
    }
    ScaPlan { trajectory: state.trajectory.clone(), powers: state.powers.clone(), state }
}

fn tour_length(start: Point, finish: Point, pts: &[Point], order: &[usize]) -> f64 {
    let mut len = 0.0;
    let mut cur = start;
    for &i in order {
        len += cur.dist(pts[i]);
        cur = pts[i];
    }
    len + cur.dist(finish)
}

/// Shortest open tour `start → pts (some order) → finish`. Exact for up to
/// eight points, nearest neighbour plus 2-opt beyond.
pub fn visiting_order(start: Point, finish: Point, pts: &[Point]) -> Vec<usize> {
    let v = pts.len();
    if v <= 8 {
        let mut perm: Vec<usize> = (0..v).collect();
        let mut best = perm.clone();
        let mut best_len = tour_length(start, finish, pts, &perm);
        while next_permutation(&mut perm) {
            let len = tour_length(start, finish, pts, &perm);
            if len < best_len {
                best_len = len;
                best = perm.clone();
            }
        }
        return best;
    }
    let mut order = Vec::with_capacity(v);
    let mut left: Vec<usize> = (0..v).collect();
    let mut cur = start;
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| cur.dist(pts[*a.1]).total_cmp(&cur.dist(pts[*b.1])))
            .expect("non-empty");
        let i = left.remove(pos);
        order.push(i);
        cur = pts[i];
    }
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..v {
            for j in (i + 1)..v {
                let mut cand = order.clone();
                cand[i..=j].reverse();
                if tour_length(start, finish, pts, &cand) < tour_length(start, finish, pts, &order) - 1e-12 {
                    order = cand;
                    improved = true;
                }
            }
        }
    }
    order
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// Piecewise path of fly and hover legs, sampled at the slot boundaries.
pub(crate) fn sample_legs(s: &Scenario, stops: &[(Point, f64)]) -> Vec<Point> {
    // legs: (from, to, duration); hovering legs have from == to
    let mut legs: Vec<(Point, Point, f64)> = Vec::new();
    let mut cur = s.start;
    for &(p, hover) in stops {
        legs.push((cur, p, cur.dist(p) / s.v_max));
        legs.push((p, p, hover));
        cur = p;
    }
    legs.push((cur, s.finish, cur.dist(s.finish) / s.v_max));
    let n = s.slots;
    let delta = s.slot_length();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut t = i as f64 * delta;
        let mut pos = s.finish;
        for &(a, b, d) in &legs {
            if t <= d {
                pos = if d > 0.0 { a.lerp(b, t / d) } else { b };
                break;
            }
            t -= d;
        }
        out.push(pos);
    }
    out[0] = s.start;
    out[n] = s.finish;
    out
}

/// Successive hover-and-fly start through the relaxed hover locations, or
/// the direct flight when the tour does not fit in the mission time.
pub fn init_shf(s: &Scenario, plan: &HoverPlan) -> InitTrajectory {
    let pts = plan.hover_locations();
    let durs = plan.cluster_durations();
    if pts.is_empty() {
        return InitTrajectory::direct(s);
    }
    let order = visiting_order(s.start, s.finish, &pts);
    let fly = tour_length(s.start, s.finish, &pts, &order) / s.v_max;
    if s.duration < fly {
        return InitTrajectory::direct(s);
    }
    let spare = s.duration - fly;
    let total: f64 = durs.iter().sum();
    let stops: Vec<(Point, f64)> = order
        .iter()
        .map(|&i| {
            let share = if total > 0.0 { durs[i] / total } else { 1.0 / pts.len() as f64 };
            (pts[i], spare * share)
        })
        .collect();
    InitTrajectory { kind: InitKind::Shf, waypoints: sample_legs(s, &stops) }
}

/// Capped SNR average of a plan, the quantity traced by the SCA loop.
pub fn capped_snr_average(tr: &Trajectory, ps: &PowerSchedule, s: &Scenario) -> f64 {
    let total: f64 = (0..s.slots)
        .map(|n| snr_from_gains(&ps.slot(n), &channel_gains(tr.slot_point(n), s), s.noise_power).value().min(s.snr_threshold))
        .sum();
    total / s.slots as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{amplitude_sum, snr};
    use crate::scenario::{reference_layout_config, plan_violations, SensorSite};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(sites: &[(f64, f64)], p_ave: f64, t: f64, n: usize, finish: (f64, f64)) -> Scenario {
        let mut cfg = reference_layout_config(30.0, t, n);
        cfg.q_i = [0.0, 0.0];
        cfg.q_f = [finish.0, finish.1];
        let mut s = Scenario::from_config(&cfg).unwrap();
        s.sensors = sites
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| SensorSite { id: i + 1, position: Point::new(x, y), avg_power_budget: p_ave })
            .collect();
        s.validated().unwrap()
    }

    #[test]
    fn amplitude_bound_tight_and_global() {
        let s = Scenario::from_config(&reference_layout_config(30.0, 20.0, 8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let k = rng.gen_range(0..10);
            let p = rng.gen_range(0.0..5.0);
            let q = Point::new(rng.gen_range(-100.0..300.0), rng.gen_range(-100.0..300.0));
            let r = Point::new(rng.gen_range(-100.0..300.0), rng.gen_range(-100.0..300.0));
            let truth = (p * channel_gain(q, k, &s)).sqrt();
            assert!(amplitude_lower_bound(q, r, p, k, &s) <= truth + 1e-12);
            let at_ref = (p * channel_gain(r, k, &s)).sqrt();
            assert!((amplitude_lower_bound(r, r, p, k, &s) - at_ref).abs() <= 1e-12);
        }
        assert_eq!(amplitude_lower_bound(Point::new(1.0, 2.0), Point::new(50.0, 0.0), 0.0, 0, &s), 0.0);
    }

    #[test]
    fn square_sum_bound_examples() {
        let a = [0.3, 0.2];
        assert_relative_eq!(square_sum_lower_bound(&a, &a), 0.25, max_relative = 1e-15);
        assert_eq!(square_sum_lower_bound(&[4.0, 1.0], &[0.0, 0.0]), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..3.0)).collect();
            let r: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..3.0)).collect();
            let x: f64 = a.iter().sum();
            assert!(square_sum_lower_bound(&a, &r) <= x * x + 1e-12);
        }
    }

    #[test]
    fn trajectory_bends_toward_sensor() {
        // one sensor off the straight path, plenty of time and power
        let s = small(&[(100.0, 60.0)], 0.5, 20.0, 16, (200.0, 0.0));
        let state = ScaState::new(&s, Trajectory::direct(&s), PowerSchedule::uniform(&s));
        let before = state.objective(&s);
        let after = trajectory_step(state, &s);
        assert!(after.trace.last().unwrap().accepted);
        assert!(after.objective(&s) > before);
        let mid = after.trajectory.waypoints[8];
        assert!(mid.y > 1.0);
        assert!(plan_violations(&s, &after.trajectory, &after.powers).unwrap().is_empty());
    }

    #[test]
    fn stationary_mission_keeps_position() {
        let s = small(&[(30.0, 0.0)], 1.0, 10.0, 8, (0.0, 0.0));
        let s = Scenario { v_max: 1e-9, ..s };
        let state = ScaState::new(&s, Trajectory::direct(&s), PowerSchedule::uniform(&s));
        let out = trajectory_step(state, &s);
        for w in &out.trajectory.waypoints {
            assert!(w.norm() <= 1e-8);
        }
    }

    #[test]
    fn power_step_single_slot_uses_budget() {
        // hovering overhead needs exactly the budget
        let s = small(&[(0.0, 0.0)], 1.0, 1.0, 1, (0.0, 0.0));
        let g = channel_gain(Point::new(0.0, 0.0), 0, &s);
        let s = s.with_snr_threshold(g / s.noise_power).unwrap();
        let state = ScaState::new(&s, Trajectory::direct(&s), PowerSchedule::zeros(1, 1));
        let mut state = state;
        state.powers.powers[0][0] = 0.5;
        state.refresh(&s);
        let out = power_step(state, &s);
        assert_relative_eq!(out.powers.powers[0][0], 1.0, max_relative = 1e-6);
        assert_relative_eq!(out.received[0], s.snr_threshold * s.noise_power, max_relative = 1e-6);
    }

    #[test]
    fn zero_budget_power_step_is_silent() {
        let s = small(&[(0.0, 0.0), (50.0, 0.0)], 0.0, 10.0, 8, (50.0, 0.0));
        let plan = plan_sca(&s, &InitTrajectory::direct(&s));
        assert!(plan.powers.powers.iter().flatten().all(|&p| p == 0.0));
        assert_eq!(plan.state.objective(&s), 0.0);
    }

    #[test]
    fn doubling_budget_helps() {
        let s = small(&[(40.0, 20.0), (120.0, -10.0)], 0.3, 10.0, 12, (160.0, 0.0));
        let a = plan_sca(&s, &InitTrajectory::direct(&s)).state.objective(&s);
        let s2 = s.with_uniform_budget(0.6).unwrap();
        let b = plan_sca(&s2, &InitTrajectory::direct(&s2)).state.objective(&s2);
        assert!(b >= a - 1e-9);
    }

    #[test]
    fn sca_trace_is_monotone_and_sound() {
        let s = small(&[(40.0, 20.0), (120.0, -10.0), (80.0, 40.0)], 0.5, 10.0, 12, (160.0, 0.0));
        let plan = plan_sca(&s, &InitTrajectory::direct(&s));
        let trace = &plan.state.trace;
        for w in trace.windows(2) {
            assert!(w[1].objective >= w[0].objective - 1e-9);
        }
        assert!(trace.len() <= 1 + 2 * MAX_ROUNDS);
        assert!(plan_violations(&s, &plan.trajectory, &plan.powers).unwrap().is_empty());
        for n in 0..s.slots {
            let v = snr(plan.trajectory.slot_point(n), &plan.powers.slot(n), &s).value();
            assert!(plan.state.received[n] / s.noise_power <= v + 1e-6);
        }
        let a = amplitude_sum(&plan.powers.slot(0), &channel_gains(plan.trajectory.slot_point(0), &s));
        assert_relative_eq!(a, plan.state.amplitudes.iter().map(|r| r[0]).sum::<f64>(), max_relative = 1e-12);
        assert_relative_eq!(plan.state.objective(&s), capped_snr_average(&plan.trajectory, &plan.powers, &s), max_relative = 1e-12);
    }

    #[test]
    fn tsp_orders() {
        let pts = [Point::new(150.0, 0.0), Point::new(50.0, 0.0), Point::new(100.0, 0.0)];
        let order = visiting_order(Point::new(0.0, 0.0), Point::new(200.0, 0.0), &pts);
        assert_eq!(order, vec![1, 2, 0]);
        // the heuristic path agrees on a collinear instance
        let many: Vec<Point> = (0..10).rev().map(|i| Point::new(10.0 * i as f64 + 5.0, 0.0)).collect();
        let order = visiting_order(Point::new(0.0, 0.0), Point::new(200.0, 0.0), &many);
        assert_eq!(order, (0..10).rev().collect::<Vec<_>>());
    }

    #[test]
    fn permutations_enumerate_all() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(p, vec![3, 2, 1, 0]);
    }
}
