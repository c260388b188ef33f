//! Speed-unconstrained optimum via Lagrangian duality and time sharing.
//!
//! Without a speed limit the UAV can time-share between hover points, so the
//! outage problem has zero duality gap. The dual function is evaluated by a
//! pointwise subproblem (closed-form KKT powers at each grid location plus a
//! comparison against the outage branch), maximized by the ellipsoid method,
//! and a primal hover plan is recovered from the linear time-sharing program.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{amplitude_sum, channel_gains};
use crate::convex::{solve_lp_with_duals, LinearProgram, SolveStatus};
use crate::scenario::{watts_to_dbm, Point, Scenario};

/// Multipliers at or below this are treated as zero.
pub const MU_EPS: f64 = 1e-12;
/// Relative tolerance for collecting tied subproblem minimizers.
pub const TIE_REL_TOL: f64 = 1e-6;
/// Hover points closer than this many grid steps share a cluster.
pub const CLUSTER_STEPS: f64 = 2.0;

const COLUMN_ROUNDS: usize = 200;
const ELLIPSOID_MAX_ITERS: usize = 500;
const ELLIPSOID_VOLUME_RATIO: f64 = 1e-10;

/// Uniform search grid over a rectangle, scanned row by row (`y` outer).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: Point,
    pub hi: Point,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Sensor bounding box expanded by the altitude on every side, with
    /// `resolution × resolution` points.
    pub fn for_scenario(s: &Scenario, resolution: usize) -> Self {
        let (lo, hi) = s.sensor_bounds();
        let h = s.altitude;
        GridSpec {
            lo: Point::new(lo.x - h, lo.y - h),
            hi: Point::new(hi.x + h, hi.y + h),
            nx: resolution.max(1),
            ny: resolution.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> (f64, f64) {
        let sx = if self.nx > 1 { (self.hi.x - self.lo.x) / (self.nx - 1) as f64 } else { 0.0 };
        let sy = if self.ny > 1 { (self.hi.y - self.lo.y) / (self.ny - 1) as f64 } else { 0.0 };
        (sx, sy)
    }

    pub fn point(&self, idx: usize) -> Point {
        let (sx, sy) = self.step();
        let (ix, iy) = (idx % self.nx, idx / self.nx);
        let x = if self.nx > 1 { self.lo.x + ix as f64 * sx } else { 0.5 * (self.lo.x + self.hi.x) };
        let y = if self.ny > 1 { self.lo.y + iy as f64 * sy } else { 0.5 * (self.lo.y + self.hi.y) };
        Point::new(x, y)
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Dual variables of the average-power constraints.
///
/// A sensor with zero budget carries `f64::INFINITY`: it never transmits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualPoint(pub Vec<f64>);

impl DualPoint {
    pub fn zeros(k: usize) -> Self {
        DualPoint(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Outage,
    Transmit,
}

/// Solution of the per-instant subproblem `min 1(SNR) + Σ μ_k P_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemSolution {
    pub branch: Branch,
    /// Grid point chosen on the transmit branch.
    pub location: Option<Point>,
    pub powers: Vec<f64>,
    pub value: f64,
}

/// Channel gains at every grid point, computed once per scenario and grid.
pub struct GainTable {
    pub grid: GridSpec,
    points: Vec<Point>,
    gains: Vec<f64>,
    k: usize,
}

impl GainTable {
    pub fn new(s: &Scenario, grid: &GridSpec) -> Self {
        let points = grid.points();
        let k = s.num_sensors();
        let gains: Vec<f64> = points.par_iter().flat_map_iter(|&q| channel_gains(q, s)).collect();
        GainTable { grid: *grid, points, gains, k }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn gains(&self, i: usize) -> &[f64] {
        &self.gains[i * self.k..(i + 1) * self.k]
    }

    /// Transmit-branch cost `Σ μ_k P_k` at every grid point (`∞` where the
    /// threshold cannot be met).
    fn costs(&self, mu: &DualPoint, s: &Scenario) -> Vec<(f64, f64)> {
        (0..self.len())
            .into_par_iter()
            .map(|i| match powers_from_gains(mu, self.gains(i), s) {
                Some(p) => (transmit_cost(mu, &p), p.iter().sum()),
                None => (f64::INFINITY, f64::INFINITY),
            })
            .collect()
    }
}

fn transmit_cost(mu: &DualPoint, p: &[f64]) -> f64 {
    mu.0.iter().zip(p).filter(|(m, _)| m.is_finite()).map(|(m, p)| m * p).sum()
}

/// Minimum-cost powers that meet the SNR threshold at `q` under prices `mu`.
///
/// With every price positive this is the closed-form KKT split, which lands
/// exactly on the threshold. Sensors with zero price cost nothing, so they
/// carry the whole link alone (minimum-energy split among them). `None`
/// means no sensor may transmit.
pub fn powers_given_location(mu: &DualPoint, q: Point, s: &Scenario) -> Option<Vec<f64>> {
    powers_from_gains(mu, &channel_gains(q, s), s)
}

pub(crate) fn powers_from_gains(mu: &DualPoint, gains: &[f64], s: &Scenario) -> Option<Vec<f64>> {
    let target = (s.snr_threshold * s.noise_power).sqrt();
    let free: Vec<usize> = (0..gains.len()).filter(|&i| mu.0[i] <= MU_EPS).collect();
    let mut rho = vec![0.0; gains.len()];
    if !free.is_empty() {
        // ρ_i ∝ √g_i minimizes Σ ρ² subject to Σ √g_i ρ_i = target
        let total: f64 = free.iter().map(|&i| gains[i]).sum();
        for &i in &free {
            rho[i] = target * gains[i].sqrt() / total;
        }
    } else {
        let priced: Vec<usize> = (0..gains.len()).filter(|&i| mu.0[i].is_finite()).collect();
        if priced.is_empty() {
            return None;
        }
        let denom: f64 = priced.iter().map(|&i| gains[i] / mu.0[i]).sum();
        for &i in &priced {
            rho[i] = target * gains[i].sqrt() / (mu.0[i] * denom);
        }
    }
    Some(rho.iter().map(|r| r * r).collect())
}

/// Grid search over the transmit branch, compared against the outage branch.
pub fn solve_pointwise_subproblem(mu: &DualPoint, s: &Scenario, grid: &GridSpec) -> SubproblemSolution {
    subproblem_on(mu, s, &GainTable::new(s, grid))
}

fn argmin_cost(costs: &[(f64, f64)]) -> Option<usize> {
    // row-major first minimizer; exact ties fall back to lower total power
    let mut best: Option<usize> = None;
    for (i, c) in costs.iter().enumerate() {
        if !c.0.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let cb = costs[b];
                if c.0 < cb.0 || (c.0 == cb.0 && c.1 < cb.1) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

fn subproblem_on(mu: &DualPoint, s: &Scenario, table: &GainTable) -> SubproblemSolution {
    let costs = table.costs(mu, s);
    let k = s.num_sensors();
    match argmin_cost(&costs) {
        Some(i) if costs[i].0 < 1.0 => {
            let powers = powers_from_gains(mu, table.gains(i), s).expect("finite cost implies reachable");
            SubproblemSolution { branch: Branch::Transmit, location: Some(table.point(i)), powers, value: costs[i].0 }
        }
        _ => SubproblemSolution { branch: Branch::Outage, location: None, powers: vec![0.0; k], value: 1.0 },
    }
}

/// Dual function value, a subgradient and the subproblem solution behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct DualEvaluation {
    pub value: f64,
    pub subgradient: Vec<f64>,
    pub solution: SubproblemSolution,
}

/// `g(μ) = v(μ) − Σ μ_k P_k^ave` with subgradient `P_k^(μ) − P_k^ave`.
pub fn dual_function(mu: &DualPoint, s: &Scenario, grid: &GridSpec) -> DualEvaluation {
    dual_on(mu, s, &GainTable::new(s, grid))
}

fn dual_on(mu: &DualPoint, s: &Scenario, table: &GainTable) -> DualEvaluation {
    let solution = subproblem_on(mu, s, table);
    let mut value = solution.value;
    let mut subgradient = Vec::with_capacity(s.num_sensors());
    for (k, sensor) in s.sensors.iter().enumerate() {
        if mu.0[k].is_finite() {
            value -= mu.0[k] * sensor.avg_power_budget;
        }
        subgradient.push(solution.powers[k] - sensor.avg_power_budget);
    }
    DualEvaluation { value, subgradient, solution }
}

/// Upper end of the multiplier box searched by the ellipsoid method.
///
/// Any optimal `μ` satisfies `Σ μ_k P_k^ave ≤ v(μ) ≤ 1`, so `μ_k ≤ 1/P_k^ave`;
/// the box doubles the tightest such bound.
pub fn mu_box_bound(s: &Scenario) -> f64 {
    let min_budget = s
        .sensors
        .iter()
        .map(|x| x.avg_power_budget)
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    2.0 / min_budget
}

/// Trace of a dual search: best point, its value, and every transmit-branch
/// column `(location, powers)` the subproblem produced along the way.
#[derive(Clone, Debug)]
pub struct DualSearch {
    pub best: DualPoint,
    pub best_value: f64,
    pub iterations: usize,
    pub columns: Vec<(Point, Vec<f64>)>,
}

/// Maximizes the dual function with the central-cut ellipsoid method.
pub fn maximize_dual(s: &Scenario, grid: &GridSpec) -> DualPoint {
    search_dual(s, &GainTable::new(s, grid)).best
}

/// Ellipsoid search over `μ ∈ [0, μ_max]^K`, starting from the ball that
/// covers the box.
pub fn search_dual(s: &Scenario, table: &GainTable) -> DualSearch {
    let k = s.num_sensors();
    let active: Vec<usize> = (0..k).filter(|&i| s.sensors[i].avg_power_budget > 0.0).collect();
    let n = active.len();
    let mut mu_full = vec![f64::INFINITY; k];
    let mut columns = Vec::new();
    let record = |ev: &DualEvaluation, columns: &mut Vec<(Point, Vec<f64>)>| {
        if let Some(q) = ev.solution.location {
            columns.push((q, ev.solution.powers.clone()));
        }
    };
    if n == 0 {
        let mu = DualPoint(mu_full);
        let ev = dual_on(&mu, s, table);
        return DualSearch { best: mu, best_value: ev.value, iterations: 1, columns };
    }
    let mu_max = mu_box_bound(s);
    let embed = |x: &[f64], full: &mut Vec<f64>| {
        for (j, &i) in active.iter().enumerate() {
            full[i] = x[j];
        }
    };

    let mut center = vec![0.5 * mu_max; n];
    let radius_sq = 0.25 * mu_max * mu_max * n as f64;
    // shape matrix P (row-major); ellipsoid {y : (y−c)ᵀ P⁻¹ (y−c) ≤ 1}
    let mut shape = vec![0.0; n * n];
    for i in 0..n {
        shape[i * n + i] = radius_sq;
    }
    let mut lo_1d = 0.0;
    let mut hi_1d = mu_max;

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut log_vol_ratio = 0.0f64;
    let nf = n as f64;
    let mut iterations = 0;
    while iterations < ELLIPSOID_MAX_ITERS {
        iterations += 1;
        // feasibility cut or objective cut, as a direction h to keep hᵀ(y−c) ≤ 0
        let h: Vec<f64> = if let Some(j) = (0..n).find(|&j| center[j] < 0.0) {
            let mut h = vec![0.0; n];
            h[j] = -1.0;
            h
        } else if let Some(j) = (0..n).find(|&j| center[j] > mu_max) {
            let mut h = vec![0.0; n];
            h[j] = 1.0;
            h
        } else {
            embed(&center, &mut mu_full);
            let mu = DualPoint(mu_full.clone());
            let ev = dual_on(&mu, s, table);
            record(&ev, &mut columns);
            if best.as_ref().map_or(true, |b| ev.value > b.1) {
                best = Some((center.clone(), ev.value));
            }
            let sub: Vec<f64> = active.iter().map(|&i| ev.subgradient[i]).collect();
            if sub.iter().all(|&g| g == 0.0) {
                break;
            }
            sub.iter().map(|g| -g).collect()
        };

        if n == 1 {
            // a one-dimensional ellipsoid is an interval
            if h[0] > 0.0 {
                hi_1d = center[0];
            } else {
                lo_1d = center[0];
            }
            center[0] = 0.5 * (lo_1d + hi_1d);
            log_vol_ratio -= std::f64::consts::LN_2;
        } else {
            let ph: Vec<f64> = (0..n).map(|i| (0..n).map(|j| shape[i * n + j] * h[j]).sum()).collect();
            let hph: f64 = h.iter().zip(&ph).map(|(a, b)| a * b).sum();
            if !(hph > 0.0) {
                break;
            }
            let root = hph.sqrt();
            for i in 0..n {
                center[i] -= ph[i] / (root * (nf + 1.0));
            }
            let c1 = nf * nf / (nf * nf - 1.0);
            let c2 = 2.0 / (nf + 1.0);
            for i in 0..n {
                for j in 0..n {
                    shape[i * n + j] = c1 * (shape[i * n + j] - c2 * ph[i] * ph[j] / hph);
                }
            }
            // sqrt(det) ratio per step
            log_vol_ratio += 0.5 * (nf * c1.ln() + (1.0 - c2).ln());
        }
        if log_vol_ratio < ELLIPSOID_VOLUME_RATIO.ln() {
            break;
        }
    }

    // the box corner μ = 0 is often optimal and never an ellipsoid center
    let zero = vec![0.0; n];
    embed(&zero, &mut mu_full);
    let ev = dual_on(&DualPoint(mu_full.clone()), s, table);
    record(&ev, &mut columns);
    if best.as_ref().map_or(true, |b| ev.value > b.1) {
        best = Some((zero, ev.value));
    }

    let (x, value) = best.expect("at least one evaluation");
    embed(&x, &mut mu_full);
    DualSearch { best: DualPoint(mu_full), best_value: value, iterations, columns }
}

/// One time-shared hover point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoverCandidate {
    pub location: Point,
    pub powers: Vec<f64>,
    /// Hover duration, seconds.
    pub duration: f64,
}

/// Hover candidates within [`CLUSTER_STEPS`] grid steps of each other.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoverCluster {
    /// Duration-weighted centroid.
    pub centroid: Point,
    pub duration: f64,
    /// Indices into [`HoverPlan::candidates`].
    pub members: Vec<usize>,
}

/// Optimal time-sharing plan of the speed-unconstrained problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoverPlan {
    pub candidates: Vec<HoverCandidate>,
    pub clusters: Vec<HoverCluster>,
    pub outage_duration: f64,
    pub horizon: f64,
    pub outage_probability: f64,
    pub mu: DualPoint,
    pub dual_value: f64,
}

impl HoverPlan {
    /// Number of distinct hover locations.
    pub fn num_locations(&self) -> usize {
        self.clusters.len()
    }

    pub fn hover_locations(&self) -> Vec<Point> {
        self.clusters.iter().map(|c| c.centroid).collect()
    }

    /// Hover durations per cluster.
    pub fn cluster_durations(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.duration).collect()
    }

    /// JSON view with powers in dBm.
    pub fn to_json(&self) -> serde_json::Value {
        let dbm = |p: f64| if p > 0.0 { serde_json::json!(watts_to_dbm(p)) } else { serde_json::Value::Null };
        serde_json::json!({
            "outage_probability": self.outage_probability,
            "outage_duration_s": self.outage_duration,
            "horizon_s": self.horizon,
            "dual_value": self.dual_value,
            "mu": self.mu.0.iter().map(|m| if m.is_finite() { serde_json::json!(m) } else { serde_json::Value::Null }).collect::<Vec<_>>(),
            "num_locations": self.num_locations(),
            "locations": self.clusters.iter().map(|c| serde_json::json!({
                "x": c.centroid.x,
                "y": c.centroid.y,
                "duration_s": c.duration,
                "candidates": c.members,
            })).collect::<Vec<_>>(),
            "candidates": self.candidates.iter().map(|c| serde_json::json!({
                "x": c.location.x,
                "y": c.location.y,
                "duration_s": c.duration,
                "powers_dbm": c.powers.iter().map(|&p| dbm(p)).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Hover plan from the tie set of the subproblem at `mu_opt`.
pub fn build_hover_plan(mu_opt: &DualPoint, s: &Scenario, grid: &GridSpec) -> HoverPlan {
    let table = GainTable::new(s, grid);
    let value = dual_on(mu_opt, s, &table).value;
    hover_plan_from_columns(mu_opt, value, s, &table, Vec::new())
}

fn tie_columns(mu: &DualPoint, s: &Scenario, table: &GainTable) -> Vec<(Point, Vec<f64>)> {
    let costs = table.costs(mu, s);
    let Some(best) = argmin_cost(&costs) else {
        return Vec::new();
    };
    let min = costs[best].0;
    if min >= 1.0 {
        return Vec::new();
    }
    let tol = TIE_REL_TOL * min.abs();
    (0..table.len())
        .filter(|&i| costs[i].0 <= min + tol)
        .filter_map(|i| powers_from_gains(mu, table.gains(i), s).map(|p| (table.point(i), p)))
        .collect()
}

fn dedup_columns(columns: Vec<(Point, Vec<f64>)>) -> Vec<(Point, Vec<f64>)> {
    let mut uniq: Vec<(Point, Vec<f64>)> = Vec::with_capacity(columns.len());
    for c in columns {
        if !uniq.iter().any(|u| u.0 == c.0 && u.1 == c.1) {
            uniq.push(c);
        }
    }
    uniq
}

/// Time-sharing LP `max Σ τ_ν` s.t. `Σ τ_ν P_k^(ν) ≤ T P_k^ave`, `Σ τ_ν ≤ T`.
/// Returns the durations and the budget prices `(μ, z)` normalized per
/// unit of horizon.
fn time_sharing_lp(columns: &[(Point, Vec<f64>)], s: &Scenario) -> (Vec<f64>, Vec<f64>, f64) {
    let t = s.duration;
    let v = columns.len();
    let mut lp = LinearProgram::maximize(vec![1.0; v]);
    for (k, sensor) in s.sensors.iter().enumerate() {
        lp = lp.le(columns.iter().map(|c| c.1[k]).collect(), t * sensor.avg_power_budget);
    }
    lp = lp.le(vec![1.0; v], t);
    let (out, duals) = solve_lp_with_duals(&lp);
    assert_eq!(out.status, SolveStatus::Optimal, "time-sharing LP is always feasible at τ = 0");
    let k = s.num_sensors();
    let mu = duals[..k].iter().map(|d| (-d).max(0.0)).collect();
    (out.x, mu, (-duals[k]).max(0.0))
}

/// Column generation on the time-sharing LP: the LP prices are fed back to
/// the pointwise subproblem until no grid column prices out. Returns the
/// final multipliers with their dual value, and the column pool.
fn refine_columns(
    s: &Scenario,
    table: &GainTable,
    mut columns: Vec<(Point, Vec<f64>)>,
    mut best: (DualPoint, f64),
) -> ((DualPoint, f64), Vec<(Point, Vec<f64>)>) {
    columns.extend(tie_columns(&best.0, s, table));
    columns = dedup_columns(columns);
    if columns.is_empty() {
        return (best, columns);
    }
    for _ in 0..COLUMN_ROUNDS {
        let (_, mut mu, z) = time_sharing_lp(&columns, s);
        for (k, sensor) in s.sensors.iter().enumerate() {
            if sensor.avg_power_budget <= 0.0 {
                mu[k] = f64::INFINITY;
            }
        }
        let mu = DualPoint(mu);
        let ev = dual_on(&mu, s, table);
        if ev.value > best.1 {
            best = (mu.clone(), ev.value);
        }
        let before = columns.len();
        if ev.solution.branch == Branch::Transmit && ev.solution.value < 1.0 - z - 1e-12 {
            columns.extend(tie_columns(&mu, s, table));
            columns = dedup_columns(columns);
        }
        if columns.len() == before {
            break;
        }
    }
    (best, columns)
}

/// Solves the time-sharing program over the tie set at `mu` plus any
/// `extra` columns, then clusters the hover points that receive time.
fn hover_plan_from_columns(
    mu: &DualPoint,
    dual_value: f64,
    s: &Scenario,
    table: &GainTable,
    extra: Vec<(Point, Vec<f64>)>,
) -> HoverPlan {
    let mut columns = tie_columns(mu, s, table);
    columns.extend(extra);
    let columns = dedup_columns(columns);
    let t = s.duration;
    let mut candidates = Vec::new();
    let mut hover_time = 0.0;
    if !columns.is_empty() {
        let (tau, _, _) = time_sharing_lp(&columns, s);
        for (c, &tau) in columns.into_iter().zip(&tau) {
            if tau > 1e-12 * t {
                hover_time += tau;
                candidates.push(HoverCandidate { location: c.0, powers: c.1, duration: tau });
            }
        }
    }
    let hover_time = hover_time.min(t);
    let clusters = cluster_candidates(&candidates, &table.grid);
    let outage_duration = t - hover_time;
    HoverPlan {
        candidates,
        clusters,
        outage_duration,
        horizon: t,
        outage_probability: outage_duration / t,
        mu: mu.clone(),
        dual_value,
    }
}

fn cluster_candidates(cands: &[HoverCandidate], grid: &GridSpec) -> Vec<HoverCluster> {
    let (sx, sy) = grid.step();
    let link = CLUSTER_STEPS * sx.max(sy);
    // single-linkage via union-find
    let mut parent: Vec<usize> = (0..cands.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..cands.len() {
        for j in (i + 1)..cands.len() {
            if cands[i].location.dist(cands[j].location) <= link * (1.0 + 1e-9) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: Vec<(usize, HoverCluster)> = Vec::new();
    for i in 0..cands.len() {
        let r = root(&mut parent, i);
        let pos = match clusters.iter().position(|c| c.0 == r) {
            Some(p) => p,
            None => {
                clusters.push((r, HoverCluster { centroid: Point::default(), duration: 0.0, members: Vec::new() }));
                clusters.len() - 1
            }
        };
        clusters[pos].1.members.push(i);
    }
    clusters
        .into_iter()
        .map(|(_, mut c)| {
            let total: f64 = c.members.iter().map(|&i| cands[i].duration).sum();
            let mut centroid = Point::default();
            for &i in &c.members {
                centroid = centroid + cands[i].location * (cands[i].duration / total);
            }
            c.centroid = centroid;
            c.duration = total;
            c
        })
        .collect()
}

/// Full relaxed solution: ellipsoid dual search, column generation seeded
/// with every subproblem minimizer met during the search, then the
/// time-sharing plan.
#[derive(Clone, Debug)]
pub struct RelaxedSolution {
    pub mu: DualPoint,
    pub dual_value: f64,
    pub plan: HoverPlan,
    pub iterations: usize,
}

pub fn solve_relaxed(s: &Scenario, grid: &GridSpec) -> RelaxedSolution {
    let table = GainTable::new(s, grid);
    let search = search_dual(s, &table);
    let ((mu, dual_value), columns) = refine_columns(s, &table, search.columns, (search.best, search.best_value));
    let plan = hover_plan_from_columns(&mu, dual_value, s, &table, columns);
    RelaxedSolution { mu, dual_value, plan, iterations: search.iterations }
}

/// Check used by tests and the CLI: SNR of a candidate at its location.
pub fn candidate_snr(c: &HoverCandidate, s: &Scenario) -> f64 {
    let a = amplitude_sum(&c.powers, &channel_gains(c.location, s));
    a * a / s.noise_power
}
