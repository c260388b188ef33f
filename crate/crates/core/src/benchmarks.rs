//! The proposed pipeline and the three comparison schemes.

use serde::Serialize;

use crate::channel::{channel_gains, outage_probability};
use crate::error::Result;
use crate::recovery::{feasibility_for_subset, rank_slots, recover_powers, Recovery};
use crate::relaxed::{solve_relaxed, DualPoint, GridSpec, RelaxedSolution};
use crate::sca::{init_shf, plan_sca, plan_trajectory_only, sample_legs, InitTrajectory, ScaPlan};
use crate::scenario::{BudgetNorm, Point, PowerSchedule, Scenario, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    FlyHoverFly,
    PowerOnly,
    TrajectoryOnly,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 3] = [BenchmarkKind::FlyHoverFly, BenchmarkKind::PowerOnly, BenchmarkKind::TrajectoryOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkKind::FlyHoverFly => "fly_hover_fly",
            BenchmarkKind::PowerOnly => "power_only",
            BenchmarkKind::TrajectoryOnly => "trajectory_only",
        }
    }
}

/// A plan and its outage probability.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeOutcome {
    pub trajectory: Trajectory,
    pub powers: PowerSchedule,
    pub outage: f64,
}

impl SchemeOutcome {
    fn from_recovery(trajectory: Trajectory, rec: Recovery) -> Self {
        SchemeOutcome { trajectory, powers: rec.schedule, outage: rec.outage }
    }
}

/// Everything produced by the proposed design.
#[derive(Clone, Debug)]
pub struct ProposedRun {
    pub relaxed: RelaxedSolution,
    pub init: InitTrajectory,
    pub sca: ScaPlan,
    pub outcome: SchemeOutcome,
}

/// Relaxed optimum, SHF (or direct) start, alternating SCA, power recovery.
pub fn run_proposed(s: &Scenario, grid: &GridSpec) -> Result<ProposedRun> {
    let relaxed = solve_relaxed(s, grid);
    run_proposed_with(s, relaxed)
}

/// As [`run_proposed`], reusing a relaxed solution of the same scenario.
pub fn run_proposed_with(s: &Scenario, relaxed: RelaxedSolution) -> Result<ProposedRun> {
    let init = init_shf(s, &relaxed.plan);
    let sca = plan_sca(s, &init);
    let rec = recover_powers(&sca.trajectory, &sca.powers, s)?;
    let outcome = SchemeOutcome::from_recovery(sca.trajectory.clone(), rec);
    Ok(ProposedRun { relaxed, init, sca, outcome })
}

/// Max-speed fly, hover at `v`, max-speed fly. `None` if `v` is out of reach.
pub fn fly_hover_fly_trajectory(s: &Scenario, v: Point) -> Option<Trajectory> {
    let fly = (s.start.dist(v) + v.dist(s.finish)) / s.v_max;
    if fly > s.duration * (1.0 + 1e-12) {
        return None;
    }
    let hover = (s.duration - fly).max(0.0);
    Some(Trajectory::new(sample_legs(s, &[(v, hover)]), s.slot_length()))
}

/// Upper bound on the number of slots any power allocation can serve on
/// `tr`: at prices `mu`, serving slot `n` costs at least
/// `γ σ² / Σ_k (g_k[n] / μ_k)`, and the served set must fit in the priced
/// budget.
fn served_upper_bound(tr: &Trajectory, s: &Scenario, mu: &[f64]) -> usize {
    let n = s.slots;
    if s.snr_threshold <= 0.0 {
        return n;
    }
    let mut cost: Vec<f64> = (0..n)
        .map(|slot| {
            let g = channel_gains(tr.slot_point(slot), s);
            let denom: f64 = g.iter().zip(mu).filter(|(_, &m)| m > 0.0 && m.is_finite()).map(|(g, m)| g / m).sum();
            if mu.iter().zip(&s.sensors).any(|(&m, x)| m <= 0.0 && x.avg_power_budget > 0.0) {
                // an unpriced sensor can pay for anything
                0.0
            } else if denom > 0.0 {
                s.snr_threshold * s.noise_power / denom
            } else {
                f64::INFINITY
            }
        })
        .collect();
    cost.sort_by(f64::total_cmp);
    let per_slot: f64 = mu
        .iter()
        .zip(&s.sensors)
        .filter(|(m, _)| m.is_finite())
        .map(|(m, x)| m * x.avg_power_budget)
        .sum();
    let mut used = 0.0;
    let mut served = 0;
    for (i, c) in cost.iter().enumerate() {
        used += c;
        let budget = match s.budget_norm {
            BudgetNorm::Horizon => n as f64 * per_slot,
            BudgetNorm::ActiveSlots => (i + 1) as f64 * per_slot,
        };
        // a little slack so rounding can never prune a feasible count
        if used > budget * (1.0 + 1e-9) {
            break;
        }
        served = i + 1;
    }
    served
}

/// Pricing directions used for pruning: the relaxed multipliers and
/// inverse budgets.
fn pruning_prices(s: &Scenario, relaxed_mu: Option<&DualPoint>) -> Vec<Vec<f64>> {
    let inv: Vec<f64> = s
        .sensors
        .iter()
        .map(|x| if x.avg_power_budget > 0.0 { 1.0 / x.avg_power_budget } else { f64::INFINITY })
        .collect();
    let mut out = vec![inv];
    if let Some(mu) = relaxed_mu {
        if mu.0.iter().all(|&m| m > 0.0) {
            out.push(mu.0.clone());
        }
    }
    out
}

/// Fly-hover-fly with the via-point chosen by exhaustive grid search.
///
/// The search is exact: via-points are visited in order of an upper bound on
/// their served-slot count and skipped once that bound, or a single
/// feasibility probe at the count needed to win, rules them out. Ties go to
/// the first point in row-major order.
pub fn run_fly_hover_fly(s: &Scenario, grid: &GridSpec) -> Result<SchemeOutcome> {
    run_fly_hover_fly_priced(s, grid, None)
}

/// As [`run_fly_hover_fly`], with the relaxed multipliers as an extra
/// pruning price.
pub fn run_fly_hover_fly_priced(s: &Scenario, grid: &GridSpec, relaxed_mu: Option<&DualPoint>) -> Result<SchemeOutcome> {
    let prices = pruning_prices(s, relaxed_mu);
    let mut cands: Vec<(usize, usize, Trajectory)> = (0..grid.len())
        .filter_map(|i| {
            let tr = fly_hover_fly_trajectory(s, grid.point(i))?;
            let ub = prices.iter().map(|mu| served_upper_bound(&tr, s, mu)).min().unwrap_or(s.slots);
            Some((ub, i, tr))
        })
        .collect();
    if cands.is_empty() {
        return run_power_only(s);
    }
    cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let uniform = PowerSchedule::uniform(s);
    let mut best: Option<(usize, usize, SchemeOutcome)> = None;
    let mut evaluated = 0;
    for (ub, idx, tr) in cands {
        if let Some((served, bidx, _)) = &best {
            if ub < *served {
                break;
            }
            if ub == *served && idx > *bidx {
                continue;
            }
            // one probe at the count it would need to win
            let need = if idx < *bidx { *served } else { *served + 1 };
            let ranking = rank_slots(&tr, &uniform, s)?;
            if !feasibility_for_subset(need, &ranking, &tr, s).feasible {
                continue;
            }
        }
        evaluated += 1;
        let rec = recover_powers(&tr, &uniform, s)?;
        let better = match &best {
            None => true,
            Some((served, bidx, _)) => rec.served > *served || (rec.served == *served && idx < *bidx),
        };
        if better {
            best = Some((rec.served, idx, SchemeOutcome::from_recovery(tr, rec)));
        }
    }
    log::debug!("fly-hover-fly fully evaluated {evaluated} of {} via-points", grid.len());
    Ok(best.expect("at least one candidate").2)
}

/// Constant-speed direct flight with recovered powers.
pub fn run_power_only(s: &Scenario) -> Result<SchemeOutcome> {
    let tr = Trajectory::direct(s);
    let rec = recover_powers(&tr, &PowerSchedule::uniform(s), s)?;
    Ok(SchemeOutcome::from_recovery(tr, rec))
}

/// Uniform powers, trajectory optimized by SCA, no power recovery.
pub fn run_trajectory_only(s: &Scenario, init: &InitTrajectory) -> Result<SchemeOutcome> {
    let plan = plan_trajectory_only(s, init);
    let outage = outage_probability(&plan.trajectory, &plan.powers, s)?;
    Ok(SchemeOutcome { trajectory: plan.trajectory, powers: plan.powers, outage })
}

/// Runs one benchmark; `relaxed` supplies the SHF start for trajectory-only
/// and pruning prices for fly-hover-fly.
pub fn run_benchmark(kind: BenchmarkKind, s: &Scenario, grid: &GridSpec, relaxed: &RelaxedSolution) -> Result<SchemeOutcome> {
    match kind {
        BenchmarkKind::FlyHoverFly => run_fly_hover_fly_priced(s, grid, Some(&relaxed.mu)),
        BenchmarkKind::PowerOnly => run_power_only(s),
        BenchmarkKind::TrajectoryOnly => run_trajectory_only(s, &init_shf(s, &relaxed.plan)),
    }
}
