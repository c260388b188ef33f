//! On-off power recovery: serve the best-ranked slots, silence the rest.
//!
//! Slots are ranked by their SNR under the SCA powers. For a candidate count
//! `N'` the top `N'` slots must all reach the threshold within the budgets;
//! that is a convex feasibility problem, decided by a phase-1 barrier solve,
//! and the largest feasible `N'` is found by bisection.

use std::collections::HashMap;
use std::io::Write;

use crate::channel::{outage_probability, slot_snrs, snr, SnrValue};
use crate::convex::{bisect_max_feasible, solve_barrier, BarrierOptions, ConstraintSink, HessianLayout, SmoothConvexProgram};
use crate::error::Result;
use crate::io::fmt_sig;
use crate::scenario::{check_dims, plan_violations, watts_to_dbm, BudgetNorm, PowerSchedule, Scenario, Trajectory};

/// Phase-1 optimum at or below this counts as feasible.
pub const FEASIBLE_T: f64 = 1e-9;
/// Relative threshold inflation inside the solve, so that the small slack
/// allowed by [`FEASIBLE_T`] never drops a served slot below the threshold.
const THRESHOLD_MARGIN: f64 = 4e-9;

/// Slots in descending SNR order, ties by ascending index.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotRanking {
    pub order: Vec<usize>,
    /// SNR of each slot, indexed by slot (not by rank).
    pub snrs: Vec<f64>,
}

pub fn rank_slots(tr: &Trajectory, ps: &PowerSchedule, s: &Scenario) -> Result<SlotRanking> {
    let snrs: Vec<f64> = slot_snrs(tr, ps, s)?.into_iter().map(SnrValue::value).collect();
    let mut order: Vec<usize> = (0..snrs.len()).collect();
    order.sort_by(|&a, &b| snrs[b].total_cmp(&snrs[a]).then(a.cmp(&b)));
    Ok(SlotRanking { order, snrs })
}

/// Result of one feasibility probe.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetFeasibility {
    pub feasible: bool,
    /// Phase-1 optimum (threshold shortfall fraction).
    pub shortfall: f64,
    /// Full schedule (zeros outside the served slots) when feasible.
    pub schedule: Option<PowerSchedule>,
}

/// Phase-1 program over normalized amplitudes `r_k[i] = sqrt(P_k / P_ave_k)`
/// of the served slots, plus the shortfall `t` as a border variable:
/// `min t` s.t. `Σ_k w_k[i] r_k[i] ≥ 1 − t`, `Σ_i r_k[i]² ≤ L`, `t ≥ 0`.
struct PhaseOne {
    slots: usize,
    k: usize,
    /// `w[i][j] = sqrt(P_ave_j g_j) / sqrt(γ' σ²)`.
    w: Vec<Vec<f64>>,
    limit: f64,
}

impl PhaseOne {
    fn t_index(&self) -> usize {
        self.slots * self.k
    }

    fn slot_gap(&self, x: &[f64], i: usize) -> f64 {
        let amp: f64 = (0..self.k).map(|j| self.w[i][j] * x[i * self.k + j]).sum();
        1.0 - x[self.t_index()] - amp
    }

    fn usage(&self, x: &[f64], j: usize) -> f64 {
        (0..self.slots).map(|i| x[i * self.k + j].powi(2)).sum()
    }
}

impl SmoothConvexProgram for PhaseOne {
    fn dim(&self) -> usize {
        self.slots * self.k + 1
    }

    fn layout(&self) -> HessianLayout {
        HessianLayout::Banded { bandwidth: self.k - 1, border: 1 }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        x[self.t_index()]
    }

    fn objective_derivatives(&self, _x: &[f64], grad: &mut [f64], _hess: &mut Vec<(usize, usize, f64)>) {
        grad[self.t_index()] = 1.0;
    }

    fn constraint_values(&self, x: &[f64], out: &mut Vec<f64>) {
        for i in 0..self.slots {
            out.push(self.slot_gap(x, i));
        }
        for j in 0..self.k {
            out.push(self.usage(x, j) - self.limit);
        }
        out.push(-x[self.t_index()]);
    }

    fn constraint_derivatives(&self, x: &[f64], sink: &mut ConstraintSink) {
        let ti = self.t_index();
        let mut grad = Vec::with_capacity(self.k + 1);
        for i in 0..self.slots {
            grad.clear();
            grad.extend((0..self.k).map(|j| (i * self.k + j, -self.w[i][j])));
            grad.push((ti, -1.0));
            sink.push(self.slot_gap(x, i), &grad, &[]);
        }
        for j in 0..self.k {
            let g: Vec<(usize, f64)> = (0..self.slots).map(|i| (i * self.k + j, 2.0 * x[i * self.k + j])).collect();
            let h: Vec<(usize, usize, f64)> = (0..self.slots).map(|i| (i * self.k + j, i * self.k + j, 2.0)).collect();
            sink.push(self.usage(x, j) - self.limit, &g, &h);
        }
        sink.push(-x[ti], &[(ti, -1.0)], &[]);
    }
}

/// Decides whether the top `n_prime` ranked slots can all be served.
pub fn feasibility_for_subset(n_prime: usize, ranking: &SlotRanking, tr: &Trajectory, s: &Scenario) -> SubsetFeasibility {
    let k_all = s.num_sensors();
    let zeros = || PowerSchedule::zeros(k_all, s.slots);
    if n_prime == 0 || s.snr_threshold <= 0.0 {
        return SubsetFeasibility { feasible: true, shortfall: 0.0, schedule: Some(zeros()) };
    }
    let infeasible = |t: f64| SubsetFeasibility { feasible: false, shortfall: t, schedule: None };
    let active: Vec<usize> = (0..k_all).filter(|&k| s.sensors[k].avg_power_budget > 0.0).collect();
    if active.is_empty() {
        return infeasible(1.0);
    }
    let served = &ranking.order[..n_prime];
    let norm = (s.snr_threshold * (1.0 + THRESHOLD_MARGIN) * s.noise_power).sqrt();
    let w: Vec<Vec<f64>> = served
        .iter()
        .map(|&n| {
            let q = tr.slot_point(n);
            active
                .iter()
                .map(|&k| (s.sensors[k].avg_power_budget * crate::channel::channel_gain(q, k, s)).sqrt() / norm)
                .collect()
        })
        .collect();
    let limit = match s.budget_norm {
        BudgetNorm::Horizon => s.slots as f64,
        BudgetNorm::ActiveSlots => n_prime as f64,
    };
    let prog = PhaseOne { slots: n_prime, k: active.len(), w, limit };
    let mut x0 = vec![0.5; prog.dim()];
    let worst = (0..n_prime).map(|i| 1.0 - 0.5 * prog.w[i].iter().sum::<f64>()).fold(0.0f64, f64::max);
    x0[prog.t_index()] = worst + 0.1;
    let opts = BarrierOptions::default().with_gap_tol(1e-12).with_max_newton(500);
    let out = solve_barrier(&prog, &x0, &opts);
    let t = out.x[prog.t_index()];
    if !(t <= FEASIBLE_T) {
        return infeasible(t);
    }

    let mut sched = zeros();
    for (i, &n) in served.iter().enumerate() {
        for (j, &k) in active.iter().enumerate() {
            let r = out.x[i * prog.k + j].max(0.0);
            sched.powers[k][n] = r * r * s.sensors[k].avg_power_budget;
        }
    }
    // the margin makes these hold; keep the contract explicit
    let served_ok = served.iter().all(|&n| snr(tr.slot_point(n), &sched.slot(n), s).value() >= s.snr_threshold);
    let budget_ok = (0..k_all).all(|k| {
        let used: f64 = served.iter().map(|&n| sched.powers[k][n]).sum();
        let cap = prog.limit * s.sensors[k].avg_power_budget;
        used <= cap * (1.0 + crate::scenario::FEAS_REL_TOL)
    });
    let valid = plan_violations(s, tr, &sched).map(|v| v.is_empty()).unwrap_or(false);
    if served_ok && budget_ok && valid {
        SubsetFeasibility { feasible: true, shortfall: t, schedule: Some(sched) }
    } else {
        log::debug!("phase-1 point for N' = {n_prime} failed verification");
        infeasible(t)
    }
}

/// Final schedule from power recovery.
#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub schedule: PowerSchedule,
    pub outage: f64,
    pub served: usize,
    pub ranking: SlotRanking,
    pub used_fallback: bool,
}

/// Bisects the number of served slots and returns the schedule for the
/// largest feasible count.
pub fn recover_powers(tr: &Trajectory, ps: &PowerSchedule, s: &Scenario) -> Result<Recovery> {
    check_dims(s, tr, ps)?;
    let ranking = rank_slots(tr, ps, s)?;
    let mut cache: HashMap<usize, SubsetFeasibility> = HashMap::new();
    let out = bisect_max_feasible(0, s.slots, |n| {
        cache.entry(n).or_insert_with(|| feasibility_for_subset(n, &ranking, tr, s)).feasible
    });
    let best = cache
        .remove(&out.value)
        .filter(|f| f.feasible)
        .unwrap_or_else(|| feasibility_for_subset(0, &ranking, tr, s));
    let schedule = best.schedule.expect("feasible probe carries a schedule");
    let outage = outage_probability(tr, &schedule, s)?;
    debug_assert!(outage <= (s.slots - out.value) as f64 / s.slots as f64 + 1e-12);
    Ok(Recovery { schedule, outage, served: out.value, ranking, used_fallback: out.used_fallback })
}

/// Writes `slot,x,y,snr,outage_flag,p_1_dbm,…,p_K_dbm` (slots 1-based).
pub fn write_schedule_csv(tr: &Trajectory, ps: &PowerSchedule, s: &Scenario, w: impl Write) -> Result<()> {
    let snrs = slot_snrs(tr, ps, s)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["slot".to_string(), "x".into(), "y".into(), "snr".into(), "outage_flag".into()];
    header.extend((1..=s.num_sensors()).map(|k| format!("p_{k}_dbm")));
    out.write_record(&header)?;
    for n in 0..s.slots {
        let q = tr.slot_point(n);
        let v = snrs[n].value();
        let mut row = vec![
            (n + 1).to_string(),
            fmt_sig(q.x),
            fmt_sig(q.y),
            fmt_sig(v),
            crate::channel::outage_indicator(snrs[n], s.snr_threshold).to_string(),
        ];
        row.extend((0..s.num_sensors()).map(|k| fmt_sig(watts_to_dbm(ps.powers[k][n]))));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::channel_gain;
    use crate::scenario::{reference_layout_config, Point, SensorSite};
    use approx::assert_relative_eq;

    fn hover_scenario(p_ave: f64, n: usize) -> Scenario {
        let mut cfg = reference_layout_config(30.0, 10.0, n);
        cfg.sensors.truncate(1);
        cfg.sensors[0].x = 0.0;
        cfg.sensors[0].y = 0.0;
        cfg.q_i = [0.0, 0.0];
        cfg.q_f = [0.0, 0.0];
        Scenario::from_config(&cfg).unwrap().with_uniform_budget(p_ave).unwrap()
    }

    fn ranking_of(snrs: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..snrs.len()).collect();
        order.sort_by(|&a, &b| snrs[b].total_cmp(&snrs[a]).then(a.cmp(&b)));
        order
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(ranking_of(&[1.0, 1.0, 1.0]), vec![0, 1, 2]);
        assert_eq!(ranking_of(&[3.0, 2.0, 1.0]), vec![0, 1, 2]);
        assert_eq!(ranking_of(&[1.0, 2.0, 3.0]), vec![2, 1, 0]);
        // through the real function on a moving trajectory
        let mut cfg = reference_layout_config(30.0, 10.0, 4);
        cfg.sensors.truncate(1);
        cfg.sensors[0].x = 0.0;
        cfg.sensors[0].y = 0.0;
        cfg.q_i = [0.0, 0.0];
        cfg.q_f = [100.0, 0.0];
        let s = Scenario::from_config(&cfg).unwrap();
        let tr = Trajectory::direct(&s);
        let r = rank_slots(&tr, &PowerSchedule::uniform(&s), &s).unwrap();
        assert_eq!(r.order, vec![0, 1, 2, 3]);
        let rev = Trajectory::new(tr.waypoints.iter().rev().copied().collect(), tr.slot_length);
        let s_rev = Scenario { start: s.finish, finish: s.start, ..s.clone() };
        let r = rank_slots(&rev, &PowerSchedule::uniform(&s_rev), &s_rev).unwrap();
        assert_eq!(r.order, vec![3, 2, 1, 0]);
    }

    #[test]
    fn empty_subset_is_feasible() {
        let s = hover_scenario(1.0, 4);
        let tr = Trajectory::direct(&s);
        let r = rank_slots(&tr, &PowerSchedule::uniform(&s), &s).unwrap();
        let f = feasibility_for_subset(0, &r, &tr, &s);
        assert!(f.feasible);
        assert!(f.schedule.unwrap().powers.iter().flatten().all(|&p| p == 0.0));
    }

    #[test]
    fn single_slot_equality_power() {
        // budget exactly at the hovering requirement
        let s = hover_scenario(1.0, 1);
        let g = channel_gain(Point::new(0.0, 0.0), 0, &s);
        let s = s.with_uniform_budget(s.snr_threshold * s.noise_power / g * (1.0 + 1e-8)).unwrap();
        let tr = Trajectory::direct(&s);
        let r = rank_slots(&tr, &PowerSchedule::uniform(&s), &s).unwrap();
        let f = feasibility_for_subset(1, &r, &tr, &s);
        assert!(f.feasible);
        let p = f.schedule.unwrap().powers[0][0];
        assert_relative_eq!(p, s.sensors[0].avg_power_budget, max_relative = 1e-7);
        // and just below the requirement it is not
        let s2 = s.with_uniform_budget(s.snr_threshold * s.noise_power / g * (1.0 - 1e-6)).unwrap();
        assert!(!feasibility_for_subset(1, &r, &tr, &s2).feasible);
    }

    #[test]
    fn zero_budget_is_infeasible() {
        let s = hover_scenario(0.0, 4);
        let tr = Trajectory::direct(&s);
        let r = rank_slots(&tr, &PowerSchedule::uniform(&s), &s).unwrap();
        assert!(!feasibility_for_subset(1, &r, &tr, &s).feasible);
        let rec = recover_powers(&tr, &PowerSchedule::uniform(&s), &s).unwrap();
        assert_eq!(rec.outage, 1.0);
        assert_eq!(rec.served, 0);
    }

    #[test]
    fn ample_budget_serves_everything() {
        let s = hover_scenario(100.0, 8);
        let tr = Trajectory::direct(&s);
        let rec = recover_powers(&tr, &PowerSchedule::uniform(&s), &s).unwrap();
        assert_eq!(rec.outage, 0.0);
        assert_eq!(rec.served, 8);
    }

    #[test]
    fn time_sharing_count_matches_closed_form() {
        // each slot needs P_req; horizon budget N·P_ave buys floor(N P_ave / P_req) slots
        let s = hover_scenario(1.0, 10);
        let g = channel_gain(Point::new(0.0, 0.0), 0, &s);
        let p_req = s.snr_threshold * s.noise_power / g;
        let s = s.with_uniform_budget(0.37 * p_req).unwrap();
        let tr = Trajectory::direct(&s);
        let rec = recover_powers(&tr, &PowerSchedule::uniform(&s), &s).unwrap();
        assert_eq!(rec.served, 3);
        assert_relative_eq!(rec.outage, 0.7, max_relative = 1e-12);
        assert!(plan_violations(&s, &tr, &rec.schedule).unwrap().is_empty());
        // per-active-slot normalization leaves only what one slot can afford
        let s_act = s.with_budget_norm(BudgetNorm::ActiveSlots);
        let rec = recover_powers(&tr, &PowerSchedule::uniform(&s_act), &s_act).unwrap();
        assert_eq!(rec.served, 0);
    }

    #[test]
    fn served_slots_meet_threshold() {
        let mut s = Scenario::from_config(&reference_layout_config(30.0, 10.0, 16)).unwrap();
        s.sensors = vec![
            SensorSite { id: 1, position: Point::new(20.0, 20.0), avg_power_budget: 2.0 },
            SensorSite { id: 2, position: Point::new(80.0, 50.0), avg_power_budget: 1.0 },
        ];
        s.start = Point::new(0.0, 0.0);
        s.finish = Point::new(100.0, 100.0);
        let s = s.validated().unwrap();
        let tr = Trajectory::direct(&s);
        let rec = recover_powers(&tr, &PowerSchedule::uniform(&s), &s).unwrap();
        assert!(rec.served > 0 && rec.served < 16);
        let snrs = slot_snrs(&tr, &rec.schedule, &s).unwrap();
        for &n in &rec.ranking.order[..rec.served] {
            assert!(snrs[n].value() >= s.snr_threshold);
        }
        assert_eq!(rec.outage, outage_probability(&tr, &rec.schedule, &s).unwrap());
        assert!(plan_violations(&s, &tr, &rec.schedule).unwrap().is_empty());
        let mut buf = Vec::new();
        write_schedule_csv(&tr, &rec.schedule, &s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("slot,x,y,snr,outage_flag,p_1_dbm,p_2_dbm\n"));
        assert_eq!(text.lines().count(), 17);
    }
}
