//! Problem instance, plan containers and unit conversions.
//!
//! Configuration documents carry powers in dBm and gains in dB. Everything
//! past [`Scenario::from_config`] is linear SI: watts, meters, seconds.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative feasibility tolerance used for every constraint check.
pub const FEAS_REL_TOL: f64 = 1e-9;
/// Absolute floor under [`FEAS_REL_TOL`].
pub const FEAS_ABS_TOL: f64 = 1e-12;

/// Tolerance for a constraint whose natural magnitude is `scale`.
pub fn feas_tol(scale: f64) -> f64 {
    (FEAS_REL_TOL * scale.abs()).max(FEAS_ABS_TOL)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Horizontal position in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        (self - other).norm_sq()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Ground sensor at a fixed location.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorSite {
    /// 1-based index.
    pub id: usize,
    pub position: Point,
    /// Maximum average transmit power, watts.
    pub avg_power_budget: f64,
}

/// How the average-power budget is normalized in the final feasibility step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetNorm {
    /// `(1/N) Σ_active P ≤ P_ave`: the mission-average constraint.
    #[default]
    Horizon,
    /// `(1/N') Σ_active P ≤ P_ave`: average over active slots only.
    ActiveSlots,
}

/// JSON scenario document, in human-facing units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sensors: Vec<SensorConfig>,
    pub h_m: f64,
    pub beta0_db: f64,
    pub alpha: f64,
    pub noise_dbm: f64,
    pub gamma_min: f64,
    pub vmax_mps: f64,
    pub t_s: f64,
    pub n_slots: usize,
    pub q_i: [f64; 2],
    pub q_f: [f64; 2],
    #[serde(default)]
    pub budget_norm: BudgetNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub x: f64,
    pub y: f64,
    pub p_ave_dbm: f64,
}

/// Validated problem instance in linear SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub sensors: Vec<SensorSite>,
    /// UAV altitude `H`, meters.
    pub altitude: f64,
    /// Channel power gain at 1 m (linear).
    pub ref_gain: f64,
    pub path_loss_exp: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
    /// Linear SNR threshold.
    pub snr_threshold: f64,
    pub v_max: f64,
    pub duration: f64,
    pub start: Point,
    pub finish: Point,
    pub slots: usize,
    pub budget_norm: BudgetNorm,
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let sensors = cfg
            .sensors
            .iter()
            .enumerate()
            .map(|(i, s)| SensorSite {
                id: i + 1,
                position: Point::new(s.x, s.y),
                avg_power_budget: dbm_to_watts(s.p_ave_dbm),
            })
            .collect();
        Scenario {
            sensors,
            altitude: cfg.h_m,
            ref_gain: db_to_linear(cfg.beta0_db),
            path_loss_exp: cfg.alpha,
            noise_power: dbm_to_watts(cfg.noise_dbm),
            snr_threshold: cfg.gamma_min,
            v_max: cfg.vmax_mps,
            duration: cfg.t_s,
            start: cfg.q_i.into(),
            finish: cfg.q_f.into(),
            slots: cfg.n_slots,
            budget_norm: cfg.budget_norm,
        }
        .validated()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_config(&cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Inverse of [`Scenario::from_config`].
    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            sensors: self
                .sensors
                .iter()
                .map(|s| SensorConfig {
                    x: s.position.x,
                    y: s.position.y,
                    p_ave_dbm: watts_to_dbm(s.avg_power_budget),
                })
                .collect(),
            h_m: self.altitude,
            beta0_db: linear_to_db(self.ref_gain),
            alpha: self.path_loss_exp,
            noise_dbm: watts_to_dbm(self.noise_power),
            gamma_min: self.snr_threshold,
            vmax_mps: self.v_max,
            t_s: self.duration,
            n_slots: self.slots,
            q_i: self.start.into(),
            q_f: self.finish.into(),
            budget_norm: self.budget_norm,
        }
    }

    /// Checks every type invariant and returns `self` on success.
    pub fn validated(self) -> Result<Self> {
        if self.sensors.is_empty() {
            return Err(Error::field("sensors", "at least one sensor is required"));
        }
        for (i, s) in self.sensors.iter().enumerate() {
            if s.id != i + 1 {
                return Err(Error::field("sensors", format!("sensor ids must be 1..K, got {} at {}", s.id, i)));
            }
            if !s.position.is_finite() {
                return Err(Error::field("sensors", format!("sensor {} has a non-finite position", s.id)));
            }
            if !(s.avg_power_budget >= 0.0 && s.avg_power_budget.is_finite()) {
                return Err(Error::field("p_ave_dbm", format!("sensor {} budget must be finite and non-negative", s.id)));
            }
        }
        positive("h_m", self.altitude)?;
        positive("beta0_db", self.ref_gain)?;
        positive("noise_dbm", self.noise_power)?;
        positive("vmax_mps", self.v_max)?;
        positive("t_s", self.duration)?;
        if !(self.path_loss_exp >= 2.0 && self.path_loss_exp.is_finite()) {
            return Err(Error::field("alpha", format!("path-loss exponent must be >= 2, got {}", self.path_loss_exp)));
        }
        if !(self.snr_threshold >= 0.0 && self.snr_threshold.is_finite()) {
            return Err(Error::field("gamma_min", format!("must be finite and non-negative, got {}", self.snr_threshold)));
        }
        if self.slots == 0 {
            return Err(Error::field("n_slots", "must be a positive integer"));
        }
        if !self.start.is_finite() {
            return Err(Error::field("q_i", "non-finite coordinate"));
        }
        if !self.finish.is_finite() {
            return Err(Error::field("q_f", "non-finite coordinate"));
        }
        let t_min = self.min_flight_time();
        if self.duration < t_min * (1.0 - FEAS_REL_TOL) {
            return Err(Error::field(
                "t_s",
                format!("duration {} s is below the flight-time bound {} s", self.duration, t_min),
            ));
        }
        Ok(self)
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Slot length `δ = T / N`.
    pub fn slot_length(&self) -> f64 {
        self.duration / self.slots as f64
    }

    /// Maximum displacement per slot, `V_max δ`.
    pub fn max_step(&self) -> f64 {
        self.v_max * self.slot_length()
    }

    /// Shortest possible flight time from `q_I` to `q_F`.
    pub fn min_flight_time(&self) -> f64 {
        self.start.dist(self.finish) / self.v_max
    }

    pub fn budgets(&self) -> Vec<f64> {
        self.sensors.iter().map(|s| s.avg_power_budget).collect()
    }

    /// Copy with a new mission duration.
    pub fn with_duration(&self, t_s: f64) -> Result<Self> {
        Scenario { duration: t_s, ..self.clone() }.validated()
    }

    pub fn with_slots(&self, n: usize) -> Result<Self> {
        Scenario { slots: n, ..self.clone() }.validated()
    }

    /// Copy with every sensor's budget set to `p_ave_dbm`.
    pub fn with_uniform_budget_dbm(&self, p_ave_dbm: f64) -> Result<Self> {
        self.with_uniform_budget(dbm_to_watts(p_ave_dbm))
    }

    pub fn with_uniform_budget(&self, watts: f64) -> Result<Self> {
        let mut s = self.clone();
        for sensor in &mut s.sensors {
            sensor.avg_power_budget = watts;
        }
        s.validated()
    }

    pub fn with_snr_threshold(&self, gamma: f64) -> Result<Self> {
        Scenario { snr_threshold: gamma, ..self.clone() }.validated()
    }

    pub fn with_budget_norm(&self, norm: BudgetNorm) -> Self {
        Scenario { budget_norm: norm, ..self.clone() }
    }

    /// Axis-aligned bounding box of all sensors: `(min, max)` corners.
    pub fn sensor_bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in &self.sensors {
            lo.x = lo.x.min(s.position.x);
            lo.y = lo.y.min(s.position.y);
            hi.x = hi.x.max(s.position.x);
            hi.y = hi.y.max(s.position.y);
        }
        (lo, hi)
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::field(field, format!("must be finite and positive, got {v}")))
    }
}

/// UAV waypoints `q[0..=N]` at fixed altitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Point>,
    pub slot_length: f64,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Point>, slot_length: f64) -> Self {
        Trajectory { waypoints, slot_length }
    }

    /// Constant-speed straight flight from `q_I` to `q_F`.
    pub fn direct(s: &Scenario) -> Self {
        let n = s.slots;
        let waypoints = (0..=n).map(|i| s.start.lerp(s.finish, i as f64 / n as f64)).collect();
        Trajectory::new(waypoints, s.slot_length())
    }

    /// Number of slots `N`.
    pub fn slots(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    /// Location used during slot `n` (0-based), i.e. `q[n + 1]`.
    pub fn slot_point(&self, n: usize) -> Point {
        self.waypoints[n + 1]
    }

    pub fn slot_points(&self) -> &[Point] {
        &self.waypoints[1..]
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// Transmit powers `P_k[n]`, indexed `[sensor][slot]`, watts.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSchedule {
    pub powers: Vec<Vec<f64>>,
}

impl PowerSchedule {
    pub fn zeros(k: usize, n: usize) -> Self {
        PowerSchedule { powers: vec![vec![0.0; n]; k] }
    }

    /// Every sensor transmits at its average budget in every slot.
    pub fn uniform(s: &Scenario) -> Self {
        PowerSchedule {
            powers: s.sensors.iter().map(|x| vec![x.avg_power_budget; s.slots]).collect(),
        }
    }

    pub fn num_sensors(&self) -> usize {
        self.powers.len()
    }

    pub fn slots(&self) -> usize {
        self.powers.first().map_or(0, Vec::len)
    }

    /// Per-sensor powers in slot `n`.
    pub fn slot(&self, n: usize) -> Vec<f64> {
        self.powers.iter().map(|row| row[n]).collect()
    }

    pub fn mean_power(&self, k: usize) -> f64 {
        let row = &self.powers[k];
        row.iter().sum::<f64>() / row.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Speed constraint on the move `q[slot-1] -> q[slot]` (1-based slot).
    Speed { slot: usize },
    Start,
    Finish,
    /// Average power of the 1-based sensor id.
    AveragePower { sensor: usize },
}

/// Signed constraint residual: `value <= 0` means satisfied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub kind: ConstraintKind,
    pub value: f64,
    pub tol: f64,
}

impl Residual {
    pub fn violated(&self) -> bool {
        self.value > self.tol
    }
}

/// Residuals for every speed, endpoint and average-power constraint.
pub fn validate_plan(s: &Scenario, tr: &Trajectory, ps: &PowerSchedule) -> Result<Vec<Residual>> {
    check_dims(s, tr, ps)?;
    let mut out = Vec::with_capacity(s.slots + 2 + s.num_sensors());
    let step = s.max_step();
    for (i, w) in tr.waypoints.windows(2).enumerate() {
        out.push(Residual {
            kind: ConstraintKind::Speed { slot: i + 1 },
            value: w[0].dist(w[1]) - step,
            tol: feas_tol(step),
        });
    }
    let pos_scale = s.start.norm().max(s.finish.norm()).max(step);
    out.push(Residual {
        kind: ConstraintKind::Start,
        value: tr.waypoints[0].dist(s.start),
        tol: feas_tol(pos_scale),
    });
    out.push(Residual {
        kind: ConstraintKind::Finish,
        value: tr.waypoints[s.slots].dist(s.finish),
        tol: feas_tol(pos_scale),
    });
    for (k, sensor) in s.sensors.iter().enumerate() {
        out.push(Residual {
            kind: ConstraintKind::AveragePower { sensor: sensor.id },
            value: ps.mean_power(k) - sensor.avg_power_budget,
            tol: feas_tol(sensor.avg_power_budget),
        });
    }
    // negative powers are infeasible outright
    if let Some((k, _)) = ps
        .powers
        .iter()
        .enumerate()
        .find(|(_, row)| row.iter().any(|&p| !(p >= 0.0)))
    {
        out.push(Residual {
            kind: ConstraintKind::AveragePower { sensor: k + 1 },
            value: f64::INFINITY,
            tol: 0.0,
        });
    }
    Ok(out)
}

/// Residuals that exceed their tolerance.
pub fn plan_violations(s: &Scenario, tr: &Trajectory, ps: &PowerSchedule) -> Result<Vec<Residual>> {
    Ok(validate_plan(s, tr, ps)?.into_iter().filter(Residual::violated).collect())
}

pub(crate) fn check_dims(s: &Scenario, tr: &Trajectory, ps: &PowerSchedule) -> Result<()> {
    if tr.waypoints.len() != s.slots + 1 {
        return Err(Error::Dimension(format!(
            "trajectory has {} waypoints, expected {}",
            tr.waypoints.len(),
            s.slots + 1
        )));
    }
    if ps.num_sensors() != s.num_sensors() {
        return Err(Error::Dimension(format!(
            "power schedule has {} sensors, expected {}",
            ps.num_sensors(),
            s.num_sensors()
        )));
    }
    if ps.powers.iter().any(|row| row.len() != s.slots) {
        return Err(Error::Dimension(format!("power schedule rows must have {} slots", s.slots)));
    }
    Ok(())
}

/// The ten-sensor layout used throughout the numerical study, with every
/// budget at `p_ave_dbm`.
pub fn reference_layout_config(p_ave_dbm: f64, t_s: f64, n_slots: usize) -> ScenarioConfig {
    const SITES: [(f64, f64); 10] = [
        (20.0, 10.0),
        (30.0, 28.0),
        (46.0, 0.0),
        (56.0, 24.0),
        (94.0, 168.0),
        (100.0, 200.0),
        (112.0, 176.0),
        (162.0, 0.0),
        (178.0, 40.0),
        (200.0, 6.0),
    ];
    ScenarioConfig {
        sensors: SITES.iter().map(|&(x, y)| SensorConfig { x, y, p_ave_dbm }).collect(),
        h_m: 50.0,
        beta0_db: -30.0,
        alpha: 2.8,
        noise_dbm: -60.0,
        gamma_min: 550.0,
        vmax_mps: 40.0,
        t_s,
        n_slots,
        q_i: [0.0, 0.0],
        q_f: [200.0, 200.0],
        budget_norm: BudgetNorm::Horizon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> Scenario {
        Scenario::from_config(&reference_layout_config(30.0, 20.0, 128)).unwrap()
    }

    #[test]
    fn db_conversions() {
        assert_relative_eq!(db_to_linear(-30.0), 1.0e-3, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(-60.0), 1.0e-9, max_relative = 1e-12);
        assert_eq!(db_to_linear(0.0), 1.0);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn reference_instance_units() {
        let s = reference();
        assert_relative_eq!(s.ref_gain, 1e-3, max_relative = 1e-12);
        assert_relative_eq!(s.noise_power, 1e-9, max_relative = 1e-12);
        assert_eq!(s.num_sensors(), 10);
        assert_eq!(s.sensors[9].id, 10);
    }

    #[test]
    fn rejects_bad_fields() {
        let mut cfg = reference_layout_config(30.0, 20.0, 16);
        cfg.sensors.clear();
        assert!(matches!(Scenario::from_config(&cfg), Err(Error::InvalidField { field: "sensors", .. })));

        let mut cfg = reference_layout_config(30.0, 20.0, 16);
        cfg.h_m = 0.0;
        assert!(matches!(Scenario::from_config(&cfg), Err(Error::InvalidField { field: "h_m", .. })));

        let mut cfg = reference_layout_config(30.0, 20.0, 16);
        cfg.alpha = 1.5;
        assert!(matches!(Scenario::from_config(&cfg), Err(Error::InvalidField { field: "alpha", .. })));

        // 282.8 m at 40 m/s needs 7.07 s
        let cfg = reference_layout_config(30.0, 7.0, 16);
        assert!(matches!(Scenario::from_config(&cfg), Err(Error::InvalidField { field: "t_s", .. })));

        let mut cfg = reference_layout_config(30.0, 20.0, 16);
        cfg.n_slots = 0;
        assert!(matches!(Scenario::from_config(&cfg), Err(Error::InvalidField { field: "n_slots", .. })));
    }

    #[test]
    fn schema_errors_are_reported() {
        let err = Scenario::from_json_str(r#"{"sensors": []}"#).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        let err = Scenario::from_json_str(r#"{"sensors": [], "bogus": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn stationary_zero_plan_is_feasible() {
        let mut cfg = reference_layout_config(30.0, 20.0, 8);
        cfg.q_f = cfg.q_i;
        let s = Scenario::from_config(&cfg).unwrap();
        let tr = Trajectory::new(vec![s.start; 9], s.slot_length());
        let ps = PowerSchedule::zeros(10, 8);
        let res = validate_plan(&s, &tr, &ps).unwrap();
        assert!(res.iter().all(|r| r.value <= 0.0));
    }

    #[test]
    fn oversized_jump_is_flagged() {
        let s = Scenario::from_config(&reference_layout_config(30.0, 20.0, 16)).unwrap();
        let mut tr = Trajectory::direct(&s);
        // move waypoint 1 so that the first hop is 1.5 V_max δ
        let dir = (s.finish - s.start) * (1.0 / s.start.dist(s.finish));
        tr.waypoints[1] = s.start + dir * (1.5 * s.max_step());
        let v = plan_violations(&s, &tr, &PowerSchedule::zeros(10, 16)).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ConstraintKind::Speed { slot: 1 });
    }

    #[test]
    fn direct_flight_reference_setup_is_feasible() {
        let s = reference();
        // 200√2 / 20 ≈ 14.14 m/s, well under 40 m/s
        assert_relative_eq!(s.start.dist(s.finish) / s.duration, 14.142135623730951, max_relative = 1e-12);
        let tr = Trajectory::direct(&s);
        let ps = PowerSchedule::uniform(&s);
        assert!(plan_violations(&s, &tr, &ps).unwrap().is_empty());
    }

    #[test]
    fn budget_violation_and_dimension_mismatch() {
        let s = Scenario::from_config(&reference_layout_config(30.0, 20.0, 4)).unwrap();
        let tr = Trajectory::direct(&s);
        let mut ps = PowerSchedule::uniform(&s);
        ps.powers[3][0] *= 2.0;
        let v = plan_violations(&s, &tr, &ps).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ConstraintKind::AveragePower { sensor: 4 });
        assert!(matches!(validate_plan(&s, &tr, &PowerSchedule::zeros(10, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn config_round_trip() {
        let s = reference();
        let back = Scenario::from_config(&s.to_config()).unwrap();
        for (a, b) in s.sensors.iter().zip(&back.sensors) {
            assert_relative_eq!(a.avg_power_budget, b.avg_power_budget, max_relative = 1e-12);
        }
        assert_relative_eq!(s.noise_power, back.noise_power, max_relative = 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn linear_db_round_trip(x in 1e-15f64..1e15) {
            let back = db_to_linear(linear_to_db(x));
            proptest::prop_assert!(((back - x) / x).abs() <= 1e-12);
            let back = dbm_to_watts(watts_to_dbm(x));
            proptest::prop_assert!(((back - x) / x).abs() <= 1e-12);
        }
    }
}
