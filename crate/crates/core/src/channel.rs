//! Line-of-sight channel, coherent-combining SNR and outage accounting.
//!
//! Transmit phases are assumed to cancel the channel phases exactly, so the
//! received amplitudes add coherently and the SNR is deterministic.

use crate::error::Result;
use crate::scenario::{check_dims, Point, PowerSchedule, Scenario, SensorSite, Trajectory};

/// Non-negative linear SNR.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SnrValue(f64);

impl SnrValue {
    pub fn new(v: f64) -> Self {
        debug_assert!(v >= 0.0 && v.is_finite(), "SNR must be finite and non-negative, got {v}");
        SnrValue(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// UAV-to-sensor distance `sqrt(|q - S_k|^2 + H^2)`.
pub fn distance(q: Point, s: &SensorSite, h: f64) -> f64 {
    (q.dist_sq(s.position) + h * h).sqrt()
}

/// Channel power gain `β₀ d^{-α}` between `q` and sensor `k` (0-based).
pub fn channel_gain(q: Point, k: usize, s: &Scenario) -> f64 {
    let d2 = q.dist_sq(s.sensors[k].position) + s.altitude * s.altitude;
    s.ref_gain * d2.powf(-0.5 * s.path_loss_exp)
}

/// Gains for every sensor at `q`.
pub fn channel_gains(q: Point, s: &Scenario) -> Vec<f64> {
    (0..s.num_sensors()).map(|k| channel_gain(q, k, s)).collect()
}

/// Received amplitude sum `Σ_k sqrt(P_k g_k)`.
pub fn amplitude_sum(powers: &[f64], gains: &[f64]) -> f64 {
    powers.iter().zip(gains).map(|(&p, &g)| (p.max(0.0) * g).sqrt()).sum()
}

/// Received SNR at `q` under per-sensor powers `p` (watts).
pub fn snr(q: Point, p: &[f64], s: &Scenario) -> SnrValue {
    debug_assert_eq!(p.len(), s.num_sensors());
    let gains = channel_gains(q, s);
    snr_from_gains(p, &gains, s.noise_power)
}

pub fn snr_from_gains(p: &[f64], gains: &[f64], noise_power: f64) -> SnrValue {
    let a = amplitude_sum(p, gains);
    SnrValue::new(a * a / noise_power)
}

/// 1 when the link is in outage (`snr < γ`), 0 otherwise.
pub fn outage_indicator(v: SnrValue, gamma: f64) -> u8 {
    u8::from(v.value() < gamma)
}

/// Per-slot SNR of a discretized plan.
pub fn slot_snrs(tr: &Trajectory, ps: &PowerSchedule, s: &Scenario) -> Result<Vec<SnrValue>> {
    check_dims(s, tr, ps)?;
    Ok((0..s.slots).map(|n| snr(tr.slot_point(n), &ps.slot(n), s)).collect())
}

/// Fraction of slots in outage.
pub fn outage_probability(tr: &Trajectory, ps: &PowerSchedule, s: &Scenario) -> Result<f64> {
    let snrs = slot_snrs(tr, ps, s)?;
    let count: usize = snrs
        .iter()
        .map(|&v| usize::from(outage_indicator(v, s.snr_threshold)))
        .sum();
    Ok(count as f64 / s.slots as f64)
}
