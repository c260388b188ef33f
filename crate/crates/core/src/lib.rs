//! Joint UAV trajectory and sensor power planning for minimizing the
//! transmission outage probability of a distributed-beamforming uplink.
//!
//! The crate is organized bottom-up:
//!
//! - [`scenario`]: problem instance, plans, unit conversions, plan validation
//! - [`channel`]: LoS channel, coherent SNR, outage accounting
//! - [`convex`]: simplex LP, log-barrier Newton, monotone bisection
//! - [`relaxed`]: dual/time-sharing optimum without speed limits
//! - [`sca`]: alternating successive convex approximation for finite missions
//! - [`recovery`]: on-off power recovery over the highest-SNR slots
//! - [`benchmarks`]: fly-hover-fly, power-only and trajectory-only baselines
//! - [`cli`]: batch front end and artifact writers

pub mod benchmarks;
pub mod cli;
pub mod channel;
pub mod convex;
pub mod error;
pub mod io;
pub mod recovery;
pub mod relaxed;
pub mod sca;
pub mod scenario;

pub use error::{Error, Result};
