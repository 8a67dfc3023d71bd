//! Monte Carlo check of the closed-form age expressions, plus the brute
//! force and capacity-threshold baselines.
//!
//! The decode process is Bernoulli per round, so the age sawtooth is
//! integrated in closed form round by round: if a device enters a round
//! with post-decision age `a`, the round contributes area `a*M + M^2/2`,
//! and the decision at its end either resets `a` to `M` (success) or adds
//! `M` (failure). No per-symbol stepping is involved. Ages are anchored at
//! the delivery instants; the stationary time average does not depend on
//! where inside the round each device's slot sits, which is also why the
//! estimator is bit-identical under global start shifts and device
//! reorderings (the random streams are keyed by device id, not position).

mod exhaustive;
mod ibl;

pub use exhaustive::{exhaustive_search, GridSpec};
pub use ibl::ibl_baseline;

use crate::cluster::{validate_schedule, ScheduleViolation, TimeSchedule};
use crate::link::{Device, SystemParams};
use crate::solver::eps_total;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rounds discarded before accumulation starts, so the arbitrary initial
/// age cannot bias finite runs.
pub const WARMUP_ROUNDS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub rounds: u64,
    pub seed: u64,
    /// Time units per symbol; durations are scaled by it before
    /// integration, results stay in symbols when it is 1.
    pub time_resolution: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { rounds: 100_000, seed: 42, time_resolution: 1.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("need more than {warmup} rounds to measure anything, got {rounds}")]
    TooFewRounds { rounds: u64, warmup: u64 },
    #[error("schedule failed validation: {0:?}")]
    InvalidSchedule(Vec<ScheduleViolation>),
    #[error("time resolution must be positive and finite, got {0}")]
    BadResolution(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceSim {
    pub time_avg_aoi: f64,
    pub success_rate: f64,
    /// Batch-means standard error of the age estimate.
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub per_device: Vec<DeviceSim>,
}

impl SimResult {
    pub fn max_aoi(&self) -> f64 {
        self.per_device
            .iter()
            .fold(0.0f64, |a, d| a.max(d.time_avg_aoi))
    }
}

/// One device's chain: warm up, then accumulate exact per-round sawtooth
/// areas into equal batches for the standard error.
fn run_device(round_len: f64, eps: f64, stream: u64, cfg: &SimConfig) -> DeviceSim {
    let m = round_len * cfg.time_resolution;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let p_success = 1.0 - eps;

    let mut age = m;
    for _ in 0..WARMUP_ROUNDS {
        let u: f64 = rng.random();
        age = if u < p_success { m } else { age + m };
    }

    let counted = cfg.rounds - WARMUP_ROUNDS;
    let n_batches = counted.min(100).max(1);
    let batch = counted / n_batches;
    let mut means = Vec::with_capacity(n_batches as usize);
    let mut successes = 0u64;
    let mut trials = 0u64;
    for _ in 0..n_batches {
        let mut area = 0.0f64;
        for _ in 0..batch {
            area += age * m + 0.5 * m * m;
            let u: f64 = rng.random();
            if u < p_success {
                age = m;
                successes += 1;
            } else {
                age += m;
            }
            trials += 1;
        }
        means.push(area / (batch as f64 * m));
    }

    let nb = means.len() as f64;
    let avg = means.iter().sum::<f64>() / nb;
    let std_err = if means.len() > 1 {
        let var = means.iter().map(|x| (x - avg) * (x - avg)).sum::<f64>() / (nb - 1.0);
        (var / nb).sqrt()
    } else {
        0.0
    };
    DeviceSim {
        time_avg_aoi: avg,
        success_rate: successes as f64 / trials as f64,
        std_err,
    }
}

/// Replays a validated integer schedule: per-device decode probabilities
/// come from the durations the schedule implies, the Bernoulli chains use
/// one named random stream per device id.
pub fn simulate(
    schedule: &TimeSchedule,
    devices: &[Device],
    params: &SystemParams,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    if !(cfg.time_resolution > 0.0 && cfg.time_resolution.is_finite()) {
        return Err(SimError::BadResolution(cfg.time_resolution));
    }
    if cfg.rounds <= WARMUP_ROUNDS {
        return Err(SimError::TooFewRounds { rounds: cfg.rounds, warmup: WARMUP_ROUNDS });
    }
    let v = validate_schedule(schedule, params, devices);
    if !v.pass {
        return Err(SimError::InvalidSchedule(v.violations));
    }

    let m = schedule.round_len as f64;
    let eps_of: Vec<f64> = devices
        .iter()
        .enumerate()
        .map(|(i, dev)| {
            let m_r = schedule
                .slots
                .iter()
                .find(|s| s.device == i)
                .expect("validated schedule has one slot per device")
                .len as f64;
            eps_total(dev.gain, m - m_r, m_r, params.d_bits)
        })
        .collect();

    let per_device: Vec<DeviceSim> = devices
        .par_iter()
        .zip(eps_of.par_iter())
        .map(|(dev, &eps)| run_device(m, eps, dev.id as u64 + 1, cfg))
        .collect();
    Ok(SimResult { per_device })
}
