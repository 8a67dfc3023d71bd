//! Brute-force benchmark: enumerate duration lattices and keep the best
//! feasible point. Global within its grid by construction, and priced
//! accordingly, so it is capped at three devices and ten million points.

use crate::aoi::aoi_value;
use crate::link::{Device, SystemParams};
use crate::solver::{
    eps_total, report_from_policy, AllocationPolicy, SolveError, SolveReport, SolverOptions,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const MAX_POINTS: u64 = 10_000_000;
const MAX_DEVICES: usize = 3;

/// Search lattice: charge values `m_c_min, m_c_min + m_c_step, ..` up to
/// `m_c_max`, and one slot axis shared by all devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m_c_min: f64,
    pub m_c_max: f64,
    pub m_c_step: f64,
    pub m_r_min: f64,
    pub m_r_max: f64,
    pub m_r_step: f64,
}

impl GridSpec {
    /// Whole-symbol lattice from zero charge and one-symbol slots.
    pub fn integers(m_c_max: f64, m_r_max: f64) -> Self {
        Self {
            m_c_min: 0.0,
            m_c_max,
            m_c_step: 1.0,
            m_r_min: 1.0,
            m_r_max,
            m_r_step: 1.0,
        }
    }
}

fn axis(min: f64, max: f64, step: f64) -> Result<Vec<f64>, SolveError> {
    if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
        return Err(SolveError::BadInput(format!(
            "bad grid axis: min {min}, max {max}, step {step}"
        )));
    }
    let n = ((max - min) / step).floor() as usize + 1;
    Ok((0..n).map(|k| min + k as f64 * step).collect())
}

/// Worst-device age of one lattice point, `None` when any device misses
/// the SNR or error thresholds.
fn eval_point(params: &SystemParams, devices: &[Device], m_c: f64, mrs: &[f64]) -> Option<f64> {
    let m: f64 = m_c + mrs.iter().sum::<f64>();
    let mut worst = 0.0f64;
    for (dev, &mr) in devices.iter().zip(mrs) {
        let mc_i = m - mr;
        if dev.gain * mc_i / mr < params.gamma_th {
            return None;
        }
        let eps = eps_total(dev.gain, mc_i, mr, params.d_bits);
        if eps > params.eps_max {
            return None;
        }
        worst = worst.max(aoi_value(m, eps));
    }
    Some(worst)
}

/// Best slot combination for one charge value, scanned in lexicographic
/// order with strict improvement, so ties resolve to the smallest point.
fn best_for_charge(
    params: &SystemParams,
    devices: &[Device],
    m_c: f64,
    rvals: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let i_n = devices.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut combo = vec![rvals[0]; i_n];
    let mut idx = vec![0usize; i_n];
    loop {
        if let Some(v) = eval_point(params, devices, m_c, &combo) {
            if best.as_ref().map_or(true, |(b, _)| v < *b) {
                best = Some((v, combo.clone()));
            }
        }
        // odometer, last axis fastest
        let mut dim = i_n;
        loop {
            if dim == 0 {
                return best;
            }
            dim -= 1;
            idx[dim] += 1;
            if idx[dim] < rvals.len() {
                combo[dim] = rvals[idx[dim]];
                break;
            }
            idx[dim] = 0;
            combo[dim] = rvals[0];
        }
    }
}

/// Enumerates the full lattice and returns the feasible point with the
/// lowest worst-device age. Deterministic under any thread count: charge
/// values are scanned in order and ties keep the lexicographically
/// smallest point.
pub fn exhaustive_search(
    params: &SystemParams,
    devices: &[Device],
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<SolveReport, SolveError> {
    params.validate()?;
    if devices.is_empty() {
        return Err(SolveError::BadInput("device list is empty".into()));
    }
    if devices.len() > MAX_DEVICES {
        return Err(SolveError::TooManyDevices { count: devices.len(), limit: MAX_DEVICES });
    }
    let cvals = axis(grid.m_c_min, grid.m_c_max, grid.m_c_step)?;
    let rvals = axis(grid.m_r_min, grid.m_r_max, grid.m_r_step)?;
    let points = cvals.len() as u128 * (rvals.len() as u128).pow(devices.len() as u32);
    if points > u128::from(MAX_POINTS) {
        return Err(SolveError::GridTooLarge { points, limit: MAX_POINTS });
    }

    let per_charge: Vec<Option<(f64, Vec<f64>)>> = cvals
        .par_iter()
        .map(|&m_c| best_for_charge(params, devices, m_c, &rvals))
        .collect();

    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for (ci, entry) in per_charge.into_iter().enumerate() {
        if let Some((v, combo)) = entry {
            if best.as_ref().map_or(true, |(b, _, _)| v < *b) {
                best = Some((v, cvals[ci], combo));
            }
        }
    }
    let (_, m_c, m_r) = best.ok_or(SolveError::Infeasible)?;
    let policy = AllocationPolicy { m_c, m_r };
    Ok(report_from_policy(params, devices, policy, None, opts))
}
