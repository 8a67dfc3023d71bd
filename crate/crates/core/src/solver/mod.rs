//! Round-length and duration optimizers.
//!
//! A cluster round lasts `M = m_c + sum(m_r_i)` symbols: one shared charge
//! interval, then one update slot per device. Device `i` therefore charges
//! for `M - m_r_i` symbols (everyone else's slots included) and its age is
//! `M * (1/2 + 1/(1 - eps_i))`, so the knobs trade round length against
//! decode reliability.
//!
//! Three solvers ship:
//! - [`solve_single`]: one device, free `(m_c, m_r)`; nested scan-and-refine
//!   over the two durations.
//! - [`solve_fixed_round`]: one device inside a round of fixed length; 1-D.
//! - [`solve_minmax`]: whole cluster, minimizes the worst device's age by
//!   bisecting the age level over a log-barrier feasibility solver (in
//!   [`barrier`]).
//!
//! The objective is quasi-convex rather than convex, which is why the
//! min-max solver works on level sets: for a fixed age level `delta` the
//! constraint `M - delta * 2(1 - eps)/(3 - eps) <= 0` is convex wherever
//! the error surface is.

mod barrier;

pub use barrier::solve_minmax;

use crate::aoi::aoi_value;
use crate::fbl::{self, FblError, FblPoint, EPS_FLOOR};
use crate::link::{Device, SystemParams};
use crate::scalar::{argmin, golden_min, log_grid};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("no allocation satisfies the constraints")]
    Infeasible,
    #[error("cluster is saturated and device {device} cannot meet the thresholds in the stretched round")]
    InfeasibleSaturated { device: usize },
    #[error("round-length fixed point did not converge within {iterations} iterations")]
    NoFixedPoint { iterations: u32 },
    #[error("grid has {points} points, limit is {limit}")]
    GridTooLarge { points: u128, limit: u64 },
    #[error("exhaustive search supports at most {limit} devices, got {count}")]
    TooManyDevices { count: usize, limit: usize },
    #[error("invalid input: {0}")]
    BadInput(String),
}

impl From<crate::link::LinkError> for SolveError {
    fn from(e: crate::link::LinkError) -> Self {
        SolveError::BadInput(e.to_string())
    }
}

/// Durations of one cluster round: a shared charge interval and one update
/// slot per device, in device order. Device `i`'s own charge time is
/// `round_len() - m_r[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPolicy {
    pub m_c: f64,
    pub m_r: Vec<f64>,
}

impl AllocationPolicy {
    pub fn round_len(&self) -> f64 {
        self.m_c + self.m_r.iter().sum::<f64>()
    }

    /// Charge duration seen by device `i`: everything but its own slot.
    pub fn device_charge(&self, i: usize) -> f64 {
        self.round_len() - self.m_r[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub gamma: f64,
    pub eps: f64,
    pub avg_aoi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// A solution was found but sits outside the certified-convex region,
    /// so global optimality is not guaranteed.
    ConditionViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub policy: AllocationPolicy,
    /// Worst per-device average age, symbols.
    pub delta_max: f64,
    pub per_device: Vec<DeviceMetrics>,
    /// True when the common charge interval has collapsed (below one
    /// symbol): the round is pure back-to-back updates.
    pub saturated: bool,
    pub status: SolveStatus,
    /// Device capacity of the round, when the solver derives it.
    pub capacity: Option<u64>,
}

/// One device's optimum, from [`solve_single`] or [`solve_fixed_round`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleSolution {
    pub m_c: f64,
    pub m_r: f64,
    pub gamma: f64,
    pub eps: f64,
    pub avg_aoi: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Relative width of the age-level bracket at which bisection stops.
    pub bisect_rel_tol: f64,
    /// Barrier weight floor; sets how closely active constraints are
    /// approached.
    pub barrier_mu_min: f64,
    /// Relative bracket width for 1-D golden-section refinement.
    pub golden_rel_tol: f64,
    /// Hard cap on the round length, symbols. Searches that push past it
    /// report infeasibility instead of diverging.
    pub max_round: f64,
    /// Charge intervals below this many symbols count as saturated.
    pub saturation_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            bisect_rel_tol: 1e-6,
            barrier_mu_min: 1e-9,
            golden_rel_tol: 1e-8,
            max_round: 1e7,
            saturation_threshold: 1.0,
        }
    }
}

/// Decode error probability as a total function of the raw durations.
///
/// Out-of-domain inputs (zero charge, zero gain) mean the update cannot
/// possibly decode, which the age model represents as the clamped
/// upper bound rather than an error.
pub(crate) fn eps_total(gain: f64, m_c: f64, m_r: f64, d_bits: u32) -> f64 {
    let fail = 1.0 - EPS_FLOOR;
    if !(m_r > 0.0) {
        return fail;
    }
    let gamma = gain * m_c / m_r;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return fail;
    }
    match FblPoint::new(gamma, m_r, d_bits) {
        Ok(p) => fbl::error_probability(&p).unwrap_or(fail),
        Err(_) => fail,
    }
}

/// Recomputes honest per-device metrics for a policy. The report never
/// echoes solver-internal estimates.
pub(crate) fn report_from_policy(
    params: &SystemParams,
    devices: &[Device],
    policy: AllocationPolicy,
    capacity: Option<u64>,
    opts: &SolverOptions,
) -> SolveReport {
    let m_total = policy.round_len();
    let mut per_device = Vec::with_capacity(devices.len());
    let mut delta_max = 0.0f64;
    let mut condition_ok = true;
    for (i, dev) in devices.iter().enumerate() {
        let m_r = policy.m_r[i];
        let m_c = policy.device_charge(i);
        let gamma = dev.gain * m_c / m_r;
        let eps = eps_total(dev.gain, m_c, m_r, params.d_bits);
        let avg_aoi = aoi_value(m_total, eps);
        delta_max = delta_max.max(avg_aoi);
        if let Ok(p) = FblPoint::new(gamma, m_r, params.d_bits) {
            condition_ok &= fbl::convexity_condition(&p);
        } else {
            condition_ok = false;
        }
        per_device.push(DeviceMetrics { gamma, eps, avg_aoi });
    }
    SolveReport {
        saturated: policy.m_c < opts.saturation_threshold,
        policy,
        delta_max,
        per_device,
        status: if condition_ok { SolveStatus::Optimal } else { SolveStatus::ConditionViolated },
        capacity,
    }
}

/// Analytic partial derivatives of the decode error probability with
/// respect to the device's own charge and update durations, at fixed gain.
///
/// Chain rule through `omega`: with `A = sqrt(m_r / V)`,
///
/// ```text
/// d eps / d x = -phi(omega) * d omega / d x
/// d omega / d gamma = ln2 * A * (C' - V' (C - d/m_r) / (2V))
/// d omega / d m_r   = ln2 * A * ((C - d/m_r) / (2 m_r) + d / m_r^2)   [gamma fixed]
/// ```
///
/// and `gamma = gain * m_c / m_r` couples both coordinates.
pub fn gradient_of_eps(
    params: &SystemParams,
    device: &Device,
    m_c: f64,
    m_r: f64,
) -> Result<(f64, f64), FblError> {
    let gamma = device.gain * m_c / m_r;
    let p = FblPoint::new(gamma, m_r, params.d_bits)?;
    let v = fbl::dispersion(gamma);
    if v <= 0.0 {
        return Err(FblError::DegenerateSnr(gamma));
    }
    let ln2 = std::f64::consts::LN_2;
    let c = fbl::shannon_capacity(gamma);
    let margin = c - p.rate();
    let a = (m_r / v).sqrt();
    let w = a * margin * ln2;

    let g1 = 1.0 + gamma;
    let dc = 1.0 / (g1 * ln2);
    let dv = 2.0 / (g1 * g1 * g1);
    let dw_dgamma = ln2 * a * (dc - dv * margin / (2.0 * v));
    let dw_dmr_direct = ln2 * a * (margin / (2.0 * m_r) + f64::from(p.d) / (m_r * m_r));

    // Standard normal density at omega; underflows to zero deep in the
    // clamp region, which matches the flat clamped eps.
    let phi = (-0.5 * w * w).exp() / (2.0 * std::f64::consts::PI).sqrt();

    let dgamma_dmc = device.gain / m_r;
    let dgamma_dmr = -gamma / m_r;
    let d_eps_d_mc = -phi * dw_dgamma * dgamma_dmc;
    let d_eps_d_mr = -phi * (dw_dmr_direct + dw_dgamma * dgamma_dmr);
    Ok((d_eps_d_mc, d_eps_d_mr))
}

/// Minimizes one device's average age over both durations.
///
/// Outer scan-and-refine over `m_r`, inner scan-and-refine over `m_c` with
/// the SNR and error-probability constraints folded into the search window.
pub fn solve_single(
    params: &SystemParams,
    device: &Device,
    opts: &SolverOptions,
) -> Result<SingleSolution, SolveError> {
    params.validate()?;
    let d = f64::from(params.d_bits);
    let mr_lo = (d / 40.0).max(1e-3);
    let mr_hi = (60.0 * d).min(0.5 * opts.max_round);
    if mr_hi <= mr_lo {
        return Err(SolveError::BadInput("round cap leaves no room for updates".into()));
    }

    let grid = log_grid(mr_lo, mr_hi, 240);
    let vals: Vec<f64> = grid
        .iter()
        .map(|&mr| best_charge_for(params, device, mr, opts).map_or(f64::INFINITY, |(a, _)| a))
        .collect();
    let i = argmin(&vals);
    if !vals[i].is_finite() {
        return Err(SolveError::Infeasible);
    }
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (mr_best, _) = golden_min(
        |mr| best_charge_for(params, device, mr, opts).map_or(f64::INFINITY, |(a, _)| a),
        lo,
        hi,
        opts.golden_rel_tol,
    );
    let (aoi, mc_best) = best_charge_for(params, device, mr_best, opts).ok_or(SolveError::Infeasible)?;
    if mc_best + mr_best >= 0.99 * opts.max_round {
        return Err(SolveError::Infeasible);
    }
    let gamma = device.gain * mc_best / mr_best;
    Ok(SingleSolution {
        m_c: mc_best,
        m_r: mr_best,
        gamma,
        eps: eps_total(device.gain, mc_best, mr_best, params.d_bits),
        avg_aoi: aoi,
    })
}

/// Best feasible charge duration for a fixed update duration; `None` if the
/// constraints cannot be met within the round cap.
fn best_charge_for(
    params: &SystemParams,
    device: &Device,
    m_r: f64,
    opts: &SolverOptions,
) -> Option<(f64, f64)> {
    let z = device.gain;
    let d = params.d_bits;
    let mc_cap = opts.max_round - m_r;
    let mut mc_lo = params.gamma_th * m_r / z;
    if !(mc_lo < mc_cap) {
        return None;
    }
    mc_lo = mc_lo.max(1e-300);

    // eps falls monotonically with charge; push the window start right
    // until the error constraint is satisfiable.
    let eps_target = params.eps_max * (1.0 - 1e-12);
    if eps_total(z, mc_lo, m_r, d) > eps_target {
        let mut hi = mc_lo;
        loop {
            hi *= 2.0;
            if hi >= mc_cap {
                return None;
            }
            if eps_total(z, hi, m_r, d) <= eps_target {
                break;
            }
        }
        let boundary = crate::scalar::bisect_root(
            |mc| eps_total(z, mc, m_r, d) - eps_target,
            hi / 2.0,
            hi,
            200,
        );
        mc_lo = boundary * (1.0 + 1e-12);
    }

    let aoi_of = |mc: f64| aoi_value(mc + m_r, eps_total(z, mc, m_r, d));
    let grid = log_grid(mc_lo, mc_cap, 160);
    let vals: Vec<f64> = grid.iter().map(|&mc| aoi_of(mc)).collect();
    let i = argmin(&vals);
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (mc, aoi) = golden_min(aoi_of, lo, hi, opts.golden_rel_tol);
    if mc >= 0.999 * mc_cap {
        return None;
    }
    Some((aoi, mc))
}

/// Minimizes one device's age inside a round of fixed total length, by
/// choosing its update duration. Equivalent to minimizing its error
/// probability, since the round length is no longer a variable.
pub fn solve_fixed_round(
    params: &SystemParams,
    device: &Device,
    m_total: f64,
    opts: &SolverOptions,
) -> Result<SingleSolution, SolveError> {
    params.validate()?;
    if !(m_total > 0.0 && m_total.is_finite()) {
        return Err(SolveError::BadInput(format!("round length must be positive, got {m_total}")));
    }
    let z = device.gain;
    let d = params.d_bits;
    // SNR threshold puts a ceiling on the slot share.
    let mr_hi = (z * m_total / (z + params.gamma_th)).min(m_total * (1.0 - 1e-12));
    if !(mr_hi > 0.0) {
        return Err(SolveError::Infeasible);
    }
    let mr_lo = (mr_hi * 1e-9).max(1e-9);
    let eps_of = |mr: f64| eps_total(z, m_total - mr, mr, d);

    let grid = log_grid(mr_lo, mr_hi, 320);
    let vals: Vec<f64> = grid.iter().map(|&mr| eps_of(mr)).collect();
    // Leftmost near-minimal grid point: on clamp plateaus, prefer the
    // shortest slot (leaves the most shared charge).
    let best = vals[argmin(&vals)];
    let i = vals
        .iter()
        .position(|&v| v <= best * (1.0 + 1e-12) + 1e-18)
        .unwrap_or(0);
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (mr, eps) = golden_min(eps_of, lo, hi, opts.golden_rel_tol);
    if eps > params.eps_max * (1.0 + 1e-9) {
        return Err(SolveError::Infeasible);
    }
    let m_c = m_total - mr;
    Ok(SingleSolution {
        m_c,
        m_r: mr,
        gamma: z * m_c / mr,
        eps,
        avg_aoi: aoi_value(m_total, eps),
    })
}
