//! Capacity-threshold baseline: size every slot so that Shannon capacity
//! exactly meets the payload rate, ignoring the short-packet penalty.
//!
//! Each device's slot is the smaller root of
//! `log2(1 + z_i (M - m_r)/m_r) = d / m_r`, and the round length couples
//! the devices: it must cover every slot's existence threshold and the
//! slots themselves. That coupled system is solved by damped fixed-point
//! iteration. The returned report evaluates the allocation with the real
//! short-packet error model, where a capacity-tight slot decodes with
//! probability one half, which is exactly what makes this baseline weak.

use crate::fbl::shannon_capacity;
use crate::link::{Device, SystemParams};
use crate::scalar::{bisect_root, golden_min};
use crate::solver::{
    report_from_policy, AllocationPolicy, SolveError, SolveReport, SolverOptions,
};

const MAX_FIXED_POINT_ITERS: u32 = 1000;

/// Capacity margin of a slot: positive when the payload fits at Shannon
/// capacity.
fn margin(gain: f64, d_bits: f64, m_total: f64, m_r: f64) -> f64 {
    shannon_capacity(gain * (m_total - m_r) / m_r) - d_bits / m_r
}

/// Slot length maximizing the capacity margin at a given round length.
fn peak(gain: f64, d_bits: f64, m_total: f64) -> (f64, f64) {
    let lo = m_total * 1e-9;
    let hi = m_total * (1.0 - 1e-9);
    let (r, neg) = golden_min(|m_r| -margin(gain, d_bits, m_total, m_r), lo, hi, 1e-10);
    (r, -neg)
}

/// Shortest decodable slot at this round length; requires the peak margin
/// to be nonnegative.
fn left_root(gain: f64, d_bits: f64, m_total: f64, peak_r: f64) -> f64 {
    bisect_root(
        |m_r| margin(gain, d_bits, m_total, m_r),
        m_total * 1e-9,
        peak_r,
        200,
    )
}

/// Smallest round length at which the device can decode at all: where the
/// best slot's margin touches zero.
fn existence_threshold(
    gain: f64,
    d_bits: f64,
    max_round: f64,
) -> Result<f64, SolveError> {
    let mut hi = d_bits.max(2.0);
    while peak(gain, d_bits, hi).1 <= 0.0 {
        hi *= 2.0;
        if hi > max_round {
            return Err(SolveError::Infeasible);
        }
    }
    let mut lo = hi / 2.0;
    while peak(gain, d_bits, lo).1 > 0.0 {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-9 {
            return Ok(lo);
        }
    }
    Ok(bisect_root(|m| peak(gain, d_bits, m).1, lo, hi, 120))
}

pub fn ibl_baseline(
    params: &SystemParams,
    devices: &[Device],
    opts: &SolverOptions,
) -> Result<SolveReport, SolveError> {
    params.validate()?;
    if devices.is_empty() {
        return Err(SolveError::BadInput("device list is empty".into()));
    }
    let d = f64::from(params.d_bits);

    let mut floor = 0.0f64;
    for dev in devices {
        floor = floor.max(existence_threshold(dev.gain, d, opts.max_round)?);
    }
    let floor = floor * (1.0 + 1e-9);

    let slots_at = |m: f64| -> Vec<f64> {
        devices
            .iter()
            .map(|dev| left_root(dev.gain, d, m, peak(dev.gain, d, m).0))
            .collect()
    };

    let mut m = floor;
    let mut converged = false;
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let target = floor.max(slots_at(m).iter().sum());
        if (target - m).abs() <= 1e-10 * m {
            m = target;
            converged = true;
            break;
        }
        m = 0.5 * m + 0.5 * target;
        if m > opts.max_round {
            return Err(SolveError::Infeasible);
        }
    }
    if !converged {
        return Err(SolveError::NoFixedPoint { iterations: MAX_FIXED_POINT_ITERS });
    }

    let m_r = slots_at(m);
    let m_c = (m - m_r.iter().sum::<f64>()).max(0.0);
    let policy = AllocationPolicy { m_c, m_r };
    Ok(report_from_policy(params, devices, policy, None, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_minmax;
    use approx::assert_relative_eq;

    #[test]
    fn capacity_tight_slots_decode_half_the_time() {
        let params = SystemParams::default();
        let dev = Device::from_gain(&params, 0, 0.3).unwrap();
        let r = ibl_baseline(&params, &[dev], &SolverOptions::default()).unwrap();
        for pm in &r.per_device {
            assert_relative_eq!(pm.eps, 0.5, epsilon = 1e-6);
        }
        assert_relative_eq!(r.delta_max, 2.5 * r.policy.round_len(), max_relative = 1e-6);
    }

    #[test]
    fn short_packet_aware_solver_beats_the_baseline() {
        let params = SystemParams::default();
        let opts = SolverOptions::default();
        for zs in [vec![0.3], vec![0.3, 0.6], vec![1.0, 2.0]] {
            let ds: Vec<Device> = zs
                .iter()
                .enumerate()
                .map(|(i, &z)| Device::from_gain(&params, i, z).unwrap())
                .collect();
            let ibl = ibl_baseline(&params, &ds, &opts).unwrap();
            let opt = solve_minmax(&params, &ds, &opts).unwrap();
            assert!(
                ibl.delta_max > opt.delta_max,
                "{zs:?}: baseline {} vs solver {}",
                ibl.delta_max,
                opt.delta_max
            );
        }
    }

    #[test]
    fn weaker_channels_need_longer_baseline_rounds() {
        let params = SystemParams::default();
        let opts = SolverOptions::default();
        let len_at = |z: f64| {
            let dev = Device::from_gain(&params, 0, z).unwrap();
            ibl_baseline(&params, &[dev], &opts)
                .unwrap()
                .policy
                .round_len()
        };
        assert!(len_at(0.1) > len_at(0.3));
        assert!(len_at(0.3) > len_at(1.0));
    }
}
