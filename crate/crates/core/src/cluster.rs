//! Cluster-level scheduling: capacity analysis, the low-complexity
//! assembly heuristic, integer rounding, and time-indexed schedules.
//!
//! The capacity of a round is set by its worst device: solve that device
//! alone, and ask how many slots of its size fit into its optimal round.
//! Clusters within capacity cost nothing over the worst device's solo age;
//! past capacity the round must stretch and everyone pays.

use crate::aoi::aoi_value;
use crate::link::{Device, SystemParams};
use crate::solver::{
    eps_total, report_from_policy, solve_fixed_round, solve_single, AllocationPolicy, SolveError,
    SolveReport, SolverOptions,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack when deciding whether a ratio or duration is already an
/// integer, so solver noise does not tip a floor the wrong way.
const INT_SNAP: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("neither integer neighbor of device {device}'s update duration satisfies the constraints")]
    ConstraintBrokenByRounding { device: usize },
    #[error("integer update durations need {total} symbols but the round has {round}")]
    RoundingOverflow { total: u64, round: u64 },
}

/// How many devices the worst device's solo optimum can host.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    /// Index (into the device list) of the weakest channel.
    pub worst_index: usize,
    pub m_c_single: f64,
    pub m_r_single: f64,
    pub m_total_single: f64,
    /// Whole update slots of the worst device's size that fit in its round.
    pub capacity: u64,
    /// More devices than capacity: the round will have to stretch.
    pub saturated: bool,
}

fn worst_device(devices: &[Device]) -> Result<usize, SolveError> {
    if devices.is_empty() {
        return Err(SolveError::BadInput("device list is empty".into()));
    }
    let mut idx = 0;
    for (i, d) in devices.iter().enumerate().skip(1) {
        if d.gain < devices[idx].gain {
            idx = i;
        }
    }
    Ok(idx)
}

pub fn cluster_capacity(
    params: &SystemParams,
    devices: &[Device],
    opts: &SolverOptions,
) -> Result<CapacityReport, SolveError> {
    let worst_index = worst_device(devices)?;
    let s = solve_single(params, &devices[worst_index], opts)?;
    let m_total = s.m_c + s.m_r;
    let ratio = m_total / s.m_r;
    let nearest = ratio.round();
    let capacity = if (ratio - nearest).abs() <= INT_SNAP * ratio {
        nearest
    } else {
        ratio.floor()
    } as u64;
    Ok(CapacityReport {
        worst_index,
        m_c_single: s.m_c,
        m_r_single: s.m_r,
        m_total_single: m_total,
        capacity,
        saturated: devices.len() as u64 > capacity,
    })
}

/// Low-complexity cluster scheduler.
///
/// Sizes the round for the worst device alone; within capacity the round
/// length is kept and every other device gets a slot no shorter than the
/// worst one's (its own error optimum if that is longer). Past capacity
/// the round stretches to one worst-size slot per device first. The common
/// charge interval is whatever the slots leave over, and the reported
/// metrics are recomputed from the assembled durations.
pub fn algorithm1(
    params: &SystemParams,
    devices: &[Device],
    opts: &SolverOptions,
) -> Result<SolveReport, SolveError> {
    let cap = cluster_capacity(params, devices, opts)?;
    let i_n = devices.len();
    let m_round = if cap.saturated {
        i_n as f64 * cap.m_r_single
    } else {
        cap.m_total_single
    };

    let slot_results: Vec<(usize, Result<f64, SolveError>)> = devices
        .par_iter()
        .enumerate()
        .filter(|(j, _)| *j != cap.worst_index)
        .map(|(j, dev)| {
            (j, solve_fixed_round(params, dev, m_round, opts).map(|s| s.m_r))
        })
        .collect();

    let mut m_r = vec![0.0; i_n];
    m_r[cap.worst_index] = cap.m_r_single;
    for (j, res) in slot_results {
        match res {
            Ok(mr) => m_r[j] = mr.max(cap.m_r_single),
            Err(SolveError::Infeasible) if cap.saturated => {
                return Err(SolveError::InfeasibleSaturated { device: j })
            }
            Err(e) => return Err(e),
        }
    }
    let m_c = (m_round - m_r.iter().sum::<f64>()).max(0.0);
    let policy = AllocationPolicy { m_c, m_r };
    Ok(report_from_policy(params, devices, policy, Some(cap.capacity), opts))
}

fn snapped_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= INT_SNAP * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn duration_ok(params: &SystemParams, gain: f64, m_total: f64, m_r: f64) -> bool {
    if m_r >= m_total {
        return false;
    }
    let gamma = gain * (m_total - m_r) / m_r;
    gamma >= params.gamma_th * (1.0 - 1e-9)
        && eps_total(gain, m_total - m_r, m_r, params.d_bits) <= params.eps_max * (1.0 + 1e-9)
}

/// Rounds a real-valued policy to whole symbols.
///
/// The round length is rounded up, each update slot picks whichever
/// integer neighbor gives that device the lower age (feasibility checked
/// against the thresholds), and the charge interval absorbs the remainder.
/// When the preferred neighbors overshoot the round, the cheapest ones are
/// walked back.
pub fn round_policy(
    params: &SystemParams,
    devices: &[Device],
    policy: &AllocationPolicy,
) -> Result<AllocationPolicy, ScheduleError> {
    let i_n = devices.len();
    assert_eq!(policy.m_r.len(), i_n, "policy and device list disagree on size");
    let m_int = snapped_ceil(policy.round_len());

    // Feasible integer neighbors of each slot, best age first.
    let mut chosen = Vec::with_capacity(i_n);
    let mut fallback: Vec<Option<f64>> = Vec::with_capacity(i_n);
    for (i, dev) in devices.iter().enumerate() {
        let mr = policy.m_r[i];
        let lo = mr.floor().max(1.0);
        let hi = mr.ceil().max(1.0);
        let mut cands: Vec<f64> = if lo == hi { vec![lo] } else { vec![lo, hi] };
        cands.retain(|&c| duration_ok(params, dev.gain, m_int, c));
        if cands.is_empty() {
            return Err(ScheduleError::ConstraintBrokenByRounding { device: i });
        }
        let age =
            |c: f64| aoi_value(m_int, eps_total(dev.gain, m_int - c, c, params.d_bits));
        cands.sort_by(|&a, &b| age(a).partial_cmp(&age(b)).unwrap());
        chosen.push(cands[0]);
        fallback.push(cands.get(1).copied());
    }

    // Walk back over-length slots, smallest age penalty first.
    let mut total: f64 = chosen.iter().sum();
    while total > m_int {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..i_n {
            if let Some(alt) = fallback[i] {
                if alt < chosen[i] {
                    let dev = &devices[i];
                    let age = |c: f64| {
                        aoi_value(m_int, eps_total(dev.gain, m_int - c, c, params.d_bits))
                    };
                    let penalty = age(alt) - age(chosen[i]);
                    if best.map_or(true, |(_, p)| penalty < p) {
                        best = Some((i, penalty));
                    }
                }
            }
        }
        match best {
            Some((i, _)) => {
                total -= chosen[i] - fallback[i].unwrap();
                chosen[i] = fallback[i].unwrap();
                fallback[i] = None;
            }
            None => {
                return Err(ScheduleError::RoundingOverflow {
                    total: total as u64,
                    round: m_int as u64,
                })
            }
        }
    }

    Ok(AllocationPolicy { m_c: m_int - total, m_r: chosen })
}

/// One transmission slot inside a round: device index, start offset and
/// length in whole symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub device: usize,
    pub start: u64,
    pub len: u64,
}

/// Integer periodic schedule: the pattern repeats every `round_len`
/// symbols, device `i` transmitting at `k * round_len + start_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSchedule {
    pub round_len: u64,
    pub slots: Vec<Slot>,
}

/// Lays a policy out on the symbol axis: charge first, then the update
/// slots back to back in device order. Rounds to whole symbols first.
pub fn reconstruct_schedule(
    params: &SystemParams,
    devices: &[Device],
    policy: &AllocationPolicy,
) -> Result<TimeSchedule, ScheduleError> {
    let int_policy = round_policy(params, devices, policy)?;
    let mut slots = Vec::with_capacity(devices.len());
    let mut at = int_policy.m_c as u64;
    for (i, &mr) in int_policy.m_r.iter().enumerate() {
        slots.push(Slot { device: i, start: at, len: mr as u64 });
        at += mr as u64;
    }
    Ok(TimeSchedule { round_len: int_policy.round_len() as u64, slots })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScheduleViolation {
    OutsideRound { device: usize },
    Collision { first: usize, second: usize },
    UpdateCount { device: usize, count: usize },
    ErrorCapExceeded { device: usize, eps: f64 },
    SnrBelowThreshold { device: usize, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub violations: Vec<ScheduleViolation>,
}

/// Checks a schedule against the protocol rules: slots inside the round,
/// no overlaps, exactly one update per device per round, and the decode
/// thresholds met with the charge time the schedule actually implies.
pub fn validate_schedule(
    schedule: &TimeSchedule,
    params: &SystemParams,
    devices: &[Device],
) -> ValidationReport {
    let mut violations = Vec::new();
    let m = schedule.round_len;

    for s in &schedule.slots {
        if s.len == 0 || s.start + s.len > m {
            violations.push(ScheduleViolation::OutsideRound { device: s.device });
        }
    }

    let mut order: Vec<&Slot> = schedule.slots.iter().collect();
    order.sort_by_key(|s| s.start);
    for w in order.windows(2) {
        if w[0].start + w[0].len > w[1].start {
            violations.push(ScheduleViolation::Collision {
                first: w[0].device,
                second: w[1].device,
            });
        }
    }

    for (i, dev) in devices.iter().enumerate() {
        let mine: Vec<&Slot> = schedule.slots.iter().filter(|s| s.device == i).collect();
        if mine.len() != 1 {
            violations.push(ScheduleViolation::UpdateCount { device: i, count: mine.len() });
            continue;
        }
        let m_r = mine[0].len as f64;
        let m_c = m as f64 - m_r;
        let gamma = dev.gain * m_c / m_r;
        if gamma < params.gamma_th * (1.0 - 1e-9) {
            violations.push(ScheduleViolation::SnrBelowThreshold { device: i, gamma });
        }
        let eps = eps_total(dev.gain, m_c, m_r, params.d_bits);
        if eps > params.eps_max * (1.0 + 1e-9) {
            violations.push(ScheduleViolation::ErrorCapExceeded { device: i, eps });
        }
    }

    ValidationReport { pass: violations.is_empty(), violations }
}
