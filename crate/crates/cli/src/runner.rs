//! Executes a run plan: one job per (sweep point, method), jobs run on
//! the thread pool, rows come back in sweep order regardless of which
//! job finished first.

use crate::config::{
    integer_sweep_value, params_at, ConfigError, DeviceSeed, Method, RunPlan,
};
use aoisched::{
    algorithm1, avg_aoi, cluster_capacity, convexity_condition, error_probability,
    exhaustive_search, ibl_baseline, make_device, reconstruct_schedule, simulate, solve_minmax,
    AllocationPolicy, Device, FblPoint, GridSpec, SimConfig, SolveError, SolveReport, SolveStatus,
    SolverOptions, SystemParams, UpdateRound,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// One output record; the CSV columns and the JSON objects are this
/// struct, field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub method: String,
    pub status: String,
    pub delta_max: Option<f64>,
    pub m_c: Option<f64>,
    /// Per-device update durations, semicolon separated, device order.
    pub m_r_list: String,
    pub eps_min: Option<f64>,
    pub eps_max: Option<f64>,
    pub gamma_min: Option<f64>,
    pub gamma_max: Option<f64>,
    pub capacity: Option<u64>,
    pub note: String,
}

impl Row {
    fn failed(&self) -> bool {
        !matches!(self.status.as_str(), "ok" | "condition_violated")
    }
}

pub struct RunOutcome {
    pub rows: Vec<Row>,
    pub failures: usize,
}

/// Caps the brute-force lattice well under the library's hard limit so
/// sweep points stay interactive.
const EXHAUSTIVE_POINT_BUDGET: u128 = 2_000_000;

fn materialize_devices(
    params: &SystemParams,
    seeds: &[DeviceSeed],
) -> Result<Vec<Device>, ConfigError> {
    seeds
        .iter()
        .enumerate()
        .map(|(i, seed)| {
            match *seed {
                DeviceSeed::Geometry { distance_m, fading } => {
                    make_device(params, i, distance_m, fading)
                }
                DeviceSeed::Gain(g) => Device::from_gain(params, i, g),
            }
            .map_err(|e| ConfigError::Invalid(format!("device {i}: {e}")))
        })
        .collect()
}

/// Honest closed-form metrics for an arbitrary policy, straight from the
/// public math API. Used for scaled policies and for the audit pass.
struct PolicyEval {
    delta_max: f64,
    eps: Vec<f64>,
    gamma: Vec<f64>,
    condition_ok: bool,
    divergent: Option<usize>,
}

fn evaluate_policy(
    params: &SystemParams,
    devices: &[Device],
    policy: &AllocationPolicy,
) -> PolicyEval {
    let m = policy.round_len();
    let mut eval = PolicyEval {
        delta_max: 0.0,
        eps: Vec::with_capacity(devices.len()),
        gamma: Vec::with_capacity(devices.len()),
        condition_ok: true,
        divergent: None,
    };
    for (i, dev) in devices.iter().enumerate() {
        let m_r = policy.m_r[i];
        let m_c = m - m_r;
        let gamma = if m_r > 0.0 { dev.gain * m_c / m_r } else { f64::INFINITY };
        let eps = match FblPoint::new(gamma, m_r, params.d_bits) {
            Ok(p) => {
                eval.condition_ok &= convexity_condition(&p);
                error_probability(&p).unwrap_or(1.0)
            }
            Err(_) => {
                eval.condition_ok = false;
                1.0
            }
        };
        let age = UpdateRound::new(m_c.max(f64::MIN_POSITIVE), m_r.max(f64::MIN_POSITIVE), eps)
            .and_then(|r| avg_aoi(&r))
            .unwrap_or(f64::INFINITY);
        if !age.is_finite() {
            eval.divergent.get_or_insert(i);
        }
        eval.delta_max = eval.delta_max.max(age);
        eval.eps.push(eps);
        eval.gamma.push(gamma);
    }
    eval
}

fn min_max(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (Some(lo), Some(hi))
}

fn join_m_r(m_r: &[f64]) -> String {
    let parts: Vec<String> = m_r.iter().map(|v| v.to_string()).collect();
    parts.join(";")
}

fn status_of(report: &SolveReport) -> &'static str {
    match report.status {
        SolveStatus::Optimal => "ok",
        SolveStatus::ConditionViolated => "condition_violated",
        SolveStatus::Infeasible => "infeasible",
    }
}

fn solve_error_status(e: &SolveError) -> &'static str {
    match e {
        SolveError::Infeasible | SolveError::InfeasibleSaturated { .. } => "infeasible",
        _ => "error",
    }
}

/// Whole-symbol lattice sized from the worst device's solo optimum, with
/// the step doubled until the point count fits the budget.
fn exhaustive_grid(
    params: &SystemParams,
    devices: &[Device],
    opts: &SolverOptions,
) -> Result<(GridSpec, f64), SolveError> {
    let cap = cluster_capacity(params, devices, opts)?;
    let stretch = if (devices.len() as u64) > cap.capacity {
        devices.len() as f64 * cap.m_r_single
    } else {
        cap.m_total_single
    };
    let m_c_max = (1.5 * stretch).ceil().max(2.0);
    let m_r_max = (2.0 * cap.m_r_single).ceil().max(2.0);
    let mut step = 1.0f64;
    loop {
        let nc = (m_c_max / step).floor() as u128 + 1;
        let nr = ((m_r_max - 1.0).max(0.0) / step).floor() as u128 + 1;
        let points = nc.saturating_mul(nr.saturating_pow(devices.len() as u32));
        if points <= EXHAUSTIVE_POINT_BUDGET {
            break;
        }
        step *= 2.0;
    }
    Ok((
        GridSpec {
            m_c_min: 0.0,
            m_c_max,
            m_c_step: step,
            m_r_min: 1.0,
            m_r_max,
            m_r_step: step,
        },
        step,
    ))
}

enum MethodOutput {
    /// A solver's own report, trusted as-is.
    Report(SolveReport, String),
    /// Metrics derived here (scaled policies, simulation measurements).
    Evaluated {
        policy: AllocationPolicy,
        status: String,
        delta_max: f64,
        eps: Vec<f64>,
        gamma: Vec<f64>,
        /// Measured decode errors cannot be recomputed from the policy.
        eps_measured: bool,
        note: String,
    },
    Failed(String, String),
}

fn scale_policy(policy: &AllocationPolicy, scale: f64) -> AllocationPolicy {
    AllocationPolicy {
        m_c: policy.m_c,
        m_r: policy.m_r.iter().map(|v| v * scale).collect(),
    }
}

/// Closed-form row for a policy that no solver vouches for.
fn evaluated_output(
    params: &SystemParams,
    devices: &[Device],
    policy: AllocationPolicy,
    mut notes: Vec<String>,
) -> MethodOutput {
    let eval = evaluate_policy(params, devices, &policy);
    let mut status = if eval.condition_ok { "ok" } else { "condition_violated" };
    if let Some(i) = eval.divergent {
        status = "infeasible";
        notes.push(format!("device {i} cannot decode at this point"));
    }
    MethodOutput::Evaluated {
        policy,
        status: status.to_string(),
        delta_max: eval.delta_max,
        eps: eval.eps,
        gamma: eval.gamma,
        eps_measured: false,
        note: notes.join(" "),
    }
}

fn run_method(
    params: &SystemParams,
    devices: &[Device],
    method: Method,
    scale: Option<f64>,
    sim: &SimConfig,
    opts: &SolverOptions,
) -> MethodOutput {
    if method == Method::Simulate {
        return simulate_method(params, devices, scale, sim, opts);
    }
    let solved: Result<(SolveReport, String), SolveError> = match method {
        Method::Convex => solve_minmax(params, devices, opts).map(|r| (r, String::new())),
        Method::Algorithm1 => algorithm1(params, devices, opts).map(|r| (r, String::new())),
        Method::Ibl => ibl_baseline(params, devices, opts).map(|r| (r, String::new())),
        Method::Exhaustive => exhaustive_grid(params, devices, opts).and_then(|(grid, step)| {
            exhaustive_search(params, devices, &grid, opts)
                .map(|r| (r, format!("grid_step={step}")))
        }),
        Method::Simulate => unreachable!("handled above"),
    };
    match (solved, scale) {
        (Err(e), _) => MethodOutput::Failed(solve_error_status(&e).to_string(), e.to_string()),
        (Ok((report, note)), None) => MethodOutput::Report(report, note),
        (Ok((report, note)), Some(s)) => {
            // Surface walk: every slot stretched or shrunk, closed forms
            // reported honestly for the off-optimum policy.
            let mut notes = vec![format!("m_r_scale={s}")];
            if !note.is_empty() {
                notes.insert(0, note);
            }
            evaluated_output(params, devices, scale_policy(&report.policy, s), notes)
        }
    }
}

fn simulate_method(
    params: &SystemParams,
    devices: &[Device],
    scale: Option<f64>,
    sim: &SimConfig,
    opts: &SolverOptions,
) -> MethodOutput {
    let report = match solve_minmax(params, devices, opts) {
        Ok(r) => r,
        Err(e) => {
            return MethodOutput::Failed(
                solve_error_status(&e).to_string(),
                format!("policy solve failed: {e}"),
            )
        }
    };
    let policy = match scale {
        Some(s) => scale_policy(&report.policy, s),
        None => report.policy,
    };
    let schedule = match reconstruct_schedule(params, devices, &policy) {
        Ok(s) => s,
        Err(e) => {
            return MethodOutput::Failed("error".to_string(), format!("rounding failed: {e}"))
        }
    };
    let result = match simulate(&schedule, devices, params, sim) {
        Ok(r) => r,
        Err(e) => {
            return MethodOutput::Failed("error".to_string(), format!("simulation failed: {e}"))
        }
    };

    let m = schedule.round_len as f64;
    let mut m_r = vec![0.0; devices.len()];
    let mut gamma = vec![0.0; devices.len()];
    for s in &schedule.slots {
        m_r[s.device] = s.len as f64;
        gamma[s.device] = devices[s.device].gain * (m - s.len as f64) / s.len as f64;
    }
    let slot_sum: f64 = m_r.iter().sum();
    let eps: Vec<f64> = result.per_device.iter().map(|d| 1.0 - d.success_rate).collect();
    let max_se = result.per_device.iter().map(|d| d.std_err).fold(0.0f64, f64::max);
    let mut note = format!("rounds={} max_se={max_se}", sim.rounds);
    if let Some(s) = scale {
        note = format!("m_r_scale={s} {note}");
    }
    MethodOutput::Evaluated {
        policy: AllocationPolicy { m_c: m - slot_sum, m_r },
        status: "ok".to_string(),
        delta_max: result.per_device.iter().map(|d| d.time_avg_aoi).fold(0.0, f64::max),
        eps,
        gamma,
        eps_measured: true,
        note,
    }
}

fn row_shell(plan: &RunPlan, value: f64, method: Method) -> Row {
    Row {
        scenario: plan.scenario.to_string(),
        sweep_variable: plan.sweep_variable.clone(),
        sweep_value: value,
        method: method.to_string(),
        status: String::new(),
        delta_max: None,
        m_c: None,
        m_r_list: String::new(),
        eps_min: None,
        eps_max: None,
        gamma_min: None,
        gamma_max: None,
        capacity: None,
        note: String::new(),
    }
}

fn fill_policy_columns(row: &mut Row, m_c: f64, m_r: &[f64], eps: &[f64], gamma: &[f64]) {
    row.m_c = Some(m_c);
    row.m_r_list = join_m_r(m_r);
    let (a, b) = min_max(eps);
    row.eps_min = a;
    row.eps_max = b;
    let (a, b) = min_max(gamma);
    row.gamma_min = a;
    row.gamma_max = b;
}

fn execute_job(plan: &RunPlan, value: f64, method: Method, audit: bool) -> Row {
    let mut row = row_shell(plan, value, method);

    let params = match params_at(&plan.params, &plan.sweep_variable, value) {
        Ok(p) => p,
        Err(e) => {
            row.status = "error".into();
            row.note = e.to_string();
            return row;
        }
    };

    let mut seeds = plan.seeds.clone();
    match plan.sweep_variable.as_str() {
        "device_count" => match integer_sweep_value(value) {
            Ok(k) => seeds.truncate(k as usize),
            Err(e) => {
                row.status = "error".into();
                row.note = e.to_string();
                return row;
            }
        },
        "added_distance" => {
            seeds.push(DeviceSeed::Geometry { distance_m: value, fading: 1.0 });
        }
        _ => {}
    }
    let scale = (plan.sweep_variable == "m_r_scale").then_some(value);

    let devices = match materialize_devices(&params, &seeds) {
        Ok(d) => d,
        Err(e) => {
            row.status = "error".into();
            row.note = e.to_string();
            return row;
        }
    };

    let opts = SolverOptions::default();
    match run_method(&params, &devices, method, scale, &plan.sim, &opts) {
        MethodOutput::Report(report, note) => {
            row.status = status_of(&report).to_string();
            row.delta_max = Some(report.delta_max);
            let eps: Vec<f64> = report.per_device.iter().map(|d| d.eps).collect();
            let gamma: Vec<f64> = report.per_device.iter().map(|d| d.gamma).collect();
            fill_policy_columns(&mut row, report.policy.m_c, &report.policy.m_r, &eps, &gamma);
            row.capacity = report.capacity;
            row.note = note;
            if audit {
                audit_row(&mut row, &params, &devices, false);
            }
        }
        MethodOutput::Evaluated { policy, status, delta_max, eps, gamma, eps_measured, note } => {
            row.status = status;
            // A divergent age has no numeric representation in JSON.
            row.delta_max = delta_max.is_finite().then_some(delta_max);
            fill_policy_columns(&mut row, policy.m_c, &policy.m_r, &eps, &gamma);
            row.note = note;
            if audit {
                audit_row(&mut row, &params, &devices, eps_measured);
            }
        }
        MethodOutput::Failed(status, note) => {
            row.status = status;
            row.note = note;
        }
    }
    row
}

/// Re-derives eps/gamma from the policy columns exactly as a downstream
/// consumer would (parsing the emitted strings) and flags mismatches.
fn audit_row(row: &mut Row, params: &SystemParams, devices: &[Device], gamma_only: bool) {
    if row.failed() {
        return;
    }
    let (Some(m_c), false) = (row.m_c, row.m_r_list.is_empty()) else {
        return;
    };
    let m_r: Result<Vec<f64>, _> = row.m_r_list.split(';').map(str::parse::<f64>).collect();
    let Ok(m_r) = m_r else {
        row.status = "audit_failed".into();
        row.note = format!("{}; audit: m_r_list does not parse", row.note);
        return;
    };
    if m_r.len() != devices.len() {
        row.status = "audit_failed".into();
        row.note = format!("{}; audit: expected {} durations", row.note, devices.len());
        return;
    }
    let eval = evaluate_policy(params, devices, &AllocationPolicy { m_c, m_r });
    let (gamma_min, gamma_max) = min_max(&eval.gamma);
    let mut checks: Vec<(&str, Option<f64>, Option<f64>)> = vec![
        ("gamma_min", row.gamma_min, gamma_min),
        ("gamma_max", row.gamma_max, gamma_max),
    ];
    if !gamma_only {
        let (eps_min, eps_max) = min_max(&eval.eps);
        checks.push(("eps_min", row.eps_min, eps_min));
        checks.push(("eps_max", row.eps_max, eps_max));
    }
    for (name, reported, derived) in checks {
        let (Some(r), Some(d)) = (reported, derived) else {
            continue;
        };
        if (r - d).abs() > 1e-9 * r.abs().max(1.0) {
            row.status = "audit_failed".into();
            row.note = format!("{}; audit: {name} reported {r}, derived {d}", row.note);
            return;
        }
    }
}

/// Runs every (sweep point, method) job and collects rows in sweep
/// order. Progress and wall times go to stderr; output files carry no
/// timing so reruns stay byte-identical.
pub fn execute(plan: &RunPlan, audit: bool) -> RunOutcome {
    let jobs: Vec<(f64, Method)> = plan
        .sweep_values
        .iter()
        .flat_map(|&v| plan.methods.iter().map(move |&m| (v, m)))
        .collect();

    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(value, method)| {
            let start = Instant::now();
            let row = execute_job(plan, value, method, audit);
            eprintln!(
                "{} {}={} {}: {} ({} ms)",
                plan.scenario,
                plan.sweep_variable,
                value,
                method,
                row.status,
                start.elapsed().as_millis()
            );
            row
        })
        .collect();

    let failures = rows.iter().filter(|r| r.failed()).count();
    RunOutcome { rows, failures }
}
