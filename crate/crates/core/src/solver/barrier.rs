//! Min-max age solver: bisection on the age level over a log-barrier
//! interior-point feasibility subproblem.
//!
//! For a candidate level `delta`, every device must satisfy
//! `M / delta <= 2(1 - eps_i) / (3 - eps_i)` (that ratio is the reciprocal
//! of the age-per-round factor), plus the SNR, error-cap, positivity and
//! round-cap constraints. Feasibility is decided by minimizing the worst
//! constraint margin `s` with a barrier Newton method: analytic gradients,
//! finite-difference Hessian of the barrier gradient, dense Cholesky with
//! ridge escalation, feasibility-preserving backtracking line search.
//!
//! A final polish pass re-solves at the accepted level minimizing the total
//! update time, so among near-optimal allocations the returned one keeps
//! the common charge interval as long as possible.

use super::{
    eps_total, gradient_of_eps, report_from_policy, AllocationPolicy, SolveError, SolveReport,
    SolverOptions,
};
use crate::aoi::aoi_value;
use crate::link::{Device, SystemParams};

const MR_FLOOR: f64 = 1e-6;

/// Age-per-round reciprocal: `delta = M / q(eps)`.
fn q_of(eps: f64) -> f64 {
    2.0 * (1.0 - eps) / (3.0 - eps)
}

fn qp_of(eps: f64) -> f64 {
    let t = 3.0 - eps;
    -4.0 / (t * t)
}

struct Cluster<'a> {
    params: &'a SystemParams,
    devices: &'a [Device],
    cap: f64,
}

/// Objective and constraint bundle at one point. Constraint values must be
/// strictly positive at interior points; the Jacobian is row-major m x n.
struct Eval {
    obj: f64,
    obj_grad: Vec<f64>,
    cons: Vec<f64>,
    jac: Vec<f64>,
}

impl Eval {
    fn interior(&self) -> bool {
        self.cons.iter().all(|&c| c > 0.0 && c.is_finite())
    }
}

struct DeviceState {
    eps: f64,
    gamma: f64,
    /// d eps / d x_j over the duration coordinates.
    deps: Vec<f64>,
}

impl<'a> Cluster<'a> {
    fn n_dev(&self) -> usize {
        self.devices.len()
    }

    /// Per-device error, SNR and error gradient at durations `x`
    /// (`x[0]` charge, `x[1..]` update slots).
    fn device_states(&self, x: &[f64], with_grad: bool) -> Vec<DeviceState> {
        let i_n = self.n_dev();
        let m: f64 = x.iter().sum();
        let mut out = Vec::with_capacity(i_n);
        for (i, dev) in self.devices.iter().enumerate() {
            let mr = x[1 + i];
            let mc = m - mr;
            let gamma = dev.gain * mc / mr;
            let eps = eps_total(dev.gain, mc, mr, self.params.d_bits);
            let mut deps = vec![0.0; i_n + 1];
            if with_grad {
                if let Ok((dmc, dmr)) = gradient_of_eps(self.params, dev, mc, mr) {
                    for (j, slot) in deps.iter_mut().enumerate() {
                        // Every coordinate except the device's own slot
                        // extends its charge time.
                        *slot = if j == 1 + i { dmr } else { dmc };
                    }
                }
            }
            out.push(DeviceState { eps, gamma, deps });
        }
        out
    }

    fn ages(&self, x: &[f64]) -> Vec<f64> {
        let m: f64 = x.iter().sum();
        self.device_states(x, false)
            .iter()
            .map(|s| aoi_value(m, s.eps))
            .collect()
    }

    /// Level constraint margins `M/delta - q(eps_i)`; feasible at `delta`
    /// when all are <= 0.
    fn margins(&self, x: &[f64], delta: f64) -> Vec<f64> {
        let m: f64 = x.iter().sum();
        self.device_states(x, false)
            .iter()
            .map(|s| m / delta - q_of(s.eps))
            .collect()
    }

    /// Phase-I bundle: variables `y = [x, s]`, objective `s`, slack rows
    /// `s - g_i` ahead of the shared hard-constraint rows.
    fn eval_phase1(&self, delta: f64, y: &[f64]) -> Eval {
        let i_n = self.n_dev();
        let n = i_n + 2;
        let x = &y[..i_n + 1];
        let s = y[i_n + 1];
        let m: f64 = x.iter().sum();
        let states = self.device_states(x, true);

        let m_cons = 4 * i_n + 2;
        let mut cons = Vec::with_capacity(m_cons);
        let mut jac = vec![0.0; m_cons * n];
        let mut row = 0;
        for st in &states {
            cons.push(s - (m / delta - q_of(st.eps)));
            let qp = qp_of(st.eps);
            for j in 0..=i_n {
                jac[row * n + j] = qp * st.deps[j] - 1.0 / delta;
            }
            jac[row * n + (n - 1)] = 1.0;
            row += 1;
        }
        self.hard_rows(&states, x, &mut cons, &mut jac, n, &mut row);
        debug_assert_eq!(row, m_cons);

        let mut obj_grad = vec![0.0; n];
        obj_grad[n - 1] = 1.0;
        Eval { obj: s, obj_grad, cons, jac }
    }

    /// Polish bundle: variables `x` only, objective is the (scaled) total
    /// update time, level rows `q(eps_i) - M/delta` must stay positive.
    fn eval_polish(&self, delta: f64, w: f64, x: &[f64]) -> Eval {
        let i_n = self.n_dev();
        let n = i_n + 1;
        let m: f64 = x.iter().sum();
        let states = self.device_states(x, true);

        let m_cons = 4 * i_n + 2;
        let mut cons = Vec::with_capacity(m_cons);
        let mut jac = vec![0.0; m_cons * n];
        let mut row = 0;
        for st in &states {
            cons.push(q_of(st.eps) - m / delta);
            let qp = qp_of(st.eps);
            for j in 0..n {
                jac[row * n + j] = qp * st.deps[j] - 1.0 / delta;
            }
            row += 1;
        }
        self.hard_rows(&states, x, &mut cons, &mut jac, n, &mut row);
        debug_assert_eq!(row, m_cons);

        let obj = w * x[1..].iter().sum::<f64>();
        let mut obj_grad = vec![0.0; n];
        for g in obj_grad.iter_mut().skip(1) {
            *g = w;
        }
        Eval { obj, obj_grad, cons, jac }
    }

    /// Shared constraint rows: error cap, SNR threshold, charge and slot
    /// positivity, round cap. `n` may include a trailing slack column,
    /// which these rows leave at zero.
    fn hard_rows(
        &self,
        states: &[DeviceState],
        x: &[f64],
        cons: &mut Vec<f64>,
        jac: &mut [f64],
        n: usize,
        row: &mut usize,
    ) {
        let i_n = self.n_dev();
        let m: f64 = x.iter().sum();
        for st in states {
            cons.push(self.params.eps_max - st.eps);
            for j in 0..=i_n {
                jac[*row * n + j] = -st.deps[j];
            }
            *row += 1;
        }
        for (i, st) in states.iter().enumerate() {
            cons.push(st.gamma - self.params.gamma_th);
            let mr = x[1 + i];
            let z = self.devices[i].gain;
            for j in 0..=i_n {
                jac[*row * n + j] = if j == 1 + i { -st.gamma / mr } else { z / mr };
            }
            *row += 1;
        }
        cons.push(x[0]);
        jac[*row * n] = 1.0;
        *row += 1;
        for i in 0..i_n {
            cons.push(x[1 + i] - MR_FLOOR);
            jac[*row * n + 1 + i] = 1.0;
            *row += 1;
        }
        cons.push(self.cap - m);
        for j in 0..=i_n {
            jac[*row * n + j] = -1.0;
        }
        *row += 1;
    }
}

fn barrier_value(e: &Eval, mu: f64) -> Option<f64> {
    let mut v = e.obj;
    for &c in &e.cons {
        if !(c > 0.0) {
            return None;
        }
        v -= mu * c.ln();
    }
    v.is_finite().then_some(v)
}

fn barrier_grad(e: &Eval, mu: f64, n: usize) -> Vec<f64> {
    let mut g = e.obj_grad.clone();
    for (r, &c) in e.cons.iter().enumerate() {
        let w = mu / c;
        for j in 0..n {
            g[j] -= w * e.jac[r * n + j];
        }
    }
    g
}

/// Cholesky solve of `a x = b` for symmetric positive definite `a`
/// (row-major, clobbered). Returns `None` when a pivot fails.
fn chol_solve(a: &mut [f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        a[j * n + j] = dj;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / dj;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * n + k] * y[k];
        }
        y[i] = v / a[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= a[k * n + i] * x[k];
        }
        x[i] = v / a[i * n + i];
    }
    Some(x)
}

/// Newton direction `-H^{-1} g` with ridge escalation when the Hessian
/// estimate is not positive definite.
fn newton_direction(h: &[f64], g: &[f64], n: usize) -> Vec<f64> {
    let mut scale = 1e-30f64;
    for j in 0..n {
        scale = scale.max(h[j * n + j].abs());
    }
    let mut lam = 0.0f64;
    for _ in 0..60 {
        let mut a = h.to_vec();
        if lam > 0.0 {
            for j in 0..n {
                a[j * n + j] += lam;
            }
        }
        if let Some(p) = chol_solve(&mut a, g, n) {
            if p.iter().all(|v| v.is_finite()) {
                return p.into_iter().map(|v| -v).collect();
            }
        }
        lam = if lam == 0.0 { 1e-10 * scale } else { lam * 10.0 };
    }
    g.iter().map(|v| -v).collect()
}

/// One barrier stage: Newton iterations at fixed `mu` until the barrier
/// gradient is small or progress stalls. `y` is updated in place and stays
/// strictly interior.
fn newton_stage<F: Fn(&[f64]) -> Eval>(eval: &F, y: &mut Vec<f64>, n: usize, mu: f64) {
    for _ in 0..80 {
        let e = eval(y);
        let f0 = match barrier_value(&e, mu) {
            Some(v) => v,
            None => return,
        };
        let g = barrier_grad(&e, mu, n);
        let gmax = g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if gmax <= (1e-3 * mu).max(1e-11) {
            return;
        }

        let mut h = vec![0.0; n * n];
        for j in 0..n {
            let hj = 1e-6 * y[j].abs().max(1.0);
            let mut probe = y.clone();
            probe[j] += hj;
            let mut sign = 1.0;
            let mut ep = eval(&probe);
            if !ep.interior() {
                probe[j] = y[j] - hj;
                sign = -1.0;
                ep = eval(&probe);
            }
            if ep.interior() {
                let gp = barrier_grad(&ep, mu, n);
                for k in 0..n {
                    h[k * n + j] = sign * (gp[k] - g[k]) / hj;
                }
            } else {
                h[j * n + j] = 1.0;
            }
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let v = 0.5 * (h[a * n + b] + h[b * n + a]);
                h[a * n + b] = v;
                h[b * n + a] = v;
            }
        }

        let mut dir = newton_direction(&h, &g, n);
        let mut slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            dir = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
            if slope == 0.0 {
                return;
            }
        }

        let mut t = 1.0f64;
        let mut moved = false;
        for _ in 0..60 {
            let yt: Vec<f64> = y.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            let et = eval(&yt);
            if et.interior() {
                if let Some(ft) = barrier_value(&et, mu) {
                    if ft <= f0 + 1e-4 * t * slope {
                        *y = yt;
                        moved = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !moved {
            return;
        }
    }
}

fn barrier_minimize<F: Fn(&[f64]) -> Eval>(
    eval: &F,
    mut y: Vec<f64>,
    n: usize,
    mu0: f64,
    mu_min: f64,
) -> Vec<f64> {
    let mut mu = mu0;
    while mu >= mu_min {
        newton_stage(eval, &mut y, n, mu);
        mu *= 0.1;
    }
    y
}

/// Strictly feasible starting durations: uniform slots sized to the
/// payload, charge inflated until the SNR threshold has margin and every
/// device clears the error cap.
fn initial_point(ctx: &Cluster) -> Result<Vec<f64>, SolveError> {
    let i_n = ctx.n_dev();
    let d = f64::from(ctx.params.d_bits);
    let mr0 = d.max(1.0);
    let mut mc0 = mr0 * 1e-3;
    for dev in ctx.devices {
        let need = 2.0 * ctx.params.gamma_th * mr0 / dev.gain - (i_n as f64 - 1.0) * mr0;
        mc0 = mc0.max(need);
    }
    let slots = i_n as f64 * mr0;
    if mc0 + slots >= ctx.cap {
        return Err(SolveError::Infeasible);
    }
    let eps_goal = ctx.params.eps_max * (1.0 - 1e-6);
    loop {
        let x: Vec<f64> = std::iter::once(mc0)
            .chain(std::iter::repeat(mr0).take(i_n))
            .collect();
        let ok = ctx
            .device_states(&x, false)
            .iter()
            .all(|s| s.eps <= eps_goal && s.gamma > ctx.params.gamma_th);
        if ok {
            return Ok(x);
        }
        mc0 *= 2.0;
        if mc0 + slots >= ctx.cap {
            return Err(SolveError::Infeasible);
        }
    }
}

/// Minimizes the worst device's average age over the round durations.
///
/// Bisects the age level; each level's feasibility is decided by the
/// barrier subproblem, warm-started from the last feasible witness. The
/// witness achieving the final level is polished for maximum shared charge
/// and returned with honestly recomputed metrics.
pub fn solve_minmax(
    params: &SystemParams,
    devices: &[Device],
    opts: &SolverOptions,
) -> Result<SolveReport, SolveError> {
    params.validate()?;
    if devices.is_empty() {
        return Err(SolveError::BadInput("device list is empty".into()));
    }
    for dev in devices {
        if !(dev.gain > 0.0 && dev.gain.is_finite()) {
            return Err(SolveError::BadInput(format!(
                "device {} has unusable gain {}",
                dev.id, dev.gain
            )));
        }
    }
    let ctx = Cluster { params, devices, cap: opts.max_round };
    let i_n = devices.len();
    let n1 = i_n + 2;

    let x0 = initial_point(&ctx)?;
    let mut witness = x0;
    let mut hi = ctx
        .ages(&witness)
        .into_iter()
        .fold(0.0f64, f64::max);
    let mut lo = 0.0f64;
    let tol = opts.bisect_rel_tol;

    for _ in 0..200 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (hi + lo);
        let mut y: Vec<f64> = witness.clone();
        let s0 = ctx
            .margins(&witness, mid)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        y.push(s0 + 0.1 * (1.0 + s0.abs()));
        let eval = |p: &[f64]| ctx.eval_phase1(mid, p);
        let y_star = barrier_minimize(&eval, y, n1, 1e-2, opts.barrier_mu_min);
        let x_star = y_star[..i_n + 1].to_vec();
        let worst_margin = ctx
            .margins(&x_star, mid)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if worst_margin <= 0.0 {
            let achieved = ctx.ages(&x_star).into_iter().fold(0.0f64, f64::max);
            witness = x_star;
            hi = hi.min(mid).min(achieved.max(lo));
        } else {
            lo = mid;
        }
    }

    // Tie-break among near-optimal allocations: shortest total update
    // time, i.e. the longest shared charge interval.
    let delta_polish = hi * (1.0 + 5.0 * tol);
    let m_scale: f64 = witness.iter().sum();
    let w = 1.0 / m_scale.max(1.0);
    let evalp = |p: &[f64]| ctx.eval_polish(delta_polish, w, p);
    let x_polished = barrier_minimize(&evalp, witness.clone(), i_n + 1, 1e-2, 1e-8);
    let polished_ok = ctx.eval_polish(delta_polish, w, &x_polished).interior()
        && ctx
            .ages(&x_polished)
            .into_iter()
            .fold(0.0f64, f64::max)
            <= hi * (1.0 + 10.0 * tol);
    if polished_ok {
        witness = x_polished;
    }

    let policy = AllocationPolicy { m_c: witness[0], m_r: witness[1..].to_vec() };
    Ok(report_from_policy(params, devices, policy, None, opts))
}
