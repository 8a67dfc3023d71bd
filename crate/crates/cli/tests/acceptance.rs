//! Acceptance gate for the whole stack. Each test exercises one numbered
//! end-to-end claim and prints a single verdict line; run with
//! `cargo test --test acceptance -- --nocapture` to see them all.

use aoisched::{
    algorithm1, avg_aoi, cluster_capacity, convexity_condition, error_probability,
    exhaustive_search, ibl_baseline, make_device, reconstruct_schedule, simulate, solve_minmax,
    AllocationPolicy, Device, FblPoint, GridSpec, SimConfig, SolverOptions, SystemParams,
    TimeSchedule, UpdateRound,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Decode error at the capacity boundary must be one half to this margin.
const BOUNDARY_ABS_TOL: f64 = 1e-12;
/// Monte Carlo age agreement: relative band plus a standard-error band.
const MC_REL_TOL: f64 = 1e-2;
const MC_SE_MULT: f64 = 3.0;
const MC_ROUND_BATCHES: usize = 100;
const MC_BATCH_LEN: usize = 10_000;
/// Curvature probes: relative step and negativity slack.
const HESS_POINTS: usize = 1_000;
const HESS_STEP_REL: f64 = 1e-4;
const HESS_NEG_TOL: f64 = 1e-6;
/// Lattice points the brute-force check is allowed to enumerate.
const GRID_BUDGET: u128 = 9_000_000;
/// A lattice can only lose to the continuous relaxation, up to solver noise.
const GRID_SLACK_REL: f64 = 1e-5;
/// Heuristic-vs-solver agreement below capacity.
const ALG1_REL_TOL: f64 = 1e-4;
/// Shape identity of the capacity-rate baseline.
const IBL_SHAPE_REL_TOL: f64 = 1e-9;
/// Width of the flat part of the age-vs-count curve.
const FLAT_REL_TOL: f64 = 5e-3;
/// Margin for "an extra update never wins".
const SECOND_UPDATE_SLACK: f64 = 1e-9;

/// Runs `body`, prints exactly one verdict line for criterion `n`, and
/// propagates any failure. Wall time over `budget_s` is itself a failure.
fn verdict(n: u32, label: &str, budget_s: f64, body: impl FnOnce()) {
    let t0 = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let secs = t0.elapsed().as_secs_f64();
    let in_budget = secs <= budget_s;
    match (&outcome, in_budget) {
        (Ok(()), true) => println!("ACCEPTANCE {n} {label}: PASS ({secs:.1}s)"),
        (Ok(()), false) => {
            println!("ACCEPTANCE {n} {label}: FAIL (over budget: {secs:.1}s > {budget_s:.0}s)")
        }
        (Err(_), _) => println!("ACCEPTANCE {n} {label}: FAIL ({secs:.1}s)"),
    }
    if let Err(e) = outcome {
        resume_unwind(e);
    }
    assert!(in_budget, "criterion {n} took {secs:.1}s, budget {budget_s:.0}s");
}

fn gain_devices(params: &SystemParams, gains: &[f64]) -> Vec<Device> {
    gains
        .iter()
        .enumerate()
        .map(|(i, &z)| Device::from_gain(params, i, z).unwrap())
        .collect()
}

fn geometry_devices(params: &SystemParams, distances: &[f64]) -> Vec<Device> {
    distances
        .iter()
        .enumerate()
        .map(|(i, &d)| make_device(params, i, d, 1.0).unwrap())
        .collect()
}

/// Worst-device age of a fractional policy, recomputed from scratch
/// through the public single-round primitives.
fn worst_age(params: &SystemParams, devices: &[Device], policy: &AllocationPolicy) -> f64 {
    let m = policy.round_len();
    let mut worst = 0.0f64;
    for (dev, &mr) in devices.iter().zip(policy.m_r.iter()) {
        let charge = m - mr;
        let gamma = dev.gain * charge / mr;
        let p = FblPoint::new(gamma, mr, params.d_bits).unwrap();
        let eps = error_probability(&p).unwrap();
        let age = avg_aoi(&UpdateRound::new(charge, mr, eps).unwrap()).unwrap();
        worst = worst.max(age);
    }
    worst
}

#[test]
fn criterion_01_capacity_boundary_error_is_one_half() {
    verdict(1, "capacity-boundary decode error is one half", 1.0, || {
        let mut probed = 0u32;
        for d in [64u32, 128, 256] {
            for m_r in [32.0, 50.5, 64.0, 100.0, 128.0, 200.25, 333.0, 512.0] {
                // Channel chosen so the slot carries exactly its capacity.
                let gamma = (f64::from(d) / m_r).exp2() - 1.0;
                let p = FblPoint::new(gamma, m_r, d).unwrap();
                let eps = error_probability(&p).unwrap();
                assert!(
                    (eps - 0.5).abs() <= BOUNDARY_ABS_TOL,
                    "d {d}, m_r {m_r}: eps {eps} is off one half by {:e}",
                    (eps - 0.5).abs()
                );
                probed += 1;
            }
        }
        assert_eq!(probed, 24);
    });
}

#[test]
fn criterion_02_simulated_age_matches_closed_form() {
    verdict(2, "simulated age matches the closed form", 30.0, || {
        for i in 0..21u64 {
            let eps = 0.9 * i as f64 / 20.0;
            let m = 150.0 + 37.0 * i as f64;
            let round = UpdateRound::new(m - 50.0, 50.0, eps).unwrap();
            let closed = avg_aoi(&round).unwrap();

            // Bernoulli sawtooth, decisions at round ends, fresh sample
            // taken at the previous decision.
            let mut rng = ChaCha8Rng::seed_from_u64(7_700 + i);
            let mut age = m;
            let mut batch_means = Vec::with_capacity(MC_ROUND_BATCHES);
            for _ in 0..MC_ROUND_BATCHES {
                let mut area = 0.0f64;
                for _ in 0..MC_BATCH_LEN {
                    area += age * m + 0.5 * m * m;
                    if rng.random::<f64>() < 1.0 - eps {
                        age = m;
                    } else {
                        age += m;
                    }
                }
                batch_means.push(area / (MC_BATCH_LEN as f64 * m));
            }
            let nb = batch_means.len() as f64;
            let mc = batch_means.iter().sum::<f64>() / nb;
            let var = batch_means.iter().map(|x| (x - mc) * (x - mc)).sum::<f64>() / (nb - 1.0);
            let se = (var / nb).sqrt();

            let diff = (mc - closed).abs();
            assert!(
                diff <= MC_REL_TOL * closed,
                "eps {eps:.3}: mc {mc} vs closed {closed}, rel {:.4}",
                diff / closed
            );
            // The error-free chain is deterministic, so leave room for
            // bare float roundoff when the standard error is zero.
            assert!(
                diff <= MC_SE_MULT * se + 1e-9 * closed,
                "eps {eps:.3}: |{mc} - {closed}| = {diff:e} exceeds {MC_SE_MULT} se ({se:e})"
            );
        }
    });
}

#[test]
fn criterion_03_error_surface_curvature_is_nonnegative() {
    verdict(3, "decode error curvature nonnegative where certified", 10.0, || {
        let d_bits = 128u32;
        let mut rng = ChaCha8Rng::seed_from_u64(31_003);
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        while accepted < HESS_POINTS {
            attempts += 1;
            assert!(attempts < 200_000, "sampler starved at {accepted} points");
            let z = 10f64.powf(rng.random_range(-1.3..1.0));
            let m_r = 10f64.powf(rng.random_range(1.5..3.2));
            // The certificate speaks about the operating region: SNR at or
            // above the unit decode threshold, error at most one half (the
            // tail flips concave beyond), and off the underflow clamp
            // where differences vanish.
            let gamma = 10f64.powf(rng.random_range(0.0..1.3));
            let m_c = gamma * m_r / z;
            if !m_c.is_finite() || m_c <= 0.0 || m_c > 1e9 {
                continue;
            }
            let center = FblPoint::new(gamma, m_r, d_bits).unwrap();
            if !convexity_condition(&center) {
                continue;
            }
            let eps_center = error_probability(&center).unwrap();
            if !(1e-12..=0.5).contains(&eps_center) {
                continue;
            }
            accepted += 1;

            let eps_at = |mc: f64, mr: f64| {
                let p = FblPoint::new(z * mc / mr, mr, d_bits).unwrap();
                error_probability(&p).unwrap()
            };
            let hc = HESS_STEP_REL * m_c.abs().max(1.0);
            let hr = HESS_STEP_REL * m_r.abs().max(1.0);
            let f0 = eps_at(m_c, m_r);
            let h11 = (eps_at(m_c + hc, m_r) - 2.0 * f0 + eps_at(m_c - hc, m_r)) / (hc * hc);
            let h22 = (eps_at(m_c, m_r + hr) - 2.0 * f0 + eps_at(m_c, m_r - hr)) / (hr * hr);
            let h12 = (eps_at(m_c + hc, m_r + hr) - eps_at(m_c + hc, m_r - hr)
                - eps_at(m_c - hc, m_r + hr)
                + eps_at(m_c - hc, m_r - hr))
                / (4.0 * hc * hr);

            let scale = h11.abs() + h22.abs() + h12.abs();
            assert!(
                h11 >= -HESS_NEG_TOL * scale && h22 >= -HESS_NEG_TOL * scale,
                "negative diagonal at z {z:.3}, m_c {m_c:.1}, m_r {m_r:.1}: \
                 h11 {h11:e}, h22 {h22:e}"
            );
            let det = h11 * h22 - h12 * h12;
            let det_scale = (h11 * h22).abs().max(h12 * h12).max(1e-300);
            assert!(
                det >= -HESS_NEG_TOL * det_scale,
                "indefinite at z {z:.3}, m_c {m_c:.1}, m_r {m_r:.1}: det {det:e}"
            );
        }
    });
}

#[test]
fn criterion_04_solver_matches_brute_force() {
    verdict(4, "solver matches integer brute force", 300.0, || {
        let params = SystemParams::default();
        let opts = SolverOptions::default();
        for gains in [vec![0.3], vec![0.3, 0.5], vec![0.3, 0.5, 1.0]] {
            let devices = gain_devices(&params, &gains);
            let n = devices.len();
            let cont = solve_minmax(&params, &devices, &opts).unwrap();

            let m_c_max = (1.8 * cont.policy.m_c).ceil().max(50.0);
            let slot_top = cont.policy.m_r.iter().cloned().fold(0.0f64, f64::max);
            let m_r_max = (1.8 * slot_top).ceil().max(20.0);
            let step = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
                .into_iter()
                .find(|s| {
                    let nc = (m_c_max / s).floor() as u128 + 1;
                    let nr = ((m_r_max - 1.0) / s).floor() as u128 + 1;
                    nc * nr.pow(n as u32) <= GRID_BUDGET
                })
                .expect("some step must fit the point budget");
            let grid = GridSpec {
                m_c_min: 0.0,
                m_c_max,
                m_c_step: step,
                m_r_min: 1.0,
                m_r_max,
                m_r_step: step,
            };
            let brute = exhaustive_search(&params, &devices, &grid, &opts).unwrap();

            // Tolerance is the age swing across one lattice cell, measured
            // by pushing every duration of the brute-force winner one step.
            let mut nudged = brute.policy.clone();
            nudged.m_c += step;
            for mr in nudged.m_r.iter_mut() {
                *mr += step;
            }
            let cell = (worst_age(&params, &devices, &nudged)
                - worst_age(&params, &devices, &brute.policy))
            .abs()
                + 1e-9 * cont.delta_max;

            assert!(
                brute.delta_max >= cont.delta_max * (1.0 - GRID_SLACK_REL),
                "{n} devices: lattice {} beat the relaxation {}",
                brute.delta_max,
                cont.delta_max
            );
            assert!(
                (brute.delta_max - cont.delta_max).abs() <= cell,
                "{n} devices, step {step}: |{} - {}| > cell {cell}",
                brute.delta_max,
                cont.delta_max
            );
        }
    });
}

#[test]
fn criterion_05_heuristic_tracks_solver() {
    verdict(5, "one-pass heuristic tracks the solver", 120.0, || {
        let params = SystemParams::default();
        let opts = SolverOptions::default();

        let unsaturated: [&[f64]; 12] = [
            &[0.1],
            &[0.2],
            &[0.3],
            &[0.5],
            &[0.1, 0.2],
            &[0.1, 0.3],
            &[0.2, 0.4],
            &[0.3, 0.6],
            &[0.1, 0.2, 0.3],
            &[0.2, 0.3, 0.5],
            &[0.3, 0.45, 0.6],
            &[0.1, 0.15, 0.2, 0.25],
        ];
        for gains in unsaturated {
            let devices = gain_devices(&params, gains);
            let mm = solve_minmax(&params, &devices, &opts).unwrap();
            let h = algorithm1(&params, &devices, &opts).unwrap();
            assert!(!h.saturated, "{gains:?} was expected to fit one round");
            let rel = (h.delta_max - mm.delta_max).abs() / mm.delta_max;
            assert!(
                rel <= ALG1_REL_TOL,
                "{gains:?}: heuristic {} vs solver {} (rel {rel:e})",
                h.delta_max,
                mm.delta_max
            );
        }

        let saturated: [&[f64]; 3] = [&[5.0, 5.0], &[1.0, 1.0, 1.0], &[2.0, 3.0, 5.0]];
        let mut gaps = Vec::new();
        for gains in saturated {
            let devices = gain_devices(&params, gains);
            let mm = solve_minmax(&params, &devices, &opts).unwrap();
            let h = algorithm1(&params, &devices, &opts).unwrap();
            assert!(h.saturated, "{gains:?} was expected to overflow one round");
            assert!(
                h.delta_max >= mm.delta_max * (1.0 - 1e-9),
                "{gains:?}: heuristic {} undercut the solver {}",
                h.delta_max,
                mm.delta_max
            );
            gaps.push((h.delta_max - mm.delta_max) / mm.delta_max);
        }
        println!(
            "    saturated heuristic gives up {:.2}% / {:.2}% / {:.2}% over the solver",
            100.0 * gaps[0],
            100.0 * gaps[1],
            100.0 * gaps[2]
        );
    });
}

#[test]
fn criterion_06_capacity_rate_baseline_loses() {
    verdict(6, "capacity-rate baseline shape and deficit", 60.0, || {
        let params = SystemParams::default();
        let opts = SolverOptions::default();
        let fixtures: [&[f64]; 4] = [&[0.8], &[1.2], &[1.6], &[0.8, 1.2, 1.6]];
        for distances in fixtures {
            let devices = geometry_devices(&params, distances);
            let ibl = ibl_baseline(&params, &devices, &opts).unwrap();
            let m = ibl.policy.round_len();
            // Slots sized to carry exactly their capacity decode half the
            // time, which fixes the age at two and a half rounds.
            let shape = (ibl.delta_max - 2.5 * m).abs() / ibl.delta_max;
            assert!(
                shape <= IBL_SHAPE_REL_TOL,
                "{distances:?}: baseline age {} vs 2.5 x {m} (rel {shape:e})",
                ibl.delta_max
            );
            let mm = solve_minmax(&params, &devices, &opts).unwrap();
            assert!(
                mm.delta_max < ibl.delta_max,
                "{distances:?}: solver {} did not beat baseline {}",
                mm.delta_max,
                ibl.delta_max
            );
        }
    });
}

#[test]
fn criterion_07_round_capacity_gates_the_age_curve() {
    verdict(7, "age flat to capacity then rising", 300.0, || {
        let params = SystemParams::default();
        let opts = SolverOptions::default();

        let mut caps = Vec::new();
        for d in [1.4, 1.5, 1.6] {
            let one = make_device(&params, 0, d, 1.0).unwrap();
            let cap = cluster_capacity(&params, &[one.clone()], &opts).unwrap().capacity;
            assert!(cap >= 1);
            caps.push(cap);
            let curve: Vec<f64> = (1..=cap as usize + 3)
                .map(|count| {
                    let devices = geometry_devices(&params, &vec![d; count]);
                    solve_minmax(&params, &devices, &opts).unwrap().delta_max
                })
                .collect();
            check_gate(&curve, cap);
        }
        assert!(
            caps.windows(2).all(|w| w[0] <= w[1]),
            "round capacity fell with distance: {caps:?}"
        );

        // A soft channel shows an actual plateau rather than a single point.
        let soft = Device::from_gain(&params, 0, 0.25).unwrap();
        let soft_cap = cluster_capacity(&params, &[soft.clone()], &opts).unwrap().capacity;
        assert!(soft_cap >= 2, "soft fixture lost its plateau: capacity {soft_cap}");
        let curve: Vec<f64> = (1..=soft_cap as usize + 2)
            .map(|count| {
                let devices = gain_devices(&params, &vec![0.25; count]);
                solve_minmax(&params, &devices, &opts).unwrap().delta_max
            })
            .collect();
        check_gate(&curve, soft_cap);
    });
}

/// Flat within `FLAT_REL_TOL` through `cap` devices, strictly rising after.
fn check_gate(curve: &[f64], cap: u64) {
    let cap = cap as usize;
    for (i, d) in curve.iter().enumerate().take(cap) {
        let rel = (d - curve[0]).abs() / curve[0];
        assert!(
            rel <= FLAT_REL_TOL,
            "count {} drifted {rel:.4} off the single-device age",
            i + 1
        );
    }
    for i in cap.max(1)..curve.len() {
        assert!(
            curve[i] > curve[i - 1],
            "count {} did not raise the age: {} vs {}",
            i + 1,
            curve[i],
            curve[i - 1]
        );
    }
}

#[test]
fn criterion_08_start_shifts_leave_the_simulation_unchanged() {
    verdict(8, "cyclic start shifts leave simulated age unchanged", 30.0, || {
        let params = SystemParams::default();
        let opts = SolverOptions::default();
        let devices = gain_devices(&params, &[0.3, 0.6]);
        let mm = solve_minmax(&params, &devices, &opts).unwrap();
        let sched = reconstruct_schedule(&params, &devices, &mm.policy).unwrap();
        let cfg = SimConfig { rounds: 20_000, seed: 99, time_resolution: 1.0 };
        let base = simulate(&sched, &devices, &params, &cfg).unwrap();

        let charge = sched.slots.iter().map(|s| s.start).min().unwrap();
        assert!(charge >= 3, "fixture needs a charge gap to rotate through");
        for shift in [1, charge / 3, charge / 2, charge] {
            // Rotating every slot earlier by the same offset is a cyclic
            // relabeling of the round origin; the charge gap absorbs it.
            let rotated = TimeSchedule {
                round_len: sched.round_len,
                slots: sched
                    .slots
                    .iter()
                    .map(|s| aoisched::Slot { device: s.device, start: s.start - shift, ..*s })
                    .collect(),
            };
            let shifted = simulate(&rotated, &devices, &params, &cfg).unwrap();
            for (a, b) in base.per_device.iter().zip(shifted.per_device.iter()) {
                assert_eq!(
                    a.time_avg_aoi.to_bits(),
                    b.time_avg_aoi.to_bits(),
                    "shift {shift}: age diverged"
                );
                assert_eq!(
                    a.success_rate.to_bits(),
                    b.success_rate.to_bits(),
                    "shift {shift}: success rate diverged"
                );
            }
        }
    });
}

/// How one device spends a round in the double-update enumeration.
#[derive(Clone, Copy)]
enum SlotPlan {
    One { len: u64 },
    Two { first: u64, second: u64 },
}

/// Stationary time-average age for a device updating at two epochs per
/// round. Between its own slots the device only harvests; each
/// transmission spends everything stored since the previous one. A
/// delivery carries the sample taken at the device's previous epoch, and
/// a failed decode leaves the age growing.
fn two_epoch_age(g1: f64, g2: f64, eps1: f64, eps2: f64) -> f64 {
    let m = g1 + g2;
    let denom = 1.0 - eps1 * eps2;
    let after_first = (g2 + eps1 * g1) / denom;
    let after_second = (g1 + eps2 * g2) / denom;
    (after_first * g1 + 0.5 * g1 * g1 + after_second * g2 + 0.5 * g2 * g2) / m
}

#[test]
fn criterion_09_second_update_per_round_never_helps() {
    verdict(9, "a second update per round never wins", 300.0, || {
        let params = SystemParams::default();
        let opts = SolverOptions::default();
        let devices = gain_devices(&params, &[0.4, 0.8]);
        let cont = solve_minmax(&params, &devices, &opts).unwrap();
        let m_star = cont.policy.round_len();

        let slot_eps = |dev: &Device, charge: f64, len: f64| -> Option<f64> {
            if charge <= 0.0 {
                return None;
            }
            let gamma = dev.gain * charge / len;
            if gamma < params.gamma_th * (1.0 - 1e-9) {
                return None;
            }
            let eps = error_probability(&FblPoint::new(gamma, len, params.d_bits).ok()?).ok()?;
            (eps <= params.eps_max * (1.0 + 1e-9)).then_some(eps)
        };

        // Age of one device under a fixed layout, or None when any of its
        // slots misses the decode thresholds.
        let device_age = |dev: &Device,
                          plan: SlotPlan,
                          ends: (f64, Option<f64>),
                          m: f64|
         -> Option<f64> {
            match (plan, ends) {
                (SlotPlan::One { len }, (_, None)) => {
                    let len = len as f64;
                    let eps = slot_eps(dev, m - len, len)?;
                    avg_aoi(&UpdateRound::new(m - len, len, eps).unwrap()).ok()
                }
                (SlotPlan::Two { first, second }, (e1, Some(e2))) => {
                    let (l1, l2) = (first as f64, second as f64);
                    let charge1 = m - e2 + (e1 - l1);
                    let charge2 = (e2 - l2) - e1;
                    let eps1 = slot_eps(dev, charge1, l1)?;
                    let eps2 = slot_eps(dev, charge2, l2)?;
                    let g1 = e2 - e1;
                    Some(two_epoch_age(g1, m - g1, eps1, eps2))
                }
                _ => unreachable!("plan and epoch bookkeeping disagree"),
            }
        };

        let lengths = |m_r: f64, fracs: &[f64]| -> Vec<u64> {
            let mut v: Vec<u64> =
                fracs.iter().map(|f| (f * m_r).round().max(1.0) as u64).collect();
            v.dedup();
            v
        };
        let plans_for = |m_r: f64| -> Vec<SlotPlan> {
            let mut plans: Vec<SlotPlan> = lengths(m_r, &[0.6, 0.8, 1.0, 1.2, 1.4])
                .into_iter()
                .map(|len| SlotPlan::One { len })
                .collect();
            for first in lengths(m_r, &[0.5, 0.7, 0.85, 1.0, 1.25]) {
                for second in lengths(m_r, &[0.5, 0.7, 0.85, 1.0, 1.25]) {
                    plans.push(SlotPlan::Two { first, second });
                }
            }
            plans
        };

        let mut best_single = f64::INFINITY;
        let mut best_extra = f64::INFINITY;
        let mut singles = 0usize;
        let mut extras = 0usize;
        // A second full packet needs roughly twice the harvest, so rounds
        // well past the single-update optimum must be on the table for
        // double-update layouts to clear the decode thresholds at all.
        for m in [0.75, 0.9, 1.0, 1.15, 1.3, 1.6, 2.0, 2.4].map(|f| (f * m_star).round()) {
            for plan0 in plans_for(cont.policy.m_r[0]) {
                for plan1 in plans_for(cont.policy.m_r[1]) {
                    for offset_frac in [0.35, 0.5, 0.65] {
                        // First block of slots opens the round; devices with
                        // a second slot share a later block at the offset.
                        let offset = (offset_frac * m).round();
                        let (l0, s0) = match plan0 {
                            SlotPlan::One { len } => (len as f64, None),
                            SlotPlan::Two { first, second } => {
                                (first as f64, Some(second as f64))
                            }
                        };
                        let (l1, s1) = match plan1 {
                            SlotPlan::One { len } => (len as f64, None),
                            SlotPlan::Two { first, second } => {
                                (first as f64, Some(second as f64))
                            }
                        };
                        let block1_end = l0 + l1;
                        let block2_len = s0.unwrap_or(0.0) + s1.unwrap_or(0.0);
                        if block1_end > offset || offset + block2_len > m {
                            continue;
                        }
                        let ends0 = (l0, s0.map(|len| offset + len));
                        let ends1 = (block1_end, s1.map(|len| offset + s0.unwrap_or(0.0) + len));

                        let Some(a0) = device_age(&devices[0], plan0, ends0, m) else {
                            continue;
                        };
                        let Some(a1) = device_age(&devices[1], plan1, ends1, m) else {
                            continue;
                        };
                        let value = a0.max(a1);
                        let single_only =
                            matches!(plan0, SlotPlan::One { .. })
                                && matches!(plan1, SlotPlan::One { .. });
                        if single_only {
                            singles += 1;
                            best_single = best_single.min(value);
                            // Offsets do not change a single-slot layout;
                            // skip the redundant repeats.
                            break;
                        }
                        extras += 1;
                        best_extra = best_extra.min(value);
                    }
                }
            }
        }

        assert!(singles >= 10, "only {singles} single-update layouts were feasible");
        assert!(extras >= 100, "only {extras} double-update layouts were feasible");
        assert!(
            best_single >= cont.delta_max * (1.0 - GRID_SLACK_REL),
            "lattice single {best_single} beat the relaxation {}",
            cont.delta_max
        );
        assert!(
            best_extra >= best_single * (1.0 - SECOND_UPDATE_SLACK),
            "a double-update layout won: {best_extra} vs single {best_single}"
        );
    });
}

#[test]
fn criterion_10_binary_reruns_are_byte_identical() {
    verdict(10, "seeded binary reruns are byte identical", 60.0, || {
        let dir = tempfile::TempDir::new().unwrap();
        let spec = dir.path().join("spec.toml");
        std::fs::write(
            &spec,
            concat!(
                "scenario = \"device_count_sweep\"\n",
                "methods = [\"convex\", \"simulate\"]\n",
                "[sweep]\nvariable = \"device_count\"\nvalues = [2.0, 3.0]\n",
                "[generator]\ncount = 3\ndistance_min = 1.3\ndistance_max = 1.6\nseed = 5\n",
                "[sim]\nrounds = 20000\nseed = 5\n",
            ),
        )
        .unwrap();

        let run = |tag: &str| -> (Vec<u8>, Vec<u8>) {
            let out = dir.path().join(tag);
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_aoisched"))
                .args(["run"])
                .arg(&spec)
                .args(["--seed", "7", "--out"])
                .arg(&out)
                .status()
                .unwrap();
            assert!(status.success(), "run {tag} exited with {status}");
            (
                std::fs::read(out.with_extension("csv")).unwrap(),
                std::fs::read(out.with_extension("json")).unwrap(),
            )
        };

        let (csv_a, json_a) = run("a");
        let (csv_b, json_b) = run("b");
        assert!(!csv_a.is_empty() && csv_a.iter().filter(|&&b| b == b'\n').count() > 1);
        assert_eq!(csv_a, csv_b, "CSV outputs differ between reruns");
        assert_eq!(json_a, json_b, "JSON outputs differ between reruns");
    });
}
