//! Scalar search helpers: grids, golden-section minimization, bisection.
//!
//! The optimizers consistently use scan-then-refine: a coarse grid to
//! localize a minimum or sign change, then golden section or bisection
//! inside the winning bracket. Grids are the robustness layer; the refine
//! step is where the precision comes from.

/// 2 - phi; interior-point fraction of a golden-section step.
const GOLDEN_INV: f64 = 0.381_966_011_250_105_15;

/// Geometrically spaced grid, endpoints included. `lo` and `hi` positive.
pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(lo > 0.0 && hi > lo && n >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Golden-section minimum of a unimodal `f` on `[lo, hi]`.
///
/// Shrinks the bracket until its width falls below
/// `rel_tol * max(|lo|, |hi|) + 1e-300`; returns the best probed point.
pub(crate) fn golden_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> (f64, f64) {
    debug_assert!(hi >= lo);
    let mut a = lo + GOLDEN_INV * (hi - lo);
    let mut b = hi - GOLDEN_INV * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..400 {
        if hi - lo <= rel_tol * lo.abs().max(hi.abs()) + 1e-300 {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = lo + GOLDEN_INV * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = hi - GOLDEN_INV * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Root of a monotone `f` on `[lo, hi]` by bisection; expects a sign change
/// across the bracket (either direction). Returns the midpoint after
/// `iters` halvings.
pub(crate) fn bisect_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> f64 {
    let mut flo = f(lo);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if (fmid >= 0.0) == (flo >= 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Index of the smallest value; first occurrence wins ties.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}
