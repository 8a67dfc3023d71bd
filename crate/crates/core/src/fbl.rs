//! Finite-blocklength link math.
//!
//! A device delivers a `d`-bit status update over `m_r` channel symbols at
//! SNR `gamma`. In the short-packet regime the decode error probability is
//! not 0/1 at the capacity boundary; it follows the normal approximation
//!
//! ```text
//! eps = Q( sqrt(m_r / V(gamma)) * (C(gamma) - d/m_r) * ln 2 )
//! ```
//!
//! with capacity `C(gamma) = log2(1 + gamma)` and channel dispersion
//! `V(gamma) = 1 - (1 + gamma)^-2`. The argument of `Q` is exposed as
//! [`omega`] because the optimizers differentiate through it.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use thiserror::Error;

/// Error probabilities are clamped to `[EPS_FLOOR, 1 - EPS_FLOOR]`.
///
/// The age model divides by `1 - eps`, so an exact 1.0 must be impossible;
/// the floor keeps log-barrier terms finite on the other side.
pub const EPS_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum FblError {
    #[error("snr must be positive and finite, got {0}")]
    InvalidSnr(f64),
    #[error("update duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("payload must be at least 1 bit")]
    EmptyPayload,
    #[error("channel dispersion vanished at snr {0}")]
    DegenerateSnr(f64),
}

/// One finite-blocklength operating point: SNR, update duration, payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FblPoint {
    /// Linear-scale SNR at the receiver, > 0.
    pub gamma: f64,
    /// Update duration in channel symbols. Real-valued: rounding to whole
    /// symbols is a scheduling concern, not a math one.
    pub m_r: f64,
    /// Payload size in bits.
    pub d: u32,
}

impl FblPoint {
    pub fn new(gamma: f64, m_r: f64, d: u32) -> Result<Self, FblError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(FblError::InvalidSnr(gamma));
        }
        if !(m_r > 0.0 && m_r.is_finite()) {
            return Err(FblError::InvalidDuration(m_r));
        }
        if d == 0 {
            return Err(FblError::EmptyPayload);
        }
        Ok(Self { gamma, m_r, d })
    }

    /// Coding rate in bits per symbol.
    pub fn rate(&self) -> f64 {
        f64::from(self.d) / self.m_r
    }
}

/// Upper tail of the standard normal distribution,
/// `Q(x) = P(N(0,1) > x) = erfc(x / sqrt 2) / 2`.
///
/// Accurate to about 1 ulp of `erfc`; absolute error stays below 1e-15
/// everywhere and the deep tail underflows to 0 rather than going negative.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Shannon capacity `log2(1 + gamma)` in bits per symbol.
pub fn shannon_capacity(gamma: f64) -> f64 {
    gamma.ln_1p() / LN_2
}

/// Channel dispersion `V(gamma) = 1 - (1 + gamma)^-2`.
///
/// Evaluated as `gamma (2 + gamma) / (1 + gamma)^2`, which is the same
/// expression without the catastrophic cancellation at small SNR.
pub fn dispersion(gamma: f64) -> f64 {
    let g1 = 1.0 + gamma;
    gamma * (2.0 + gamma) / (g1 * g1)
}

/// Argument of the Q-function in the error model:
/// `omega = sqrt(m_r / V) * (C - d/m_r) * ln 2`.
///
/// Positive when the blocklength leaves margin below capacity, zero exactly
/// at `C = d/m_r`, negative past it.
pub fn omega(p: &FblPoint) -> Result<f64, FblError> {
    let v = dispersion(p.gamma);
    if v <= 0.0 {
        return Err(FblError::DegenerateSnr(p.gamma));
    }
    Ok((p.m_r / v).sqrt() * (shannon_capacity(p.gamma) - p.rate()) * LN_2)
}

/// Decode error probability `Q(omega)`, clamped to
/// `[EPS_FLOOR, 1 - EPS_FLOOR]`.
pub fn error_probability(p: &FblPoint) -> Result<f64, FblError> {
    Ok(q_func(omega(p)?).clamp(EPS_FLOOR, 1.0 - EPS_FLOOR))
}

/// True when the error probability is jointly convex in the charge and
/// update durations at this operating point.
///
/// Two conditions, both required:
/// - `C(gamma) * m_r + 3 d >= 4 / ln 2`
/// - `rate >= (16 - 18 ln(1 + gamma)) / (87 - 12 ln 2)`
///
/// The rate bound decreases with SNR; at `gamma = 1` it is about 0.0449
/// bits per symbol, so everything but near-degenerate rates qualifies.
pub fn convexity_condition(p: &FblPoint) -> bool {
    let c = shannon_capacity(p.gamma);
    if c * p.m_r + 3.0 * f64::from(p.d) < 4.0 / LN_2 {
        return false;
    }
    let rate_floor = (16.0 - 18.0 * p.gamma.ln_1p()) / (87.0 - 12.0 * LN_2);
    p.rate() >= rate_floor
}
