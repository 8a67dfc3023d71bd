//! Age-of-information of a periodic update schedule.
//!
//! Every device gets exactly one update slot per round of `M = m_c + m_r`
//! symbols. An update decodes with probability `1 - eps`, independently per
//! round, and a successful update leaves the receiver holding a sample one
//! round old. Averaging the resulting sawtooth over the failure geometry
//! gives the closed form
//!
//! ```text
//! avg_aoi = M * (1/2 + 1/(1 - eps))
//! ```
//!
//! which is `1.5 M` for a perfect channel and diverges as `eps -> 1`.
//! Ages are in symbols; multiply by the symbol time for seconds.

use crate::fbl::EPS_FLOOR;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AoiError {
    #[error("invalid round: {0}")]
    InvalidRound(String),
    #[error("average age diverges at eps = {0}")]
    DivergentAoi(f64),
}

/// One device's view of a schedule round: how long it charges, how long it
/// transmits, and the decode error probability of that transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRound {
    pub m_c: f64,
    pub m_r: f64,
    pub eps: f64,
}

impl UpdateRound {
    pub fn new(m_c: f64, m_r: f64, eps: f64) -> Result<Self, AoiError> {
        if !(m_c >= 0.0 && m_c.is_finite()) {
            return Err(AoiError::InvalidRound(format!("m_c must be >= 0, got {m_c}")));
        }
        if !(m_r > 0.0 && m_r.is_finite()) {
            return Err(AoiError::InvalidRound(format!("m_r must be > 0, got {m_r}")));
        }
        if !(0.0..1.0).contains(&eps) {
            return Err(AoiError::InvalidRound(format!("eps must be in [0, 1), got {eps}")));
        }
        Ok(Self { m_c, m_r, eps })
    }

    pub fn round_len(&self) -> f64 {
        self.m_c + self.m_r
    }
}

/// Long-run time-average age for one device, in symbols.
pub fn avg_aoi(round: &UpdateRound) -> Result<f64, AoiError> {
    if round.eps >= 1.0 - EPS_FLOOR {
        return Err(AoiError::DivergentAoi(round.eps));
    }
    Ok(aoi_value(round.round_len(), round.eps))
}

// Shared with the optimizers, which call it at rates where constructing an
// UpdateRound per evaluation would be noise.
pub(crate) fn aoi_value(m_total: f64, eps: f64) -> f64 {
    m_total * (0.5 + 1.0 / (1.0 - eps))
}

/// Probability that a device's update succeeds on attempt `k` of a renewal
/// cycle (i.e. after `k - 1` straight failures). `k >= 1`.
pub fn event_probability(eps: f64, k: u64) -> f64 {
    assert!(k >= 1, "attempt index starts at 1");
    eps.powi((k - 1) as i32) * (1.0 - eps)
}

/// Area under the age sawtooth contributed by a cycle that succeeds on
/// attempt `k`, in symbols^2. `k = 0` denotes the degenerate sure-success
/// cycle and contributes `M^2 / 2`.
pub fn event_area(m_total: f64, k: u64) -> f64 {
    (k as f64 + 0.5) * m_total * m_total
}
