//! Link budget for a wireless-power-transfer cell.
//!
//! A server radiates continuously at `p_c`. Devices harvest while they are
//! not transmitting and spend the stored energy on their own short uplink
//! bursts, so a device that charges for `m_c` symbols and transmits for
//! `m_r` symbols sees
//!
//! ```text
//! snr = gain * m_c / m_r
//! gain = mu * p_c * fading^2 * distance^-eta / (h_i * p_c + sigma2)
//! ```
//!
//! where `h_i` is the residual self-interference gain of the full-duplex
//! server and `sigma2` its noise floor. All durations are in channel
//! symbols (one symbol = `1 / bandwidth` seconds).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("distance must be positive and finite, got {0}")]
    InvalidGeometry(f64),
    #[error("fading amplitude must be positive and finite, got {0}")]
    InvalidFading(f64),
    #[error("update duration must be positive")]
    InvalidDuration,
}

/// How `sigma2_dbm` is read: as the total in-band noise power, or as a
/// spectral density in dBm/Hz to be scaled by the bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Total,
    PerHz,
}

/// Cell-wide radio parameters.
///
/// Defaults describe a 2.4 GHz / 10 MHz cell with a 30 dBm server,
/// 50% harvest efficiency, -104 dB residual self-interference and a
/// -174 dBm noise floor, carrying 128-bit updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Server transmit power in dBm.
    pub p_c_dbm: f64,
    /// Energy harvest efficiency, in (0, 1].
    pub mu: f64,
    /// Residual self-interference power gain in dB (applied to `p_c`).
    pub h_i_db: f64,
    /// Noise at the server receiver in dBm; see [`NoiseMode`].
    pub sigma2_dbm: f64,
    pub noise_mode: NoiseMode,
    /// Path-loss exponent.
    pub eta: f64,
    /// Channel bandwidth in Hz; also fixes the symbol time.
    pub bandwidth_hz: f64,
    /// Update payload in bits.
    pub d_bits: u32,
    /// Largest tolerated decode error probability, in (0, 0.5].
    pub eps_max: f64,
    /// Smallest useful SNR (linear), >= 1; below it an update is a waste
    /// of harvested energy.
    pub gamma_th: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            p_c_dbm: 30.0,
            mu: 0.5,
            h_i_db: -104.0,
            sigma2_dbm: -174.0,
            noise_mode: NoiseMode::Total,
            eta: 2.7,
            bandwidth_hz: 10e6,
            d_bits: 128,
            eps_max: 0.5,
            gamma_th: 1.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        let bad = |m: &str| Err(LinkError::InvalidParams(m.to_string()));
        if !self.p_c_dbm.is_finite() {
            return bad("p_c_dbm must be finite");
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return bad("mu must be in (0, 1]");
        }
        if !self.h_i_db.is_finite() || !self.sigma2_dbm.is_finite() {
            return bad("h_i_db and sigma2_dbm must be finite");
        }
        if !(self.eta >= 1.0 && self.eta.is_finite()) {
            return bad("eta must be >= 1");
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return bad("bandwidth_hz must be positive");
        }
        if self.d_bits == 0 {
            return bad("d_bits must be at least 1");
        }
        if !(self.eps_max > 0.0 && self.eps_max <= 0.5) {
            return bad("eps_max must be in (0, 0.5]");
        }
        if !(self.gamma_th >= 1.0 && self.gamma_th.is_finite()) {
            return bad("gamma_th must be >= 1");
        }
        Ok(())
    }

    pub fn p_c_watts(&self) -> f64 {
        dbm_to_watts(self.p_c_dbm)
    }

    pub fn h_i_linear(&self) -> f64 {
        db_to_linear(self.h_i_db)
    }

    /// Total in-band noise power in watts.
    pub fn noise_watts(&self) -> f64 {
        match self.noise_mode {
            NoiseMode::Total => dbm_to_watts(self.sigma2_dbm),
            NoiseMode::PerHz => dbm_to_watts(self.sigma2_dbm) * self.bandwidth_hz,
        }
    }

    /// Interference-plus-noise power at the server receiver, watts.
    pub fn interference_noise_watts(&self) -> f64 {
        self.h_i_linear() * self.p_c_watts() + self.noise_watts()
    }

    pub fn symbol_time_s(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    /// Composite gain for a unit-fading device at `distance_m`.
    pub fn gain_at(&self, distance_m: f64, fading: f64) -> f64 {
        let zhat = fading * fading * distance_m.powf(-self.eta);
        self.mu * self.p_c_watts() * zhat / self.interference_noise_watts()
    }
}

/// One device, with its composite charge-to-SNR gain precomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    pub distance_m: f64,
    /// Small-scale fading amplitude (1 = pure path loss).
    pub fading: f64,
    /// `mu * p_c * fading^2 * d^-eta / (h_i * p_c + sigma2)`; SNR per unit
    /// of charge-to-update ratio. Derived, kept for cheap reuse.
    pub gain: f64,
}

/// Builds a device and derives its gain from the cell parameters.
pub fn make_device(
    params: &SystemParams,
    id: usize,
    distance_m: f64,
    fading: f64,
) -> Result<Device, LinkError> {
    params.validate()?;
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(LinkError::InvalidGeometry(distance_m));
    }
    if !(fading > 0.0 && fading.is_finite()) {
        return Err(LinkError::InvalidFading(fading));
    }
    Ok(Device {
        id,
        distance_m,
        fading,
        gain: params.gain_at(distance_m, fading),
    })
}

impl Device {
    /// Synthesizes a unit-distance device with the requested gain.
    ///
    /// Test rigs and scenario files sometimes specify the channel directly;
    /// the equivalent fading amplitude keeps the [`Device`] invariant intact.
    pub fn from_gain(params: &SystemParams, id: usize, gain: f64) -> Result<Device, LinkError> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(LinkError::InvalidParams(format!("gain must be positive, got {gain}")));
        }
        let unit = params.gain_at(1.0, 1.0);
        make_device(params, id, 1.0, (gain / unit).sqrt())
    }
}

/// SNR of an update transmitted for `m_r` symbols after charging for `m_c`.
pub fn snr(device: &Device, m_c: f64, m_r: f64) -> Result<f64, LinkError> {
    if !(m_r > 0.0) {
        return Err(LinkError::InvalidDuration);
    }
    Ok(device.gain * m_c / m_r)
}

/// Conversion chain for energy stored during a charge interval. Only the
/// linear model ships, but saturation-style harvesters slot in here.
pub trait EnergyModel {
    /// Joules stored after `seconds` of exposure to `incident_power_w`.
    fn harvested_joules(&self, incident_power_w: f64, seconds: f64) -> f64;
}

/// Constant-efficiency harvester: `mu * P * t`.
#[derive(Debug, Clone, Copy)]
pub struct LinearHarvest {
    pub mu: f64,
}

impl EnergyModel for LinearHarvest {
    fn harvested_joules(&self, incident_power_w: f64, seconds: f64) -> f64 {
        self.mu * incident_power_w * seconds
    }
}

/// Energy a device banks while charging for `m_c` symbols, in joules.
pub fn harvested_energy(params: &SystemParams, device: &Device, m_c: f64) -> f64 {
    let zhat = device.fading * device.fading * device.distance_m.powf(-params.eta);
    let incident = zhat * params.p_c_watts();
    LinearHarvest { mu: params.mu }.harvested_joules(incident, m_c * params.symbol_time_s())
}

/// Unit-mean-square Rayleigh fading amplitude.
pub fn rayleigh_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Amplitude^2 ~ Exp(1), so E[fading^2] = 1.
    let u: f64 = rng.random();
    (-(1.0 - u).ln()).sqrt().max(f64::MIN_POSITIVE)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
