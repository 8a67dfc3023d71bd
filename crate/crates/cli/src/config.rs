//! Experiment spec files: a TOML schema with cell-parameter overrides,
//! a device population, a sweep, and the methods to run at every point.
//!
//! Every field has a default, so the empty file is a valid spec (the
//! stock cell, thirty random devices, a single point, the convex
//! solver). Unknown keys are rejected rather than ignored.

use aoisched::{SimConfig, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read spec file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("spec parse error: {0}")]
    Parse(String),
    #[error("invalid spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// One device; walk the age surface along its update-duration axis.
    SingleDeviceSurface,
    /// Sweep the energy-harvest efficiency.
    MuSweep,
    /// Sweep the payload size.
    PacketSweep,
    /// Grow a homogeneous cluster one device at a time.
    DeviceCountSweep,
    /// Keep a base cluster and move one extra device through the cell.
    AddedDeviceSweep,
    #[default]
    Custom,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::SingleDeviceSurface => "single_device_surface",
            Scenario::MuSweep => "mu_sweep",
            Scenario::PacketSweep => "packet_sweep",
            Scenario::DeviceCountSweep => "device_count_sweep",
            Scenario::AddedDeviceSweep => "added_device_sweep",
            Scenario::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Convex,
    Algorithm1,
    Exhaustive,
    Ibl,
    Simulate,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "convex" => Ok(Method::Convex),
            "algorithm1" => Ok(Method::Algorithm1),
            "exhaustive" => Ok(Method::Exhaustive),
            "ibl" => Ok(Method::Ibl),
            "simulate" => Ok(Method::Simulate),
            other => Err(ConfigError::Invalid(format!(
                "unknown method {other:?}; pick from convex, algorithm1, exhaustive, ibl, simulate"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Convex => "convex",
            Method::Algorithm1 => "algorithm1",
            Method::Exhaustive => "exhaustive",
            Method::Ibl => "ibl",
            Method::Simulate => "simulate",
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: String,
    pub values: Vec<f64>,
}

/// One explicit device: either a geometry (distance, optional fading
/// amplitude) or a composite gain given directly.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub distance_m: Option<f64>,
    pub fading: Option<f64>,
    pub gain: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub count: usize,
    #[serde(default = "default_distance_min")]
    pub distance_min: f64,
    #[serde(default = "default_distance_max")]
    pub distance_max: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_distance_min() -> f64 {
    0.8
}
fn default_distance_max() -> f64 {
    1.6
}
fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_base")]
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            path: default_out_base(),
            format: OutputFormat::default(),
        }
    }
}

fn default_out_base() -> PathBuf {
    PathBuf::from("aoisched_out")
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default)]
    pub params: SystemParams,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub devices: Vec<DeviceSpec>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub sim: SimConfig,
}

/// Reads and validates a spec file.
pub fn parse_spec(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let spec: ExperimentSpec =
        toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    spec.params
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    for (i, d) in spec.devices.iter().enumerate() {
        match (d.distance_m, d.gain) {
            (Some(dist), None) => {
                if !(dist > 0.0 && dist.is_finite()) {
                    return Err(ConfigError::Invalid(format!(
                        "device {i}: distance_m must be positive and finite, got {dist}"
                    )));
                }
                if let Some(h) = d.fading {
                    if !(h > 0.0 && h.is_finite()) {
                        return Err(ConfigError::Invalid(format!(
                            "device {i}: fading must be positive and finite, got {h}"
                        )));
                    }
                }
            }
            (None, Some(g)) => {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(ConfigError::Invalid(format!(
                        "device {i}: gain must be positive and finite, got {g}"
                    )));
                }
                if d.fading.is_some() {
                    return Err(ConfigError::Invalid(format!(
                        "device {i}: fading only applies to geometric devices"
                    )));
                }
            }
            _ => {
                return Err(ConfigError::Invalid(format!(
                    "device {i}: give exactly one of distance_m or gain"
                )));
            }
        }
    }
    if let Some(g) = &spec.generator {
        if g.count == 0 {
            return Err(ConfigError::Invalid("generator.count must be at least 1".into()));
        }
        if !(g.distance_min > 0.0 && g.distance_max >= g.distance_min && g.distance_max.is_finite())
        {
            return Err(ConfigError::Invalid(format!(
                "generator distances must satisfy 0 < min <= max, got [{}, {}]",
                g.distance_min, g.distance_max
            )));
        }
        if !spec.devices.is_empty() {
            return Err(ConfigError::Invalid(
                "give either explicit devices or a generator, not both".into(),
            ));
        }
    }
    if let Some(methods) = &spec.methods {
        if methods.is_empty() {
            return Err(ConfigError::Invalid("select at least one method".into()));
        }
    }
    if let Some(sweep) = &spec.sweep {
        validate_sweep_variable(&sweep.variable)?;
        if sweep.values.is_empty() {
            return Err(ConfigError::Invalid("sweep.values must not be empty".into()));
        }
        for &v in &sweep.values {
            if !v.is_finite() {
                return Err(ConfigError::Invalid(format!("sweep value {v} is not finite")));
            }
        }
    }
    if !(spec.sim.time_resolution > 0.0 && spec.sim.time_resolution.is_finite()) {
        return Err(ConfigError::Invalid(format!(
            "sim.time_resolution must be positive and finite, got {}",
            spec.sim.time_resolution
        )));
    }
    Ok(spec)
}

pub const PARAM_SWEEP_VARIABLES: &[&str] = &[
    "mu",
    "p_c_dbm",
    "h_i_db",
    "sigma2_dbm",
    "eta",
    "bandwidth_hz",
    "d_bits",
    "eps_max",
    "gamma_th",
];

pub const SCENARIO_SWEEP_VARIABLES: &[&str] =
    &["device_count", "added_distance", "m_r_scale", "none"];

fn validate_sweep_variable(var: &str) -> Result<(), ConfigError> {
    if PARAM_SWEEP_VARIABLES.contains(&var) || SCENARIO_SWEEP_VARIABLES.contains(&var) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!(
            "unknown sweep variable {var:?}; cell fields: {}; scenario fields: {}",
            PARAM_SWEEP_VARIABLES.join(", "),
            SCENARIO_SWEEP_VARIABLES.join(", ")
        )))
    }
}

/// A device before the cell parameters are applied: sweeps change the
/// cell, so gains are derived per sweep point, not at parse time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceSeed {
    Geometry { distance_m: f64, fading: f64 },
    Gain(f64),
}

/// Fully resolved run: defaults applied, devices drawn, sweep expanded.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub scenario: Scenario,
    pub params: SystemParams,
    pub sweep_variable: String,
    pub sweep_values: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<DeviceSeed>,
    pub sim: SimConfig,
    pub out_base: PathBuf,
    pub format: OutputFormat,
}

fn default_sweep(scenario: Scenario) -> SweepSpec {
    let (variable, values): (&str, Vec<f64>) = match scenario {
        Scenario::SingleDeviceSurface => ("m_r_scale", vec![0.6, 0.8, 1.0, 1.2, 1.4]),
        Scenario::MuSweep => ("mu", (1..=9).map(|i| i as f64 / 10.0).collect()),
        Scenario::PacketSweep => ("d_bits", vec![64.0, 96.0, 128.0]),
        Scenario::DeviceCountSweep => ("device_count", (1..=8).map(f64::from).collect()),
        Scenario::AddedDeviceSweep => ("added_distance", vec![0.8, 1.0, 1.2, 1.4, 1.6]),
        Scenario::Custom => ("none", vec![0.0]),
    };
    SweepSpec {
        variable: variable.to_string(),
        values,
    }
}

pub fn integer_sweep_value(v: f64) -> Result<u64, ConfigError> {
    let r = v.round();
    if v >= 0.5 && (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        Ok(r as u64)
    } else {
        Err(ConfigError::Invalid(format!(
            "sweep value {v} must be a positive integer for this variable"
        )))
    }
}

/// Expands a parsed spec into a run plan, drawing generated devices.
///
/// `seed_override` replaces both the generator seed and the simulation
/// seed, so one flag pins the whole run.
pub fn resolve(spec: &ExperimentSpec, seed_override: Option<u64>) -> Result<RunPlan, ConfigError> {
    let sweep = spec
        .sweep
        .clone()
        .unwrap_or_else(|| default_sweep(spec.scenario));
    validate_sweep_variable(&sweep.variable)?;

    let methods = spec.methods.clone().unwrap_or_else(|| vec![Method::Convex]);

    // How many base devices the sweep needs.
    let base_count = match sweep.variable.as_str() {
        "device_count" => {
            let mut max = 0u64;
            for &v in &sweep.values {
                max = max.max(integer_sweep_value(v)?);
            }
            max as usize
        }
        _ => 0,
    };

    let seeds: Vec<DeviceSeed> = if !spec.devices.is_empty() {
        spec.devices
            .iter()
            .map(|d| match (d.distance_m, d.gain) {
                (Some(distance_m), None) => DeviceSeed::Geometry {
                    distance_m,
                    fading: d.fading.unwrap_or(1.0),
                },
                (None, Some(g)) => DeviceSeed::Gain(g),
                _ => unreachable!("parse_spec validated device entries"),
            })
            .collect()
    } else {
        let gen = spec.generator.clone().unwrap_or_else(|| {
            let count = match (spec.scenario, sweep.variable.as_str()) {
                (_, "device_count") => base_count.max(1),
                (Scenario::SingleDeviceSurface, _) => 1,
                (Scenario::AddedDeviceSweep, _) => 16,
                _ => 30,
            };
            GeneratorSpec {
                count,
                distance_min: default_distance_min(),
                distance_max: default_distance_max(),
                seed: default_seed(),
            }
        });
        let seed = seed_override.unwrap_or(gen.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let homogeneous = spec.scenario == Scenario::DeviceCountSweep && spec.generator.is_none();
        (0..gen.count)
            .map(|_| {
                let distance_m = if homogeneous {
                    gen.distance_max
                } else {
                    gen.distance_min + (gen.distance_max - gen.distance_min) * rng.random::<f64>()
                };
                DeviceSeed::Geometry {
                    distance_m,
                    fading: 1.0,
                }
            })
            .collect()
    };

    if sweep.variable == "device_count" && seeds.len() < base_count {
        return Err(ConfigError::Invalid(format!(
            "device_count sweep needs {base_count} devices, spec provides {}",
            seeds.len()
        )));
    }
    if sweep.variable == "m_r_scale" {
        for &v in &sweep.values {
            if !(v > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "m_r_scale values must be positive, got {v}"
                )));
            }
        }
    }
    if sweep.variable == "added_distance" {
        for &v in &sweep.values {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "added_distance values must be positive, got {v}"
                )));
            }
        }
    }
    if seeds.is_empty() {
        return Err(ConfigError::Invalid("no devices configured".into()));
    }

    let mut sim = spec.sim;
    if let Some(s) = seed_override {
        sim.seed = s;
    }

    Ok(RunPlan {
        scenario: spec.scenario,
        params: spec.params.clone(),
        sweep_variable: sweep.variable,
        sweep_values: sweep.values,
        methods,
        seeds,
        sim,
        out_base: spec.output.path.clone(),
        format: spec.output.format,
    })
}

/// Cell parameters at one sweep point.
pub fn params_at(
    base: &SystemParams,
    variable: &str,
    value: f64,
) -> Result<SystemParams, ConfigError> {
    let mut p = base.clone();
    match variable {
        "mu" => p.mu = value,
        "p_c_dbm" => p.p_c_dbm = value,
        "h_i_db" => p.h_i_db = value,
        "sigma2_dbm" => p.sigma2_dbm = value,
        "eta" => p.eta = value,
        "bandwidth_hz" => p.bandwidth_hz = value,
        "eps_max" => p.eps_max = value,
        "gamma_th" => p.gamma_th = value,
        "d_bits" => {
            let bits = integer_sweep_value(value)?;
            p.d_bits = u32::try_from(bits)
                .map_err(|_| ConfigError::Invalid(format!("d_bits {bits} out of range")))?;
        }
        _ => return Ok(p), // scenario-level variables leave the cell alone
    }
    p.validate().map_err(|e| {
        ConfigError::Invalid(format!("sweep point {variable}={value} is invalid: {e}"))
    })?;
    Ok(p)
}
