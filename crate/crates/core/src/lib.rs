//! Update scheduling for wirelessly powered sensor clusters that send
//! short status packets.
//!
//! Devices harvest radio energy from a shared power beacon, then take
//! turns transmitting fixed-size updates. Short packets decode with a
//! blocklength-dependent error probability, failed updates leave stale
//! data, and every symbol spent charging or transmitting ages everyone's
//! picture of the world. This crate models that trade and schedules
//! around it:
//!
//! - [`fbl`]: decode error probability and certified-convexity region for
//!   finite blocklengths.
//! - [`link`]: radio, energy-harvesting and SNR bookkeeping.
//! - [`aoi`]: closed-form time-average age of information per device.
//! - [`solver`]: single-device and min-max cluster optimizers over charge
//!   and update durations.
//! - [`cluster`]: capacity analysis, the low-complexity assembly
//!   scheduler, integer rounding and time-indexed schedules.
//! - [`sim`]: Monte Carlo validation of the closed forms, a brute-force
//!   lattice benchmark and the Shannon-capacity baseline.

pub mod aoi;
pub mod cluster;
pub mod fbl;
pub mod link;
mod scalar;
pub mod sim;
pub mod solver;

pub use aoi::{avg_aoi, event_area, event_probability, AoiError, UpdateRound};
pub use cluster::{
    algorithm1, cluster_capacity, reconstruct_schedule, round_policy, validate_schedule,
    CapacityReport, ScheduleError, ScheduleViolation, Slot, TimeSchedule, ValidationReport,
};
pub use fbl::{
    convexity_condition, dispersion, error_probability, omega, q_func, shannon_capacity,
    FblError, FblPoint, EPS_FLOOR,
};
pub use link::{
    db_to_linear, dbm_to_watts, harvested_energy, linear_to_db, make_device, rayleigh_fading,
    snr, watts_to_dbm, Device, EnergyModel, LinearHarvest, LinkError, NoiseMode, SystemParams,
};
pub use sim::{
    exhaustive_search, ibl_baseline, simulate, DeviceSim, GridSpec, SimConfig, SimError,
    SimResult, WARMUP_ROUNDS,
};
pub use solver::{
    gradient_of_eps, solve_fixed_round, solve_minmax, solve_single, AllocationPolicy,
    DeviceMetrics, SingleSolution, SolveError, SolveReport, SolveStatus, SolverOptions,
};
