//! Experiment runner around the scheduling library: spec files in,
//! figure-data tables out. The binary in this crate is a thin wrapper
//! over [`config::parse_spec`], [`config::resolve`], [`runner::execute`]
//! and [`output::write_outputs`].

pub mod config;
pub mod output;
pub mod runner;
