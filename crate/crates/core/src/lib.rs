//! Uplink clustered cell-free massive MIMO simulation.
//!
//! The pipeline per Monte Carlo realization: drop APs and users
//! ([`geometry`]), draw large-scale and small-scale fading, assign pilots
//! ([`pilot`]), cluster APs by channel correlation and pick each user's
//! serving cluster ([`clustering`]), choose pilot powers ([`solver`]) and
//! evaluate per-user spectral efficiency ([`power`]). [`harness`] repeats
//! this across realizations and [`report`] writes the results.

pub mod clustering;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod pilot;
pub mod power;
pub mod report;
pub mod solver;

pub use config::SimConfig;
pub use error::{Error, Result};
pub use harness::{monte_carlo, run_realization, ExperimentSpec, SeSampleSet};
