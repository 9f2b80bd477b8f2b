//! Command-line pipeline around `gridfno-core`: staged transient
//! simulation, dataset generation, surrogate training, prediction,
//! evaluation, and benchmarking, with deterministic binary artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use config::{LoadedConfig, RunConfig};
pub use error::{AppError, Result};
