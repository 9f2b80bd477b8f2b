//! Transient dynamics of power grids and a frequency-domain neural surrogate.
//!
//! The crate is split along the pipeline it implements:
//!
//! - [`powerdyn`]: network model, staged fault scenarios and a fixed-step
//!   RK4 integrator for the swing/flux-decay equations.
//! - [`datagen`]: randomized scenario sampling, stability labelling and the
//!   3D/4D sample frames consumed by the models.
//! - [`numcore`]: dense tensors, multi-dimensional DFTs and a tape-based
//!   reverse-mode differentiation engine.
//! - [`fno`]: the 3D Fourier neural operator, a dense baseline and the
//!   Adam training loop.
//! - [`evalmetrics`]: trajectory accuracy, stability-classification and
//!   envelope metrics.
//!
//! The crate is `no_std` (alloc required); IO, file formats and the CLI
//! live in the companion `gridfno` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod datagen;
pub mod error;
pub mod evalmetrics;
pub mod fno;
pub mod numcore;
pub mod powerdyn;

pub use error::{CoreError, Result};
