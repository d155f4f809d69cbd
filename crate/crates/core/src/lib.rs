//! Variational-circuit training with negative-learning-rate steps.
//!
//! * [`qsim`]: dense state-vector simulator.
//! * [`ansatz`]: layered rotation/CNOT ansatz, amplitude encoding, losses.
//! * [`autodiff`]: parameter-shift gradients and a finite-difference oracle.
//! * [`optim`]: the negative-learning-rate optimizer and its baselines.
//! * [`landscape`]: analytic plateau testbeds and diffusion statistics.
//! * [`datagen`]: synthetic two-Gaussian data and a CSV loader.

pub mod ansatz;
pub mod autodiff;
pub mod datagen;
pub mod landscape;
mod error;
pub mod optim;
pub mod qsim;
pub mod rng;

pub use error::{Error, Result};
