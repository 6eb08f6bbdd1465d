//! Unpaired 1D signal-to-signal translation with a small CycleGAN.
//!
//! The crate covers the full pipeline: a seeded synthetic dataset of
//! bandlimited sine mixtures ([`dataset`]), a tape-based autodiff core
//! ([`autodiff`]), layers and Adam ([`nn`]), the U-Net generator and
//! PatchGAN discriminator ([`models`]), the CycleGAN training loop
//! ([`cyclegan`]), time/frequency scoring ([`eval`]) and the command-line
//! front end ([`cli`]).

pub mod autodiff;
pub mod cli;
pub mod cyclegan;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;

pub use error::{Error, Result};
