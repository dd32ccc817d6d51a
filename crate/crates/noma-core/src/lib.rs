//! Error analysis of two-user uplink power-domain NOMA with dynamic SIC.
//!
//! The crate is `no_std` with `alloc`. It carries the special functions, the
//! ordered-channel statistics, the Gaussian-mixture fits of truncated real
//! parts, the closed-form pairwise error probabilities and a Monte Carlo link
//! simulator. File formats, the CLI and thread pools live in the `noma-sic`
//! companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod channel;
mod error;
pub mod gaussfit;
pub mod modem;
pub mod numerics;
pub mod simcore;

pub use error::{Error, Result};

/// Converts a decibel value to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Converts a linear ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * libm::log10(x)
}
