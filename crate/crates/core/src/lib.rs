//! Performance analysis of links assisted by distributed intelligent
//! reflecting surfaces (IRSs) over Nakagami-m fading.
//!
//! The crate has two halves that check each other:
//!
//! * closed-form statistics of the optimal received SNR ([`snr`]) and the
//!   metrics built on them ([`metrics`]): outage, rate bounds, average SER,
//!   diversity order, array gain and an imperfect-CSI rate bound;
//! * an exact Monte-Carlo simulator of the same system ([`monte_carlo`]).
//!
//! [`experiment`] ties both together into reproducible CSV sweeps.

// `!(x > 0.0)` rejects NaN on purpose; coefficient tables keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod channel;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod monte_carlo;
pub mod quadrature;
pub mod snr;
pub mod special;

pub use error::{Error, Result};

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
