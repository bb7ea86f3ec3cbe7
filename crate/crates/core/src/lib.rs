//! Clutter suppression for co-pulsing frequency diverse array radar.
//!
//! Physical snapshots from co-prime sensors, frequency offsets and pulses are
//! lifted to the difference coarray, where the clutter rank has a closed form
//! and a Slepian basis gives a low-rank model with a cheap inverse.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod coprime;
pub mod covariance;
pub mod error;
pub mod linalg;
pub mod rank;
pub mod rejection;
pub mod scene;
pub mod slepian;
pub mod stap;

pub use error::{Error, Result};
