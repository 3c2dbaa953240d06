//! Numerical laboratory for likelihood-based estimation of multi-class
//! conditional probabilities with dense ReLU + softmax networks.
//!
//! The crate combines four strands:
//!
//! - **Estimation**: synthetic composition-structured truths ([`models`]),
//!   data sampling ([`datagen`]), dense networks with exact gradients
//!   ([`network`]) and projected adaptive-moment fitting ([`training`]).
//! - **Measurement**: simplex divergences and integrated risks under an
//!   input law ([`metrics`]).
//! - **Calculation**: closed-form covering/entropy/oracle bound evaluators
//!   and rate formulas ([`theory`]).
//! - **Stress construction**: a packed hard-instance family with quadrature
//!   verification of its separation and KL budget ([`minimax`]).
//!
//! [`harness`] orchestrates rate studies across sample-size grids and
//! seeds, with deterministic, cacheable cells. The `npmle-lab` binary
//! exposes the whole lab as CLI subcommands.

pub mod datagen;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod minimax;
pub mod models;
pub mod network;
pub mod rng;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
