//! Rank-minimizing transmit covariance design for underlay MIMO cognitive
//! radio, with Monte Carlo evaluation and analytic outage bounds.
//!
//! The crate is organized bottom-up: [`numerics`] provides the dense complex
//! linear algebra and seeded sampling, [`channel`] draws network realizations
//! and pre-whitens the secondary link, [`waterfilling`] and [`precoders`]
//! design the secondary covariance, [`downlink`] extends the design to a
//! block-diagonalized multiuser broadcast, [`metrics`] evaluates the primary
//! and secondary figures of merit, [`outage`] computes analytic outage
//! bounds, and [`harness`] runs seeded experiments.

pub mod channel;
pub mod downlink;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod outage;
pub mod precoders;
pub mod waterfilling;

pub use error::{Error, Result};
pub use numerics::ComplexMatrix;
