//! Multi-objective complementary control for linear plants.
//!
//! A nominal tracking controller `C` and a robust controller `K` are merged
//! through a Youla-type compensator `Q` into the composite `C + αQ`, which
//! reduces to `K` at `α = 1` while keeping the tracking behaviour of `C`
//! in the absence of disturbances.

pub mod analysis;
pub mod baselines;
pub mod controller;
pub mod error;
pub mod es;
pub mod feedforward;
pub mod linalg;
pub mod lti;
pub mod riccati;
pub mod sim;
pub mod signal;
pub mod youla;

pub use error::{Error, Result};
