//! Corruption-robust contextual search.
//!
//! A learner repeatedly sees a unit context `u`, guesses `<u, θ*>` for a hidden
//! target `θ*`, and observes only the sign of its error, where the target may
//! have been shifted by an adversarial corruption `z`. This crate provides:
//!
//! - [`density`]: factorized densities over the unit ball with Monte Carlo
//!   estimators (halfspace mass, total mass, centroid).
//! - [`median`]: ψ-ratio bisection for standard and ε-window medians.
//! - [`learner`]: the ε-window median and log-concave centroid learners, plus
//!   plain-median and online-gradient-descent baselines.
//! - [`env`]: the adversarial environment (contexts, corruption policies, feedback).
//! - [`oracle`]: exact one-dimensional densities, potentials, per-round case
//!   checks, and regret certificates.
//! - [`harness`]: experiment configuration, the interaction loop, sweeps, and
//!   CSV/JSON emission.

pub mod density;
pub mod env;
pub mod harness;
pub mod learner;
pub mod median;
pub mod model;
pub mod oracle;

mod error;
mod rng;

pub use error::{Error, Result};
