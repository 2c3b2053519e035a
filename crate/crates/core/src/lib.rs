//! Numerical laboratory for convex geometry over log-concave probability
//! measures: L_p centroid bodies, logarithmic Laplace transforms, tilted
//! measures, isotropic constants, the q♯ parameter family, and a suite of
//! named quantitative checks with reported empirical constants.
//!
//! Everything is deterministic: every Monte Carlo quantity is a pure
//! function of `(inputs, seed)`, and uncertainty is tracked through batch
//! standard errors on [`estimate::Estimate`].

pub mod bodies;
pub mod centroid;
pub mod error;
pub mod estimate;
pub mod hull;
pub mod loglaplace;
pub mod measures;
pub mod metrics;
pub mod quad;
pub mod rng;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use estimate::Estimate;
pub use measures::{Measure, MeasureSpec, WeightedSample};
