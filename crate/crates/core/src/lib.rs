//! Estimation and inference on intersection bounds.
//!
//! A bound-generating function is estimated on a grid, the near-optimal
//! set is estimated, and the optimum of the precision-corrected curve is
//! reported together with one- and two-sided confidence statements.

pub mod argmin;
pub mod critical;
pub mod data;
pub mod discrete;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod linalg;
pub mod montecarlo;
pub mod pipeline;
pub mod rng;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
pub use nalgebra;
