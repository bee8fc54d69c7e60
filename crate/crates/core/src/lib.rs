//! Frequentist confidence intervals for linear functionals of constrained
//! linear-Gaussian inverse problems, calibrated by sampling a data-anchored
//! Berger–Boos set and estimating the null LLR quantile surface on it.

pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod intervals;
pub mod ipm;
pub mod model;
pub mod optim;
pub mod quantiles;
pub mod samplers;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{BergerBoosSet, FunctionalExtremes, Polytope};
pub use intervals::{IntervalResult, Method};
pub use model::{EigenStructure, LinearGaussianProblem, Observation};
