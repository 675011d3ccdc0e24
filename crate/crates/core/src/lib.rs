//! Locating the source of a diffusion process on a network from the arrival
//! times and directions measured at a sparse set of observer nodes.
//!
//! - [`graph`]: graphs, generators, BFS trees, tree paths.
//! - [`diffusion`]: cascade simulation and observer measurements.
//! - [`estimator`]: Gaussian maximum-likelihood source estimation.
//! - [`placement`]: observer selection.
//! - [`experiments`]: Monte Carlo harness.

pub mod diffusion;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod graph;
pub mod placement;
pub mod rng;

pub use error::{Error, Result};
