//! Stochastic submodeling of the 2D wave equation.
//!
//! The pipeline couples a finite-element wave solver on a full domain with a
//! Dirichlet-driven submodel on a zone of interest. Neural generators (a
//! deterministic convolutional regressor and a Wasserstein GAN with gradient
//! penalty) learn boundary traces around the zone, the submodel turns those
//! traces into physically consistent interior fields, and a Monte-Carlo
//! harness quantifies parametric and non-parametric uncertainty.

pub mod autodiff;
pub mod config;
pub mod container;
pub mod dataset;
pub mod error;
pub mod fem;
pub mod forest;
pub mod grid;
pub mod lhs;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod pod;
pub mod report;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
