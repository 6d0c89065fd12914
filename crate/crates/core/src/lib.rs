//! Generalization-measure engine.
//!
//! Trains small MLPs over hyperparameter grids, evaluates a catalog of
//! generalization measures on each trained model, and scores how well each
//! measure ranks IID and shifted generalization gaps.

pub mod autodiff;
pub mod error;
pub mod exec;
pub mod measures;
pub mod rng;
pub mod sandbox;
pub mod serde_real;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
pub use exec::Execution;
