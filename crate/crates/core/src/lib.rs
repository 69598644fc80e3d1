//! Follow-the-regularized-leader over finite expert classes with linearly
//! decomposable regularizers `D_f(x) = Σ ν_i f(x_i)`.

pub mod baselines;
pub mod domain;
pub mod engine;
pub mod environments;
pub mod error;
pub mod metrics;
pub mod regularizers;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
