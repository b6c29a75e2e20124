//! Sparse varying-coefficient regression with Bayesian tree ensembles.
//!
//! The model is `y_i = beta_0(z_i) + sum_j beta_j(z_i) x_ij + sigma e_i`,
//! where each `beta_j` is a sum of regression trees over the modifiers
//! `z in [0, 1]^R`. Leaf jumps carry a regularized-horseshoe prior with one
//! local scale per coefficient, and split axes are drawn from sparse
//! Dirichlet split probabilities. [`gibbs::Model`] runs the
//! Metropolis-within-Gibbs sampler; [`summary`] turns chains into intervals,
//! screening decisions and metrics.
//!
//! Every numeric type is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the usual `f64` choice.

pub mod data;
pub mod error;
pub mod gibbs;
pub mod prior;
pub mod sampling;
pub mod scalar;
pub mod summary;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Dataset = data::Dataset<f64>;
pub type Model = gibbs::Model<f64>;
pub type ChainState = gibbs::ChainState<f64>;
pub type ChainOutput = gibbs::ChainOutput<f64>;
pub type Hyperparameters = prior::Hyperparameters<f64>;
pub type SamplerOptions = gibbs::SamplerOptions<f64>;
pub type DecisionTree = tree::DecisionTree<f64>;
pub type SummaryReport = summary::SummaryReport<f64>;
