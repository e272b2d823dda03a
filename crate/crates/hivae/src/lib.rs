//! Goal inference on spatial graphs with a hierarchical
//! belief-desire-intention VAE.
//!
//! The crate bundles everything needed to reproduce the pipeline at desk
//! scale on CPU:
//!
//! - [`graph`]: spatial graphs, a seeded synthetic generator, and
//!   deterministic shortest / k-shortest path queries
//! - [`sim`]: synthetic pedestrian episodes from Dirichlet agent preferences
//! - [`tensor`]: a reverse-mode autodiff tape over dense `f64` arrays
//! - [`nn`]: transformer trajectory encoder, graph attention layers, fusion
//! - [`model`]: the hierarchical VAE, its composite loss, and training
//! - [`baselines`]: BToM, Extended BToM, GRU, LSTM, and a ToMNet-style model
//! - [`eval`]: Brier curves, false-goal probes, preference-drift deltas, and
//!   the Wilcoxon signed-rank test
//! - [`cli`]: the `hivae` binary's subcommands and run configuration
//!
//! See the crate `examples/` directory for one runnable example per
//! capability.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
