//! Equilibrium Propagation on convergent RNNs with modern-Hopfield attention.
//!
//! - [`hopfield`]: log-sum-exp energy, one-step retrieval, attention form
//! - [`network`]: model spec, parameters, the scalar primitive `φ` and the
//!   synchronous transition dynamics
//! - [`training`]: two-phase, symmetric and truncated EP estimators, the
//!   local weight update, Adam and the epoch loop
//! - [`oracle`]: unrolled BPTT with hand-derived jacobians, finite
//!   differences, gradient comparison reports and the seeded toy suite
//! - [`data`]: synthetic cluster task, word-embedding files, IMDB/SNLI loaders

pub mod data;
pub mod error;
pub mod hopfield;
pub mod network;
pub mod oracle;
pub mod training;

pub use error::{Error, Result};
