//! Training-methodology toolkit for super-convergence experiments.
//!
//! The crate is organised bottom-up:
//!
//! * [`schedules`]: learning-rate and momentum policies (CLR, 1cycle,
//!   piecewise, inv/exp, SGDR-style cosine) as pure functions of the
//!   iteration index.
//! * [`optim`]: SGD with classical/Nesterov momentum and coupled weight
//!   decay, AdaGrad, AdaDelta, Adam, and the SGD noise-scale diagnostic.
//! * [`nn`]: a small dense network with hand-written backward passes,
//!   batch normalization, dropout and a finite-difference gradient checker.
//! * [`estimator`]: the three-iterate optimal learning-rate estimate with
//!   absolute-value aggregation and moving-average smoothing.
//! * [`range_test`]: the LR range test and CLR bound suggestion.
//! * [`data`]: MNIST IDX loading, balanced subsetting, synthetic oracles.
//! * [`harness`]: config-driven training runs, comparisons and sweeps.

pub mod data;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod nn;
pub mod optim;
pub mod schedules;

pub use error::{Error, Result};
