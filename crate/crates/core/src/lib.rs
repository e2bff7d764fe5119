//! Bayesian variational optimization (BVO) for black-box minimization over
//! binary and categorical search spaces.
//!
//! A mean-field Bayesian neural network is fitted to the evaluated points,
//! one weight vector is drawn from its posterior (Thompson sampling), and the
//! acquisition under that draw is maximized by gradient ascent on the logits
//! of a concrete (Gumbel-softmax) proposal over the discrete inputs. The
//! best discretized candidate is evaluated and the loop repeats.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, subprocesses or wall-clock time lives in the companion `bvo`
//! crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acquisition;
pub mod adam;
pub mod baselines;
pub mod benchmarks;
pub mod diffcore;
mod error;
pub mod math;
pub mod optimizer;
pub mod relaxation;
pub mod rng;
pub mod space;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
pub use optimizer::{run_bvo, BvoConfig, Objective, OptimizationTrace, TraceRecord};
pub use space::{HardAssignment, SearchSpace};
