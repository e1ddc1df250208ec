//! Stochastic neighbour embedding with a heavy-tailed kernel family.
//!
//! The low-dimensional similarity kernel is
//!
//! ```text
//! k(d) = (1 + d²/α)^(−α)
//! ```
//!
//! which interpolates between the Gaussian kernel of SNE (α → ∞), the Cauchy
//! kernel of standard t-SNE (α = 1) and kernels with tails heavier than any
//! Student-t distribution (α < 1/2). Lowering α increases the separation of
//! clusters in the embedding and can bring out finer sub-cluster structure.
//!
//! The crate is `no_std` + `alloc`. With the default `std` feature the
//! per-point loops are spread over a rayon thread pool; results are identical
//! either way because every per-point sum runs in a fixed order and global
//! reductions are folded sequentially.
//!
//! Layout:
//! - [`kernel`]: kernel values and the attraction/repulsion weights
//! - [`affinity`]: neighbour search, perplexity calibration, symmetric P
//! - [`gradient`]: attractive and repulsive forces, KL divergence
//! - [`optimizer`]: gradient descent with exaggeration, momentum and gains
//! - [`metrics`]: k-NN preservation, separation ratio, DBSCAN
//! - [`experiments`]: toy data generators, two-cluster theory, α sweeps
//! - [`pca`]: principal components used for initialisation and reduction
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod affinity;
pub mod data;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod gradient;
pub mod kernel;
pub mod metrics;
pub mod optimizer;
pub mod pca;

mod math;
mod par;

pub use data::{DataMatrix, Embedding};
pub use error::{Error, Result};
pub use kernel::{KernelParams, KernelVariant};
pub use par::Execution;
