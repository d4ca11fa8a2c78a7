//! Multi-view clustering by bi-level decoupling and consistency learning.
//!
//! Each view gets its own autoencoder. A contrastive head aligns samples
//! across views and a clustering head produces per-view soft assignments.
//! These are trained to agree across views and with noisy neighbors, while
//! the embedding dimensions and the clusters are pushed towards mutual
//! orthogonality. Training runs in two phases: reconstruction-only
//! pretraining, then the joint objective.
//!
//! Modules:
//! - [`model`]: network definition and forward pass
//! - [`losses`]: every objective term plus the weighted total
//! - [`trainer`]: the two training phases, prediction and evaluation
//! - [`checkpoint`]: binary model snapshots
//! - [`data`]: datasets, the on-disk format, synthetic generation, normalization
//! - [`metrics`]: ACC / NMI / purity and coupling diagnostics
//! - [`kmeans`]: k-means baseline on raw features
//! - [`config`] and [`cli`]: run configuration and command implementations

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod kmeans;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod trainer;

pub use diffcore::{Matrix, Real};
pub use error::{BdclError, Result};
