//! Fault diagnosis on vibration time series through DTW similarity graphs.
//!
//! The pipeline, one module per stage:
//!
//! - [`segmentation`]: entropy-driven window selection and overlapping segments
//! - [`features`]: the 10-dimensional per-segment feature vector and min-max scaling
//! - [`graph`]: DTW distances and thresholded similarity graphs
//! - [`gae`]: variational graph autoencoder (graph attention + neighbor transformer)
//! - [`ensemble`]: four base classifiers and a soft-voting combination
//! - [`stats`]: classification metrics and significance tests
//! - [`data`] and [`pipeline`]: ingestion, configuration, and end-to-end runs
//!
//! Everything trains on [`autodiff`], a small reverse-mode engine over dense
//! `f64` matrices.

// `!(x > 0.0)` is how parameter checks reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod gae;
pub mod graph;
pub mod pipeline;
pub mod segmentation;
pub mod stats;

pub use error::{Error, Result};
