//! Bayesian spatial autoregressive graphical models on lattice data.
//!
//! Observations live on a lattice of locations, each carrying one of two
//! category labels. Values at a location are driven by within-location
//! conditional dependencies (a precision matrix under a graphical horseshoe
//! prior) plus asymmetric spatial effects from neighbouring locations of the
//! other category (a pair of effect matrices under normal or normal-gamma
//! priors, estimated by Metropolis-Hastings within Gibbs subject to a
//! spectral stability condition).
//!
//! The crate provides the lattice/weight machinery, the exact likelihood,
//! the samplers, a simulation and metrics harness, and spatial chain graph
//! export. The `sargraph` binary wires these into `simulate`, `fit`,
//! `metrics`, `export-graph` and `replicate-study` subcommands.

pub mod config;
pub mod dist;
pub mod gibbs;
pub mod graph;
pub mod horseshoe;
pub mod lattice;
pub mod likelihood;
pub mod metrics;
pub mod params;
pub mod simulate;
pub mod spatial_mh;
pub mod study;

mod error;
pub mod linalg;

pub use error::{Error, Result};
