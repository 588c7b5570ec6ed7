//! Bearing-only formation control of single-integrator agents with
//! elevation-angle sensing and adaptive rejection of constant disturbances.
//!
//! - [`geometry`]: private agent frames and bearing vectors
//! - [`graph`]: sensing graph, incidence matrix, leader/follower split
//! - [`elevation`]: rod/ball elevation sensing, `f_E`, `R_E`, rank test
//! - [`controller`]: the per-follower control law and estimator
//! - [`scenario`], [`config`]: experiment descriptions and their files
//! - [`sim`]: fixed-step closed-loop integration
//! - [`analysis`]: Lyapunov and finite-time decay diagnostics
//! - [`output`]: CSV, plot data and summaries

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod controller;
pub mod elevation;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod output;
pub mod par;
pub mod scenario;
pub mod shapes;
pub mod sim;

pub use error::{
    AnalysisError, ConfigError, ControlError, EdgeFault, GeometryError, GraphError, SimError,
};
pub use geometry::{Mat3, Vec3};
pub use par::Execution;
