//! Feasibility analysis for correlated sources over multiple-access relay channels.
//!
//! The crate evaluates sufficient and necessary conditions for lossless
//! transmission, searches input distributions on probability grids under
//! maximal-correlation constraints, and simulates the zero-error scheme for
//! deterministic primitive semi-orthogonal channels.

// `!(x >= 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod models;
pub mod necessary;
pub mod objectives;
pub mod prob;
pub mod random;
pub mod regress;
pub mod scenario_file;
pub mod search;
pub mod sim;
pub mod spectral;
pub mod sufficient;

pub use error::{Error, Result};
