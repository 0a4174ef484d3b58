#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

//! Simulation laboratory for two-species competition on `Z^d` and its
//! parent processes, Richardson growth and the voter model.

pub mod analytics;
pub mod dual;
pub mod engine;
pub mod error;
pub mod fpp;
pub mod harness;
pub mod lattice;
pub mod media;
pub mod oracle;
pub mod topology;

pub use error::{Error, Result};
