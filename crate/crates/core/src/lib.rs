//! Constrained flight-control servo toolkit.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod design;
pub mod margins;
pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod numerics;
pub mod simulate;
pub mod units;

pub use error::{Error, Result};
