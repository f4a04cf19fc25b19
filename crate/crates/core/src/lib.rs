//! Multi-scale robust design of a laminated composite plate.
//!
//! Fiber volume fraction, ply thicknesses and in-plane load are uncertain.
//! The crate homogenizes the ply, solves the laminate with classical
//! laminate theory, propagates input scatter by Monte Carlo, ranks inputs
//! with polynomial-chaos Sobol indices and searches for designs that trade
//! the mean of the ply shear stress against its standard deviation.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod laminate;
pub mod materials;
pub mod optimizer;
pub mod output;
pub mod pipeline;
pub mod sensitivity;
pub mod stochastic;

pub use error::{Error, Result};
