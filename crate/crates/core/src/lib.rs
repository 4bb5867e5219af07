//! Signal-to-noise and scan-rate model of a cavity haloscope read out through
//! a parametrically coupled amplifier mode, plus a lumped-element circuit model
//! for deriving the coupling rates from hardware.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod cli;
pub mod error;
pub mod four_mode;
pub mod langevin_core;
pub mod network;
pub mod quadrature;
pub mod scanrate;

pub use error::{Error, Result};
