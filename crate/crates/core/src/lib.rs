//! Simulation, design and control of a single-switch regulated class-E
//! receiver for inductive power transfer.

pub mod analytic;
pub mod circuit;
pub mod cli;
pub mod config;
pub mod control;
pub mod design;
pub mod error;
pub mod modulator;
pub mod sim;

pub use error::{Error, Result};
