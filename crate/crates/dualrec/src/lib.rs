//! A desk-scale laboratory for dual reconstruction training.
//!
//! Work in progress; module map and examples are documented in README.md.

pub mod dist;
pub mod error;
pub mod harness;
pub mod mi_est;
pub mod model;
pub mod objectives;
pub mod optim;
pub mod space;
pub mod synth;
pub mod train;
pub mod theory;

pub use error::{Error, Result};
