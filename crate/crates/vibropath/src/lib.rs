//! Structure-borne vibration transfer path analysis.

pub mod dataset;
pub mod error;
pub mod filter;
pub mod order;
pub mod signal;
pub mod tpa;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
