//! Delay bounds and simulation for platoons that mix a contention-based
//! cellular broadcast channel with multi-hop mmWave relaying.

pub mod cellular;
pub mod cli;
pub mod control;
pub mod hybrid;
pub mod mmwave;
pub mod nn;
pub mod error;
pub mod experiments;
pub mod predictor;
pub mod presets;
pub mod sim;
pub mod snc;
pub mod surrogate;

pub use error::{Error, Result};
