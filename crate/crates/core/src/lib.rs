//! Two-timescale IRS phase optimization for outdated-CSI MIMO links.
//!
//! The crate models a BS-IRS-UE downlink with Rician fading and AR(1)
//! channel ageing, an SVD-precoded zero-forcing transceiver, and several
//! particle-swarm searches over the IRS phases driven by sample-based or
//! statistics-based fitness functions.

pub mod channel;
pub mod config;
pub mod error;
pub mod evaluator;
pub mod fitness;
pub mod harness;
pub mod linalg;
pub mod pso;
pub mod rng;
pub mod transceiver;
pub mod waterfill;

pub use config::{load_config, PowerCsiMode, SystemConfig};
pub use error::{Error, Result};
pub use transceiver::{PrecoderState, ReflectionConfig};
pub use waterfill::{waterfill, PowerAllocation};
