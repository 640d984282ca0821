//! Train small spiking networks with surrogate gradients, run them on a
//! cycle-level model of an event-driven accelerator, and sweep training
//! hyperparameters to trace the accuracy/latency trade-off.

pub mod cli;
pub mod dse;
pub mod error;
pub mod events;
pub mod hwsim;
pub mod metrics;
pub mod quant;
pub mod snn;
pub mod surrogate;
pub mod trainer;

pub use error::{Error, Result};
