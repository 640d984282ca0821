//! Cycle-level model of an event-driven, sparsity-aware SNN accelerator.
//!
//! A priority encoder walks the active input spikes, an address generator
//! maps each to the output neurons and weights it reaches, and `P` neural
//! cores share the accumulate and update work. Membranes use the same
//! fixed-point arithmetic as [`crate::snn::forward_fixed`], so the spike
//! outputs are bit-identical to that dense reference.

pub mod config;
pub mod report;
pub mod sim;
pub mod units;

pub use config::{HwConfig, OpCosts, UpdateOps};
pub use report::{report_csv, write_report, CSV_COLUMNS};
pub use sim::{
    analytic_latency, conv_workload, simulate_layer, simulate_network, simulate_quantized,
    LayerSim, LayerSimReport, OpCounts, SimReport, SimResult, StepStats,
};
pub use units::{agu_targets, penc_scan, AguTargets};
