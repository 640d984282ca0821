//! Grid sweeps over training hyperparameters: each trial trains, quantizes,
//! simulates and records one configuration, persisted under its config hash.

mod rank;
pub mod report;
mod spec;
mod sweep;
mod trial;

pub use rank::{rank_trials, RankPolicy};
pub use report::{collect_records, pareto_svg, records_csv, svg_position, RECORD_COLUMNS};
pub use spec::{stepped_grid, Phase, SweepSpec, BETA_BOUNDS, SLOPE_BOUNDS, THRESHOLD_BOUNDS};
pub use sweep::{
    index_csv, run_sweep, SweepOptions, SweepOutcome, INDEX_COLUMNS, INDEX_FILE, SWEEP_FILE,
    TRIAL_FILE,
};
pub use trial::{config_hash, run_trial, TrialOutcome, TrialResult};
