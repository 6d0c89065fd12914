//! Grid sweeps over the training sandbox and the run store they write to.

pub mod config;
pub mod grid;
pub mod runner;
pub mod store;
pub mod synthetic;

pub use config::{DatasetConfig, GridConfig, ModelConfig, SweepConfig, TrainDefaults, KNOWN_AXES};
pub use grid::{expand_grid, run_id, Assignment, HyperGrid, SEED_OFFSET_AXIS};
pub use runner::{
    compute_store_measures, resume, run_sweep, MeasureSummary, PlannedRun, RunState, SweepManifest, SweepSummary,
};
pub use store::{load_config, load_measure_log, load_records, MeasureEntry, Store};
pub use synthetic::{planted_records, synthetic_record, Planted};
