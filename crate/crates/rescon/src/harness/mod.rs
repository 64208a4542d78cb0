//! Experiment orchestration: configs, deterministic seeding, Monte Carlo
//! sweeps over (trust regime, gamma) grids, trace persistence with exact
//! replay, and figure-data export.
//!
//! Determinism contract: one master seed fans out through fixed-increment
//! seed derivation to every (regime, gamma, run) cell and, within a run, to
//! separate topology/initial-state/dynamics streams. Results are identical
//! whether cells execute serially or on a thread pool.

pub mod config;
pub mod figures;
pub mod seed;
pub mod sweep;
pub mod trace;

pub use config::ExperimentConfig;
pub use figures::{emit_figure_data, FigureKind, FIGURE_CSV_HEADER};
pub use seed::{run_seed, splitmix64, sub_seed, DYNAMICS_STREAM, TOPOLOGY_STREAM, X0_STREAM};
pub use sweep::{
    draw_x0, execute_run, run_experiment, run_experiment_serial, run_experiment_with_threads,
    trace_filename, CellStats, RunOutcome, SweepResult, SWEEP_CSV_HEADER,
};
pub use trace::{read_trace, replay_trace, write_trace, ReplayReport, TraceMeta, TRACE_CSV_HEADER};
