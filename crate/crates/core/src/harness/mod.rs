//! Experiment configuration, the interaction loop, sweeps, and result files.

mod config;
mod emit;
mod run;
mod sweep;

pub use config::{ConfigFile, ExperimentConfig, DEFAULT_SAMPLES, SWEEP_AXES};
pub use emit::{emit_results, emit_sweep, read_reports, read_round_rows, read_summaries, round_rows, Format, RoundRow};
pub use run::{regret_bound, run_experiment, run_id, run_single, verify_report, RunReport, RunSummary};
pub use sweep::{sweep, SweepCell, SweepTable};
