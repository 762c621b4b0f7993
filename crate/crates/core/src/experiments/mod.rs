//! Evaluation harness: stream preparation, seeded sweeps, and CSV reports.

pub mod config;
pub mod report;
pub mod runner;
pub mod stream;

pub use config::{DetectionOptions, ExperimentConfig, Method};
pub use report::{accuracy_percent, emit_report, mean_distance, render_report, ReportMode};
pub use runner::{
    audit_budgets, derive_seed, prepare_stream, run_detection_trials, run_reconstruction_sweep,
    BudgetAudit, TrialReport,
};
pub use stream::{build_periodic_stream, load_csv_column, StreamSpec, Waveform};
