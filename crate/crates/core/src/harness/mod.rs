//! Seeded parameter sweeps, reports and power-law fits.

mod config;
mod fit;
mod record;
mod run;

pub use config::{DegreeSpec, ExperimentConfig, ProfileModel, ProfileSpec};
pub use fit::{fit_scaling, median, DegreeMedian, FitField, ScalingFit, MIN_DEGREES, MIN_TRIALS};
pub use record::{emit_report, load_report, parse_csv_report, parse_json_report, render_report, ExperimentRecord, ReportFormat, COLUMNS};
pub use run::{
    report_paths, run_experiment, ExperimentOutcome, RunManifest, TrialTiming, MANIFEST_JSON, RECORDS_CSV, RECORDS_JSON, RECORDS_LOG,
    TIMINGS_JSON,
};
