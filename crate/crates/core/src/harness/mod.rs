//! Experiment orchestration: stream construction with fault injection,
//! trials, ablations over the four methods, aggregation and reports.
//!
//! An ablation writes under `output_dir`:
//!
//! ```text
//! config.toml
//! offline/seed_<s>/<adversarial|source_only>/   checkpoint + training.csv
//! trials/<method>/seed_<s>/                      events.csv updates.csv curve.csv result.json DONE
//! summary.json  summary.txt
//! ```

mod ablation;
mod aggregate;
mod config;
mod stream;
mod trial;

pub use ablation::{
    report, run_ablation, trial_dir, write_trial, AblationReport, CONFIG_COPY, SUMMARY_JSON,
    SUMMARY_TEXT,
};
pub use aggregate::{aggregate, mean_sd, CellStats, IncompleteCell, Summary};
pub use config::{
    BankConfig, ConditionTag, DataSource, ExperimentConfig, ModelConfig, SegmentSpec,
    CONFIG_VERSION,
};
pub use stream::{build_segment, build_stream, offline_windows, TrialData};
pub use trial::{
    artifacts_from_model, offline_dataset, offline_mode, prepare_offline, read_curve_csv,
    read_events_csv, run_trial, run_trial_with, segment_bounds, write_curve_csv, write_events_csv,
    write_updates_csv, CurvePoint, EventRecord, OfflineArtifacts, SegmentResult, TrialOutput,
    TrialResult,
};
