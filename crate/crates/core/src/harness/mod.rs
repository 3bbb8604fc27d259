//! Experiment harness: seeded cohorts, the four experiments, CSV/SVG output
//! and image segmentation.

mod cohort;
mod config;
mod experiments;
mod pipeline;
mod report;
mod segment;
mod stats;
pub mod svg;
mod synthetic;

pub use cohort::{Cohort, Subject};
pub use config::{ExperimentConfig, ExperimentId, SyntheticConfig};
pub use experiments::{
    curve, exp1_one_sample, exp2_learning_curve, exp3_param_sweep, summarize, write_records, CurveRow, SummaryRow,
    SweepRow, CLASSIFIERS, REFERENCE_FOOTER,
};
pub use pipeline::{run_once, Arm, RunArtifacts, RunRecord, TestSet};
pub use report::build_report;
pub use segment::{segment_image, segmentation_error, segmentation_ppm, tissue_color};
pub use stats::mean_sem;
pub use synthetic::{exp4_margin_sweep, mean_pairwise_distance, run_margin, synthetic_set, MarginRow, MarginRun, SyntheticSet};
