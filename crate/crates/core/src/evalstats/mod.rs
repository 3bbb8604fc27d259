//! Linear classifiers, cross-validation, proxy A-distance and tissue error.

mod cv;
mod features;
mod linear;
mod report;

pub use cv::{cross_validate, pad_from_error, proxy_a_distance, stratified_folds, train_linear, DEFAULT_L2_GRID};
pub use features::{embed_features, raw_features, FeatureSet, LabelSemantics};
pub use linear::{fit_linear, tissue_error, LinearModel, LossKind};
pub use report::{write_reports, EvalReport};
