//! End-to-end studies built from the library pieces. Each one returns plain
//! data and can write plot-ready CSV.

mod clusters;
mod combination;
mod manifest;
mod mix_curve;
mod projection;
mod report;

pub use clusters::{run_cluster_distances, ClusterDistanceMatrix, ClusterKey, ClusterSort};
pub use combination::{run_combination_study, ComboConfig, ComboInput, ComboRow, ComboTable, RowKind};
pub use manifest::{hash_inputs, InputDigest, RunManifest};
pub use mix_curve::{balanced_order, default_grid, run_mix_curve, ClassificationSplits, MixCurve, MixCurveConfig, MixPoint};
pub use projection::{Projector, ProjectorKind};
pub use report::run_classification_report;
