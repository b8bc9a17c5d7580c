//! Outlier detection for two-occasion panel data.
//!
//! Ratios between occasions are turned into Hidiroglou-Berthelot effect
//! scores, which then feed interval, boxplot, k-NN, DBSCAN and isolation
//! forest detectors. Detector rankings can be compared with Kendall's tau-b.

pub mod boxplot;
pub mod concordance;
pub mod dbscan;
pub mod error;
pub mod hb;
pub mod iforest;
pub mod ingest;
pub mod knn;
pub mod pipeline;
pub mod quantile;
pub mod report;
pub mod synthetic;

pub use boxplot::{adjusted_fences, box_detect, medcouple, quartiles, standard_fences, BoxMethod, Fences};
pub use concordance::{build_matrix, kendall_tau, ConcordanceMatrix};
pub use dbscan::{dbscan_cluster, dbscan_detect, sorted_knn_curve, ClusterLabels, DbscanParams};
pub use error::{Error, Result};
pub use hb::{hb_detect, hb_interval, HBInterval, HBParams, HBScores, PercentileMode};
pub use iforest::{c_factor, fit_forest, harmonic, iforest_detect, ForestParams, IFScores, IsolationForest};
pub use ingest::{compute_ratios, load_panel, read_panel, PanelPair, RatioSet};
pub use knn::{gap_threshold, knn_detect, knn_distances, KnnScores, ScoreKind, Threshold};
pub use pipeline::{run_compare, run_curve, run_detect, Method, RunConfig};
pub use report::{DetectionResult, Format, Report, Rule, ScoreVector};
