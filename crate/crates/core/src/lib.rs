//! Online feature selection over sparse streaming feature columns.
//!
//! Features (columns) arrive one at a time over a fixed instance set; entries
//! may be missing. The pipeline buffers arriving columns, completes missing
//! entries with a rank-constrained latent factor model, scores each column's
//! relevance to the class attribute with a Fisher-Z test on partial
//! correlation, partitions columns into strong / weak / irrelevant regions
//! under a cost-sensitive threshold pair tuned by simulated annealing, and
//! maintains the selected set with Markov-blanket style redundancy pruning.
//!
//! Modules:
//! - [`data`] — streaming data model: tables, buffers, labels, masking, CSV I/O
//! - [`lfa`] — latent factor completion of sparse buffers via SGD
//! - [`citest`] — partial correlation and Fisher-Z conditional independence
//! - [`threeway`] — cost matrix, threshold pair, decision cost, annealer
//! - [`selector`] — the streaming selection state machine
//! - [`eval`] — KNN cross-validation harness and synthetic data generation

pub mod citest;
pub mod data;
pub mod error;
pub mod eval;
pub mod lfa;
pub mod seeds;
pub mod selector;
pub mod threeway;

pub use citest::{dep_score, fisher_z_test, partial_correlation, CiTestResult, RelevanceScore};
pub use data::{
    inject_missing, load_csv, save_csv, stream_columns, FeatureBuffer, FeatureColumn,
    FeatureTable, LabelVector,
};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{
    cross_validate, knn_predict, make_synthetic, run_ablation, AblationReport, EvalConfig,
    EvalReport, GroundTruth,
};
pub use lfa::{complete, rmse_known, train, LatentFactors, LfaConfig};
pub use selector::{
    process_stream, SelectionMode, SelectionResult, SelectionState, SelectorConfig, StepAction,
    StepLog,
};
pub use threeway::{
    anneal_thresholds, anneal_thresholds_from, classify, decision_cost, initial_thresholds,
    region_counts, CostMatrix, DecisionCost, Region, RegionCounts, RelevanceRecord, SaParams,
    ThresholdPair, TwoWayLabel,
};
