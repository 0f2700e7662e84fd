//! Tempo-tradition analysis for recorded-performance corpora.
//!
//! The pipeline runs per movement: bar-level BPM series are reduced to
//! per-recording features, z-standardised, clustered with seeded k-means++
//! restarts, checked for how many clusters the data supports, labelled
//! slow/mid/fast, and regressed against recording year within each cluster.
//! The [`report`] module renders the results as text tables, JSON and SVG.

pub mod corpus;
pub mod error;
pub mod features;
pub mod kmeans;
pub mod regress;
pub mod report;
pub mod rng;
pub mod special;
pub mod synth;
pub mod traditions;
pub mod validity;

pub use corpus::{Character, Corpus, FeatureSpec, Movement, Recording, ValidationReport};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, StandardizedMatrix};
pub use kmeans::ClusterModel;
pub use regress::RegressionFit;
pub use report::ReportBundle;
pub use synth::SynthSpec;
pub use traditions::{
    AggregateChange, AnalysisOptions, AssociationResult, Label, LabeledCluster, MovementReport,
};
pub use validity::{ValidityPolicy, ValidityReport};

/// Crate version, recorded in report metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
