//! Overlapping community detection with learned objective selection.
//!
//! The detection engine grows overlapping communities node by node under
//! one of two objectives, extended modularity (`Q^E`) or WOCC. Which
//! objective suits a network is predicted from five structural features by
//! a tree ensemble trained on labeled corpora built with [`dataset`].

pub mod classifier;
pub mod cover;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod objectives;
pub mod report;

pub use cover::{Cover, CommunityId};
pub use engine::{EngineConfig, InitStrategy, ObjectiveMode, RunResult};
pub use error::{Error, Result};
pub use graph::{extract_features, load_edge_list, FeatureVector, Graph};
pub use metrics::{MetricKind, ScoreReport};
pub use objectives::ObjectiveKind;
