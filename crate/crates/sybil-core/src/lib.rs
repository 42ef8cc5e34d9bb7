//! Airdrop Sybil detection toolkit.
//!
//! Sybils farm airdrops by driving many accounts through the same DApp
//! interactions, funded from shared treasuries. This crate detects them in
//! two phases: density clustering of accounts whose activity sequences are
//! similar under a pair-set Jaccard measure, then confirmation of each
//! cluster by searching its transaction subgraph for sequential (funding
//! chain) and radial (funding star) token-transfer patterns.
//!
//! The crate ships a deterministic synthetic-scenario generator with ground
//! truth, so detection quality is measurable without access to production
//! chain snapshots.

pub mod activity;
pub mod address;
pub mod amount;
pub mod cluster;
pub mod dot;
pub mod ingest;
pub mod patterns;
pub mod pipeline;
pub mod report;
pub mod synthgen;
pub mod txgraph;

pub use activity::{seq_sim, MatchMode};
pub use address::{AccountValue, Address};
pub use amount::Amount;
pub use cluster::{dbscan, silhouette, tune_params, ClusterParams, Clustering};
pub use pipeline::{detect, DetectConfig, PipelineError, Snapshot};
pub use report::{evaluate, DetectionReport, GroundTruth, Metrics};
pub use synthgen::{generate, ScenarioConfig};
