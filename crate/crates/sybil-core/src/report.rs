//! Detection report schema (versioned, JSON, lossless round-trip), ground
//! truth labels for synthetic snapshots, and the evaluation metrics.

use crate::address::AccountValue;
use crate::patterns::{ComplexPattern, RadialPattern, SequentialPattern};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const REPORT_SCHEMA: &str = "sybil-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternType {
    Radial,
    Sequential,
    Complex,
}

/// Run provenance. `generated_at` is wall-clock metadata and is the one
/// field excluded from determinism comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema: String,
    pub snapshot_id: String,
    pub config_hash: String,
    pub generated_at: String,
}

/// One reported cluster: its accounts and their mean pairwise similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub accounts: BTreeSet<AccountValue>,
    pub mean_pairwise_similarity: f64,
    pub sequential_patterns: Vec<SequentialPattern>,
    pub radial_patterns: Vec<RadialPattern>,
    pub complex_patterns: Vec<ComplexPattern>,
    /// True when at least one pattern covers two or more cluster accounts.
    pub flagged: bool,
}

/// Results for one connected component of the merged transaction graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    /// Smallest member account, which identifies the component.
    pub component_id: AccountValue,
    pub size: usize,
    pub clusters: Vec<ClusterReport>,
    pub noise_accounts: BTreeSet<AccountValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub run_metadata: RunMetadata,
    pub components: Vec<ComponentReport>,
    pub flagged_accounts: BTreeSet<AccountValue>,
}

impl DetectionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Labels for one synthetic bot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotLabel {
    pub bot_id: String,
    pub pattern_type: PatternType,
    pub treasury: AccountValue,
    /// The bot's farming accounts (the treasury and plumbing intermediaries
    /// are not Sybil claimants and are not listed here).
    pub accounts: BTreeSet<AccountValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub snapshot_id: String,
    pub bots: Vec<BotLabel>,
}

impl GroundTruth {
    pub fn all_bot_accounts(&self) -> BTreeSet<AccountValue> {
        self.bots
            .iter()
            .flat_map(|b| b.accounts.iter().cloned())
            .collect()
    }

    /// Each account labeled by at most one bot.
    pub fn labels_are_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.bots
            .iter()
            .flat_map(|b| b.accounts.iter())
            .all(|a| seen.insert(a.clone()))
    }
}

/// Account-level scores. 0/0 cases are reported as absent, never as 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    pub true_positives: usize,
    pub flagged_total: usize,
    pub bot_total: usize,
    /// Fraction of bots of each type recovered: a bot counts as recovered
    /// when at least half its accounts are flagged together in one cluster.
    pub per_pattern_recall: BTreeMap<PatternType, f64>,
}

/// Compare flagged accounts against ground truth.
pub fn evaluate(report: &DetectionReport, truth: &GroundTruth) -> Metrics {
    let flagged = &report.flagged_accounts;
    let bots = truth.all_bot_accounts();
    let tp = flagged.intersection(&bots).count();

    let precision = (!flagged.is_empty()).then(|| tp as f64 / flagged.len() as f64);
    let recall = (!bots.is_empty()).then(|| tp as f64 / bots.len() as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };

    // Flagged-together cluster membership for per-bot recovery.
    let flagged_clusters: Vec<&BTreeSet<AccountValue>> = report
        .components
        .iter()
        .flat_map(|c| &c.clusters)
        .filter(|c| c.flagged)
        .map(|c| &c.accounts)
        .collect();
    let mut recovered: BTreeMap<PatternType, (usize, usize)> = BTreeMap::new();
    for bot in &truth.bots {
        let entry = recovered.entry(bot.pattern_type).or_insert((0, 0));
        entry.1 += 1;
        let half = bot.accounts.len().div_ceil(2);
        let hit = flagged_clusters
            .iter()
            .any(|cluster| cluster.intersection(&bot.accounts).count() >= half);
        if hit {
            entry.0 += 1;
        }
    }
    let per_pattern_recall = recovered
        .into_iter()
        .map(|(ty, (hit, total))| (ty, hit as f64 / total as f64))
        .collect();

    Metrics {
        precision,
        recall,
        f1,
        true_positives: tp,
        flagged_total: flagged.len(),
        bot_total: bots.len(),
        per_pattern_recall,
    }
}
