//! Run configuration: a TOML file describing snapshot inputs, detection
//! parameters and outputs, with command-line flags taking precedence.
//!
//! Relative paths resolve against the config file's directory so a config
//! can live next to its snapshot and be launched from anywhere.

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use sybil_core::activity::MatchMode;
use sybil_core::patterns::ComplexOrder;
use sybil_core::pipeline::{default_chain_params, DetectConfig, FALLBACK_PARAMS};
use sybil_core::txgraph::SubgraphCaps;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub snapshot: SnapshotSection,
    #[serde(default)]
    pub detect: DetectSection,
    #[serde(default)]
    pub params: BTreeMap<String, ParamsSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSection {
    /// Chain → transactions NDJSON path.
    pub transactions: BTreeMap<String, PathBuf>,
    pub events: Option<PathBuf>,
    pub contracts: Option<PathBuf>,
    pub exchanges: Option<PathBuf>,
    pub whitelist: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectSection {
    pub chain: Option<String>,
    pub match_mode: String,
    pub delta: f64,
    pub min_component_size: usize,
    pub max_vertices: usize,
    pub hub_degree_threshold: usize,
    pub search_sequential: bool,
    pub search_radial: bool,
    pub search_complex: bool,
    pub cluster_requires_activity: bool,
}

impl Default for DetectSection {
    fn default() -> Self {
        DetectSection {
            chain: None,
            match_mode: "type-only".into(),
            delta: 0.05,
            min_component_size: 4,
            max_vertices: 5000,
            hub_degree_threshold: 1000,
            search_sequential: true,
            search_radial: true,
            search_complex: true,
            cluster_requires_activity: true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub eps: f64,
    pub min_pts: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub report: Option<PathBuf>,
    pub dot_dir: Option<PathBuf>,
}

/// Flag overrides; flags win over config-file values.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub chain: Option<String>,
    pub eps: Option<f64>,
    pub min_pts: Option<usize>,
    pub match_mode: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: FileConfig =
            toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((cfg, base))
    }

    /// Build the pipeline config, applying Table-style per-chain defaults,
    /// file-level params, then flag overrides.
    pub fn detect_config(&self, overrides: &Overrides) -> Result<DetectConfig, String> {
        let chain = overrides
            .chain
            .clone()
            .or_else(|| self.detect.chain.clone())
            .ok_or("no chain selected: set detect.chain or pass --chain")?;

        let mut per_chain_params = default_chain_params();
        for chain_name in self.snapshot.transactions.keys() {
            per_chain_params
                .entry(chain_name.clone())
                .or_insert(FALLBACK_PARAMS);
        }
        for (chain_name, p) in &self.params {
            per_chain_params.insert(
                chain_name.clone(),
                sybil_core::cluster::ClusterParams {
                    eps: p.eps,
                    min_pts: p.min_pts,
                },
            );
        }
        let mode_name = overrides
            .match_mode
            .as_deref()
            .unwrap_or(&self.detect.match_mode);
        let match_mode = match mode_name {
            "type-only" => MatchMode::TypeOnly,
            "type-and-amount" => MatchMode::TypeAndAmount {
                delta: self.detect.delta,
            },
            other => return Err(format!("unknown match mode {other:?}")),
        };

        let mut config = DetectConfig::new(&chain);
        config.per_chain_params = per_chain_params;
        config.match_mode = match_mode;
        config.caps = SubgraphCaps {
            max_vertices: self.detect.max_vertices,
            hub_degree_threshold: self.detect.hub_degree_threshold,
        };
        config.min_component_size = self.detect.min_component_size;
        config.search_sequential = self.detect.search_sequential;
        config.search_radial = self.detect.search_radial;
        config.complex_orders = if self.detect.search_complex {
            vec![ComplexOrder::RadialFirst, ComplexOrder::SequentialFirst]
        } else {
            Vec::new()
        };
        config.cluster_requires_activity = self.detect.cluster_requires_activity;

        let entry = config
            .per_chain_params
            .entry(chain.clone())
            .or_insert(FALLBACK_PARAMS);
        if let Some(eps) = overrides.eps {
            entry.eps = eps;
        }
        if let Some(min_pts) = overrides.min_pts {
            entry.min_pts = min_pts;
        }
        if !(0.0..=1.0).contains(&entry.eps) {
            return Err(format!("eps {} outside [0,1]", entry.eps));
        }
        if entry.min_pts == 0 {
            return Err("min_pts must be ≥ 1".into());
        }
        Ok(config)
    }
}

/// A ready-to-run detect config for a freshly simulated snapshot.
pub fn render_detect_toml(chains: &[String], pattern_chain: &str) -> String {
    let defaults = default_chain_params();
    let mut out = String::from("[snapshot]\nevents = \"events.ndjson\"\n\n[snapshot.transactions]\n");
    for chain in chains {
        out.push_str(&format!("{chain} = \"txs_{chain}.ndjson\"\n"));
    }
    out.push_str(&format!("\n[detect]\nchain = \"{pattern_chain}\"\n"));
    for chain in chains {
        let p = defaults.get(chain).copied().unwrap_or(FALLBACK_PARAMS);
        out.push_str(&format!(
            "\n[params.{chain}]\neps = {}\nmin_pts = {}\n",
            p.eps, p.min_pts
        ));
    }
    out.push_str("\n[output]\nreport = \"report.json\"\n");
    out
}
