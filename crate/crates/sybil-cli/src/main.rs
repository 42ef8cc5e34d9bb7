//! `sybil` — detect airdrop Sybils on transaction-snapshot files.
//!
//! Subcommands: `detect` (run the pipeline, write a report), `simulate`
//! (generate a labeled synthetic snapshot), `evaluate` (score a report
//! against ground truth), `export-dot` (render a cluster's transaction
//! subgraph with pattern highlights).

mod config;

use clap::{Parser, Subcommand};
use config::{FileConfig, Overrides, SnapshotSection};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use sybil_core::dot::{subgraph_to_dot, PatternOverlay};
use sybil_core::ingest::{
    apply_filters, parse_address_list, parse_dapp_events, parse_transactions, ParseDiagnostic,
};
use sybil_core::pipeline::{detect, DetectConfig, Snapshot};
use sybil_core::report::{evaluate, ClusterReport, DetectionReport, GroundTruth, REPORT_SCHEMA};
use sybil_core::synthgen::{generate, ScenarioConfig};
use sybil_core::txgraph::{extract_subgraph, TransactionGraph};
use sybil_core::AccountValue;

#[derive(Parser)]
#[command(name = "sybil", version, about = "Airdrop Sybil detection toolkit")]
struct Cli {
    /// Worker threads for component processing (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run detection over a snapshot and write the report
    Detect {
        #[arg(long)]
        config: PathBuf,
        /// Report path (overrides output.report from the config)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Chain whose graph hosts the transfer-pattern search
        #[arg(long)]
        chain: Option<String>,
        /// DBSCAN eps override for the selected chain
        #[arg(long)]
        eps: Option<f64>,
        /// DBSCAN min_pts override for the selected chain
        #[arg(long)]
        min_pts: Option<usize>,
        /// "type-only" or "type-and-amount"
        #[arg(long)]
        match_mode: Option<String>,
    },
    /// Generate a labeled synthetic snapshot from a scenario file
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for snapshot, ground truth and detect config
        #[arg(long)]
        out: PathBuf,
        /// RNG seed override
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a detection report against ground truth
    Evaluate { report: PathBuf, truth: PathBuf },
    /// Render one cluster's transaction subgraph as Graphviz DOT
    ExportDot {
        #[arg(long)]
        config: PathBuf,
        /// Component id (the component's smallest account value)
        #[arg(long)]
        component: String,
        /// Cluster index within the component
        #[arg(long, default_value_t = 0)]
        cluster: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        chain: Option<String>,
    },
}

enum CliError {
    Io(String),
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io(_) => ExitCode::from(1),
            CliError::Config(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Config(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    let result = match cli.command {
        Command::Detect {
            config,
            out,
            chain,
            eps,
            min_pts,
            match_mode,
        } => cmd_detect(
            &config,
            out,
            Overrides {
                chain,
                eps,
                min_pts,
                match_mode,
            },
        ),
        Command::Simulate { scenario, out, seed } => cmd_simulate(&scenario, &out, seed),
        Command::Evaluate { report, truth } => cmd_evaluate(&report, &truth),
        Command::ExportDot {
            config,
            component,
            cluster,
            out,
            chain,
        } => cmd_export_dot(&config, &component, cluster, &out, chain),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn report_diagnostics(source: &Path, diags: &[ParseDiagnostic]) {
    if diags.is_empty() {
        return;
    }
    eprintln!("{}: {} record(s) skipped", source.display(), diags.len());
    for d in diags.iter().take(5) {
        eprintln!("  line {}: {}", d.line, d.reason);
    }
    if diags.len() > 5 {
        eprintln!("  ... and {} more", diags.len() - 5);
    }
}

fn load_snapshot(section: &SnapshotSection, base: &Path) -> Result<Snapshot, CliError> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let open = |p: &PathBuf| -> Result<fs::File, CliError> {
        fs::File::open(resolve(p))
            .map_err(|e| CliError::Io(format!("cannot open {}: {e}", p.display())))
    };

    let mut snapshot = Snapshot::default();
    for (chain, path) in &section.transactions {
        let file = open(path)?;
        let (txs, diags) = parse_transactions(file, chain)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        report_diagnostics(path, &diags);
        snapshot.transactions.insert(chain.clone(), txs);
    }
    if let Some(path) = &section.events {
        let file = open(path)?;
        let (events, diags) = parse_dapp_events(file)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        report_diagnostics(path, &diags);
        snapshot.events = events;
    }
    for (path, target) in [
        (&section.contracts, 0usize),
        (&section.exchanges, 1),
        (&section.whitelist, 2),
    ] {
        let Some(path) = path else { continue };
        let file = open(path)?;
        let (set, diags) = parse_address_list(file)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        report_diagnostics(path, &diags);
        match target {
            0 => snapshot.filters.contract_addresses = set,
            1 => snapshot.filters.exchange_addresses = set,
            _ => snapshot.filters.whitelist = set,
        }
    }
    Ok(snapshot)
}

fn run_detection(
    config_path: &Path,
    overrides: Overrides,
) -> Result<(FileConfig, PathBuf, Snapshot, DetectConfig, DetectionReport), CliError> {
    let (file_config, base) = FileConfig::load(config_path).map_err(CliError::Config)?;
    let snapshot = load_snapshot(&file_config.snapshot, &base)?;
    let detect_config = file_config
        .detect_config(&overrides)
        .map_err(CliError::Config)?;
    let report = detect(&snapshot, &detect_config)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok((file_config, base, snapshot, detect_config, report))
}

fn cmd_detect(config_path: &Path, out: Option<PathBuf>, overrides: Overrides) -> Result<(), CliError> {
    let (file_config, base, snapshot, detect_config, report) =
        run_detection(config_path, overrides)?;

    let report_path = out
        .or_else(|| file_config.output.report.clone())
        .unwrap_or_else(|| PathBuf::from("report.json"));
    let report_path = if report_path.is_absolute() {
        report_path
    } else {
        base.join(report_path)
    };
    fs::write(&report_path, report.to_json())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", report_path.display())))?;

    if let Some(dot_dir) = &file_config.output.dot_dir {
        let dot_dir = if dot_dir.is_absolute() { dot_dir.clone() } else { base.join(dot_dir) };
        fs::create_dir_all(&dot_dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dot_dir.display())))?;
        let graph = pattern_chain_graph(&snapshot, &detect_config);
        for component in &report.components {
            for (idx, cluster) in component.clusters.iter().enumerate() {
                if !cluster.flagged {
                    continue;
                }
                let name = format!(
                    "component_{}_cluster{idx}.dot",
                    &component.component_id.as_str()[..8]
                );
                let dot = cluster_dot(&graph, &detect_config, cluster);
                fs::write(dot_dir.join(&name), dot)
                    .map_err(|e| CliError::Io(format!("cannot write {name}: {e}")))?;
            }
        }
    }

    println!(
        "{} component(s), {} cluster(s), {} flagged account(s); report written to {}",
        report.components.len(),
        report.components.iter().map(|c| c.clusters.len()).sum::<usize>(),
        report.flagged_accounts.len(),
        report_path.display()
    );
    Ok(())
}

fn pattern_chain_graph(snapshot: &Snapshot, config: &DetectConfig) -> TransactionGraph {
    let filtered = apply_filters(&snapshot.transactions[&config.chain], &snapshot.filters);
    TransactionGraph::build(&filtered)
}

fn cluster_dot(graph: &TransactionGraph, config: &DetectConfig, cluster: &ClusterReport) -> String {
    let seeds: std::collections::BTreeSet<_> = cluster
        .accounts
        .iter()
        .map(|v| sybil_core::Address {
            chain: config.chain.clone(),
            value: v.clone(),
        })
        .filter(|a| graph.contains(a))
        .collect();
    if seeds.is_empty() {
        return "digraph snapshot {\n}\n".into();
    }
    let sg = extract_subgraph(graph, &seeds, config.caps).expect("cluster seeds are vertices");
    let overlay = PatternOverlay {
        sequential: &cluster.sequential_patterns,
        radial: &cluster.radial_patterns,
    };
    subgraph_to_dot(&sg, Some(&overlay))
}

fn cmd_simulate(scenario_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let text = fs::read_to_string(scenario_path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", scenario_path.display())))?;
    let mut scenario: ScenarioConfig = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", scenario_path.display())))?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let (snapshot, truth) = generate(&scenario).map_err(|e| CliError::Config(e.to_string()))?;

    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let write = |name: String, content: String| -> Result<(), CliError> {
        fs::write(out_dir.join(&name), content)
            .map_err(|e| CliError::Io(format!("cannot write {name}: {e}")))
    };
    for (chain, txs) in &snapshot.transactions {
        let mut body = String::new();
        for tx in txs {
            body.push_str(&sybil_core::ingest::serialize_transaction(tx));
            body.push('\n');
        }
        write(format!("txs_{chain}.ndjson"), body)?;
    }
    write("events.ndjson".into(), snapshot.serialized_events())?;
    write(
        "truth.json".into(),
        serde_json::to_string_pretty(&truth).expect("truth serializes"),
    )?;
    let chains: Vec<String> = snapshot.chains().cloned().collect();
    write(
        "detect.toml".into(),
        config::render_detect_toml(&chains, &scenario.chains[0]),
    )?;

    println!(
        "snapshot {} written to {}: {} transaction(s), {} event(s), {} bot(s)",
        truth.snapshot_id,
        out_dir.display(),
        snapshot.all_transactions().count(),
        snapshot.events.len(),
        truth.bots.len()
    );
    Ok(())
}

fn cmd_evaluate(report_path: &Path, truth_path: &Path) -> Result<(), CliError> {
    let report_text = fs::read_to_string(report_path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", report_path.display())))?;
    let report = DetectionReport::from_json(&report_text)
        .map_err(|e| CliError::Config(format!("{}: {e}", report_path.display())))?;
    let truth_text = fs::read_to_string(truth_path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", truth_path.display())))?;
    let truth: GroundTruth = serde_json::from_str(&truth_text)
        .map_err(|e| CliError::Config(format!("{}: {e}", truth_path.display())))?;

    if report.run_metadata.schema != REPORT_SCHEMA {
        return Err(CliError::Config(format!(
            "unsupported report schema {:?}",
            report.run_metadata.schema
        )));
    }
    if !truth.labels_are_disjoint() {
        return Err(CliError::Config(
            "ground truth labels an account under two bots".into(),
        ));
    }
    if report.run_metadata.snapshot_id != truth.snapshot_id {
        return Err(CliError::Config(format!(
            "snapshot id mismatch: report {} vs truth {}",
            report.run_metadata.snapshot_id, truth.snapshot_id
        )));
    }

    let metrics = evaluate(&report, &truth);
    println!(
        "{}",
        serde_json::to_string_pretty(&metrics).expect("metrics serialize")
    );
    Ok(())
}

fn cmd_export_dot(
    config_path: &Path,
    component: &str,
    cluster_idx: usize,
    out: &Path,
    chain: Option<String>,
) -> Result<(), CliError> {
    let overrides = Overrides {
        chain,
        ..Overrides::default()
    };
    let (_, _, snapshot, detect_config, report) = run_detection(config_path, overrides)?;
    let component_id = AccountValue::parse(component)
        .map_err(|e| CliError::Config(format!("component id: {e}")))?;
    let component = report
        .components
        .iter()
        .find(|c| c.component_id == component_id)
        .ok_or_else(|| CliError::Config(format!("no component with id {component_id}")))?;
    let cluster = component.clusters.get(cluster_idx).ok_or_else(|| {
        CliError::Config(format!(
            "component {} has {} cluster(s), index {cluster_idx} out of range",
            component.component_id,
            component.clusters.len()
        ))
    })?;
    let graph = pattern_chain_graph(&snapshot, &detect_config);
    let dot = cluster_dot(&graph, &detect_config, cluster);
    fs::write(out, dot).map_err(|e| CliError::Io(format!("cannot write {}: {e}", out.display())))?;
    println!("DOT written to {}", out.display());
    Ok(())
}
