//! Batch runner: one config in, a directory of JSON and CSV results out.
//!
//! Layout of a result bundle:
//! - `manifest.json`: the resolved config, game constants and one entry per run.
//! - `graph_stats.json`, `bc.csv` (node_id, label, bc).
//! - `sweep.csv` when the uniform sweep is requested.
//! - `runs/{objective}_{slug}.json` (run record), `.report.json` (terminal
//!   metrics) and `.profile.csv` (terminal profile).
//! - `index_{objective}.csv`, one row per run, sorted by social cost.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fmd_core::{
    betweenness_centrality, equilibrium_metrics, graph_stats, run_init, sweep_argmin, uniform_sweep,
    CommGraph, EquilibriumReport, GraphStats, InitSpec, MetricKind, NodeMetric, NodeProperties, RunObjective,
    RunRecord, SweepRow,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ObjectiveKind};
use crate::data::{load_graph, resolve_dataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub objective: RunObjective,
    pub init_label: String,
    pub slug: String,
    pub social_cost: f64,
    pub welfare: f64,
    pub iterations: usize,
    pub converged: bool,
    pub privacy_share: f64,
    pub max_node_bc_sum: f64,
    pub top10_in_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub privacy_loss: f64,
    pub bandwidth_cost: f64,
    pub model: String,
    pub a: f64,
    pub node_count: usize,
    pub runs: Vec<RunSummary>,
    pub sweep: bool,
}

impl Manifest {
    /// Short dataset tag used in plot data.
    pub fn dataset_tag(&self) -> String {
        let d = &self.config.dataset;
        Path::new(d)
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| d.clone())
    }

    pub fn runs_for(&self, objective: RunObjective) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter(move |r| r.objective == objective)
    }
}

/// One row of a run index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub init: String,
    #[serde(rename = "Sumcost")]
    pub sumcost: f64,
    #[serde(rename = "Iterations")]
    pub iterations: usize,
    #[serde(rename = "SW%")]
    pub sw_pct: f64,
    #[serde(rename = "Iter%")]
    pub iter_pct: f64,
    pub sum_bc_at_top: f64,
    pub top10_at_top: usize,
    pub converged: bool,
}

/// Rows sorted by social cost (stable). The lowest-cost run is the baseline:
/// `SW% = best_cost / cost * 100`, `Iter% = iterations / best_iterations * 100`.
pub fn index_rows(runs: &[&RunSummary]) -> Vec<IndexRow> {
    let mut sorted: Vec<&RunSummary> = runs.to_vec();
    sorted.sort_by(|a, b| a.social_cost.total_cmp(&b.social_cost));
    let Some(best) = sorted.first() else {
        return Vec::new();
    };
    let (best_cost, best_iters) = (best.social_cost, best.iterations);
    sorted
        .iter()
        .map(|r| IndexRow {
            init: r.init_label.clone(),
            sumcost: r.social_cost,
            iterations: r.iterations,
            sw_pct: percent(best_cost, r.social_cost),
            iter_pct: percent(r.iterations as f64, best_iters as f64),
            sum_bc_at_top: r.max_node_bc_sum,
            top10_at_top: r.top10_in_max,
            converged: r.converged,
        })
        .collect()
}

fn percent(num: f64, den: f64) -> f64 {
    if num == den {
        100.0
    } else {
        num * 100.0 / den
    }
}

/// File-name-safe form of an init label.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() || c == '-' {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

fn unique_slugs(specs: &[InitSpec]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(specs.len());
    for spec in specs {
        let base = slug(&spec.label());
        let mut candidate = base.clone();
        let mut k = 2;
        while out.contains(&candidate) {
            candidate = format!("{base}_{k}");
            k += 1;
        }
        out.push(candidate);
    }
    out
}

/// What [`run_experiment`] produced.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub sweep: Option<Vec<SweepRow>>,
    pub stats: GraphStats,
}

impl ExperimentOutcome {
    pub fn non_converged(&self) -> Vec<&RunSummary> {
        self.manifest.runs.iter().filter(|r| !r.converged).collect()
    }
}

/// Loads the dataset named in the config and runs the batch.
pub fn run_experiment(cfg: &ExperimentConfig, cache_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let path = resolve_dataset(&cfg.dataset, cache_dir)?;
    let g = load_graph(&path, cfg.halve)?;
    run_on_graph(cfg, &g)
}

/// Runs every (init, objective) pair on `g` in parallel and writes the bundle
/// to `cfg.output_dir`. Non-converged runs are flagged, not fatal.
pub fn run_on_graph(cfg: &ExperimentConfig, g: &CommGraph) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    let runs_dir = dir.join("runs");
    std::fs::create_dir_all(&runs_dir).with_context(|| format!("creating {}", runs_dir.display()))?;

    let params = cfg.game_params(g)?;
    let opts = cfg.search_options();
    let bc = betweenness_centrality(g);
    let mut props = NodeProperties::with_bc(bc.clone());
    props.get(g, MetricKind::Degree);

    let stats = graph_stats(g);
    write_json(&dir.join("graph_stats.json"), &stats)?;
    write_bc(&dir.join("bc.csv"), g, &bc)?;

    let objectives = cfg.objectives();
    let specs = cfg.init_specs();
    let slugs = unique_slugs(&specs);

    let sweep = if objectives.contains(&ObjectiveKind::UniformSweep) {
        let rows = uniform_sweep(g, &params)?;
        write_sweep(&dir.join("sweep.csv"), &rows)?;
        Some(rows)
    } else {
        None
    };

    let searches: Vec<RunObjective> = objectives
        .iter()
        .filter_map(|o| match o {
            ObjectiveKind::Nash => Some(RunObjective::Nash),
            ObjectiveKind::Social => Some(RunObjective::Social),
            ObjectiveKind::UniformSweep => None,
        })
        .collect();
    let jobs: Vec<(RunObjective, usize)> = searches
        .iter()
        .flat_map(|&o| (0..specs.len()).map(move |i| (o, i)))
        .collect();

    let results: Vec<Result<RunSummary>> = jobs
        .par_iter()
        .map(|&(objective, i)| {
            let mut props = props.clone();
            let rec = run_init(g, &params, &specs[i], &mut props, objective, &opts)
                .with_context(|| format!("run ({}, {})", specs[i].label(), objective.label()))?;
            let report = equilibrium_metrics(g, &params, &rec.terminal, &bc)?;
            let stem = format!("{}_{}", objective.label(), slugs[i]);
            write_json(&runs_dir.join(format!("{stem}.json")), &rec)?;
            write_json(&runs_dir.join(format!("{stem}.report.json")), &report)?;
            let profile_csv = File::create(runs_dir.join(format!("{stem}.profile.csv")))?;
            rec.terminal
                .write_csv(&params.ladder, BufWriter::new(profile_csv))?;
            Ok(summarize(&rec, &report, slugs[i].clone()))
        })
        .collect();
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let top_label = params.ladder.rate(params.ladder.top()).to_string();
    for &objective in &searches {
        let batch: Vec<&RunSummary> = runs.iter().filter(|r| r.objective == objective).collect();
        write_index(
            &dir.join(format!("index_{}.csv", objective.label())),
            &index_rows(&batch),
            &top_label,
        )?;
    }

    let manifest = Manifest {
        config: cfg.clone(),
        privacy_loss: params.privacy_loss,
        bandwidth_cost: params.bandwidth_cost,
        model: params.altruism.model.label().to_string(),
        a: cfg.altruism.a(),
        node_count: g.node_count(),
        runs,
        sweep: sweep.is_some(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(ExperimentOutcome {
        dir,
        manifest,
        sweep,
        stats,
    })
}

fn summarize(rec: &RunRecord, report: &EquilibriumReport, slug: String) -> RunSummary {
    RunSummary {
        objective: rec.objective,
        init_label: rec.init_label.clone(),
        slug,
        social_cost: rec.breakdown.social_cost,
        welfare: rec.breakdown.welfare,
        iterations: rec.iterations,
        converged: rec.converged,
        privacy_share: report.privacy_share,
        max_node_bc_sum: report.max_node_bc_sum,
        top10_in_max: report.top10_in_max,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize, Deserialize)]
pub struct BcRow {
    pub node_id: usize,
    pub label: String,
    pub bc: f64,
}

fn write_bc(path: &Path, g: &CommGraph, bc: &NodeMetric) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (u, (label, &value)) in g.labels().iter().zip(&bc.values).enumerate() {
        w.serialize(BcRow {
            node_id: u,
            label: label.clone(),
            bc: value,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `bc.csv` back into a metric.
pub fn read_bc(path: &Path) -> Result<NodeMetric> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for row in r.deserialize::<BcRow>() {
        values.push(row?.bc);
    }
    Ok(NodeMetric {
        kind: MetricKind::Bc,
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    /// Base-2 exponent, empty for the zero rate.
    pub rate_exponent: Option<i32>,
    pub social_cost: f64,
    pub total_privacy: f64,
    pub total_bandwidth: f64,
    pub is_argmin: bool,
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let best = sweep_argmin(rows).map(|r| r.rate);
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(SweepCsvRow {
            rate_exponent: r.rate.exponent(),
            social_cost: r.social_cost,
            total_privacy: r.total_privacy,
            total_bandwidth: r.total_bandwidth,
            is_argmin: Some(r.rate) == best,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepCsvRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

fn write_index(path: &Path, rows: &[IndexRow], top_label: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "init",
        "Sumcost",
        "Iterations",
        "SW%",
        "Iter%",
        &format!("sum_bc_at_{top_label}"),
        &format!("top10_at_{top_label}"),
        "converged",
    ])?;
    for r in rows {
        w.write_record([
            r.init.clone(),
            r.sumcost.to_string(),
            r.iterations.to_string(),
            r.sw_pct.to_string(),
            r.iter_pct.to_string(),
            r.sum_bc_at_top.to_string(),
            r.top10_at_top.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Loaded result bundle.
pub struct Bundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Bundle {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest = read_json(&dir.join("manifest.json"))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn params_ladder(&self) -> Result<fmd_core::StrategyLadder> {
        self.manifest.config.ladder()
    }

    pub fn record(&self, run: &RunSummary) -> Result<RunRecord> {
        read_json(&self.run_path(run, "json"))
    }

    pub fn report(&self, run: &RunSummary) -> Result<EquilibriumReport> {
        read_json(&self.run_path(run, "report.json"))
    }

    fn run_path(&self, run: &RunSummary, ext: &str) -> PathBuf {
        self.dir
            .join("runs")
            .join(format!("{}_{}.{ext}", run.objective.label(), run.slug))
    }

    pub fn bc(&self) -> Result<NodeMetric> {
        read_bc(&self.dir.join("bc.csv"))
    }
}
