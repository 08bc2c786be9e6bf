//! Subcommand definitions and handlers for the `fmd` binary.

use std::fmt;
use std::fs::File;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fmd_core::{
    derive_privacy_loss, enumerate_oracle, graph_stats, verify_against, verify_step_stable, AltruismModel,
    AltruistAssignment, Objective, Profile, RunObjective, RunRecord,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, ObjectiveKind, PrivacyLoss};
use crate::data::{default_cache_dir, load_graph, read_events, resolve_dataset, DataError, KnownDataset};
use crate::experiment::{read_json, run_experiment, Bundle};
use crate::fetch::{fetch_dataset, FetchOutcome};
use crate::plotdata::{emit_plot_data, Figure, MissingRun};

#[derive(Debug, Parser)]
#[command(
    name = "fmd",
    version,
    about = "Cover-traffic game experiments on message graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download a dataset into the cache (or report a cache hit).
    Fetch(FetchArgs),
    /// Print graph statistics as JSON.
    Stats(StatsArgs),
    /// Run an experiment batch and write a result bundle.
    Run(RunArgs),
    /// Check whether a profile is an equilibrium (or optimum-stable).
    Verify(VerifyArgs),
    /// Enumerate every profile of a tiny instance.
    Oracle(OracleArgs),
    /// Write figure data series from result bundles.
    Plotdata(PlotArgs),
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// `message`, `mail`, or nothing for both.
    #[arg(value_parser = ["message", "mail"])]
    pub names: Vec<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Use the cache only.
    #[arg(long)]
    pub offline: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Selfish,
    Local,
    Global,
}

impl From<ModelArg> for AltruismModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Selfish => AltruismModel::Selfish,
            ModelArg::Local => AltruismModel::Local,
            ModelArg::Global => AltruismModel::Global,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Nash,
    Social,
    UniformSweep,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Nash => ObjectiveKind::Nash,
            ObjectiveArg::Social => ObjectiveKind::Social,
            ObjectiveArg::UniformSweep => ObjectiveKind::UniformSweep,
        }
    }
}

/// Config file plus per-field overrides.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset file, or `message` / `mail` from the cache.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Keep every second node by weighted degree (default true).
    #[arg(long)]
    pub halve: Option<bool>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Add a `random_<seed>` init; repeatable.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Altruism constant given to every node.
    #[arg(long = "altruism")]
    pub a: Option<f64>,
    /// Privacy loss `L`; derived from the graph when omitted.
    #[arg(long)]
    pub privacy_loss: Option<f64>,
    #[arg(long)]
    pub bandwidth_cost: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub trace_thinning: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.dataset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(d)) => ExperimentConfig::for_dataset(d.clone()),
            (None, None) => bail!(UsageError("either --config or --dataset is required".into())),
        };
        if let Some(d) = &self.dataset {
            cfg.dataset = d.clone();
        }
        if let Some(h) = self.halve {
            cfg.halve = h;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        cfg.seeds.extend(&self.seeds);
        if let Some(m) = self.model {
            cfg.altruism.model = m.into();
        }
        if let Some(a) = self.a {
            cfg.altruism.assignment = AltruistAssignment::All { a };
        }
        if let Some(l) = self.privacy_loss {
            cfg.game.privacy_loss = PrivacyLoss::Fixed(l);
        }
        if let Some(f) = self.bandwidth_cost {
            cfg.game.bandwidth_cost = f;
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        if let Some(t) = self.trace_thinning {
            cfg.trace_thinning = t;
        }
        cfg.validate().map_err(|e| UsageError(format!("{e:#}")))?;
        Ok(cfg)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(default_cache_dir)
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Objectives to run; repeatable (overrides the config).
    #[arg(long = "objective", value_enum)]
    pub objectives: Vec<ObjectiveArg>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with code 3 if any run hits the iteration cap.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Profile CSV (`node_id,rate_exponent`).
    #[arg(long, conflicts_with = "run")]
    pub profile: Option<PathBuf>,
    /// Run record JSON; its terminal profile and objective are used.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "nash")]
    pub objective: ObjectiveArg,
    /// Threshold relative to the current objective value.
    #[arg(long)]
    pub relative: bool,
    /// Only consider single ladder steps.
    #[arg(long)]
    pub step_only: bool,
    /// Exit with code 3 when the profile is not stable.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Largest tolerated unilateral gain.
    #[arg(long, default_value_t = 0.0)]
    pub tolerance: f64,
    /// Include the welfare of every profile.
    #[arg(long)]
    pub with_welfare: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Result bundle directory; repeatable.
    #[arg(long = "bundle", required = true)]
    pub bundles: Vec<PathBuf>,
    /// Figure name, or `all`.
    #[arg(long, default_value = "all")]
    pub figure: String,
    /// Restrict per-run figures to one init label.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Bad arguments or config (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Strict mode found an unconverged or unstable result (exit code 3).
#[derive(Debug)]
pub struct NotConverged(pub String);

impl fmt::Display for NotConverged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NotConverged {}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

/// Exit code for an error returned by [`execute`].
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<NotConverged>() {
            return EXIT_NOT_CONVERGED;
        }
        if cause.is::<DataError>() || cause.is::<MissingRun>() {
            return EXIT_DATA;
        }
    }
    EXIT_USAGE
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fetch(a) => fetch(a),
        Command::Stats(a) => stats(a),
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
        Command::Plotdata(a) => plotdata(a),
    }
}

fn fetch(args: FetchArgs) -> Result<()> {
    let cache = args.cache_dir.clone().unwrap_or_else(default_cache_dir);
    let names: Vec<KnownDataset> = if args.names.is_empty() {
        KnownDataset::ALL.to_vec()
    } else {
        args.names
            .iter()
            .filter_map(|n| KnownDataset::from_name(n))
            .collect()
    };
    for ds in names {
        match fetch_dataset(ds, &cache, args.offline)? {
            FetchOutcome::CacheHit(p) => println!("{}: cached {}", ds.name(), p.display()),
            FetchOutcome::Downloaded(p) => println!("{}: downloaded {}", ds.name(), p.display()),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsOut {
    dataset: PathBuf,
    events: usize,
    labels: usize,
    halved: bool,
    graph: fmd_core::GraphStats,
    derived_privacy_loss: f64,
}

fn stats(args: StatsArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let path = resolve_dataset(&cfg.dataset, &args.config.cache_dir())?;
    let log = read_events(&path)?;
    let g = load_graph(&path, cfg.halve)?;
    print_json(&StatsOut {
        events: log.len(),
        labels: log.distinct_labels(),
        halved: cfg.halve,
        graph: graph_stats(&g),
        derived_privacy_loss: derive_privacy_loss(&g),
        dataset: path,
    })
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = args.config.resolve()?;
    if !args.objectives.is_empty() {
        cfg.objectives = args.objectives.iter().map(|&o| o.into()).collect();
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate().map_err(|e| UsageError(format!("{e:#}")))?;
    let outcome = run_experiment(&cfg, &args.config.cache_dir())?;
    let stuck = outcome.non_converged();
    println!(
        "{} runs written to {} ({} not converged)",
        outcome.manifest.runs.len(),
        outcome.dir.display(),
        stuck.len()
    );
    for r in &stuck {
        eprintln!("not converged: ({}, {})", r.init_label, r.objective.label());
    }
    if args.strict && !stuck.is_empty() {
        bail!(NotConverged(format!(
            "{} run(s) hit the iteration cap",
            stuck.len()
        )));
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let path = resolve_dataset(&cfg.dataset, &args.config.cache_dir())?;
    let g = load_graph(&path, cfg.halve)?;
    let params = cfg.game_params(&g)?;
    let (profile, objective) = match (&args.profile, &args.run) {
        (Some(p), _) => {
            let file = File::open(p).map_err(|e| DataError(format!("opening {}: {e}", p.display())))?;
            let profile = Profile::read_csv(&params.ladder, file)
                .map_err(|e| DataError(format!("{}: {e}", p.display())))?;
            (profile, objective_of(args.objective)?)
        }
        (None, Some(r)) => {
            let rec: RunRecord = read_json(r).map_err(|e| DataError(format!("{e:#}")))?;
            (rec.terminal, rec.objective)
        }
        (None, None) => bail!(UsageError("either --profile or --run is required".into())),
    };
    let objective = match objective {
        RunObjective::Nash => Objective::OwnUtility,
        RunObjective::Social => Objective::Welfare,
    };
    let report = if args.step_only {
        verify_step_stable(&g, &params, &profile, objective, cfg.epsilon)?
    } else {
        verify_against(&g, &params, &profile, objective, cfg.epsilon, args.relative)?
    };
    print_json(&report)?;
    if args.strict && !report.is_equilibrium() {
        bail!(NotConverged(format!(
            "{} node(s) can gain more than epsilon",
            report.violations.len()
        )));
    }
    Ok(())
}

fn objective_of(o: ObjectiveArg) -> Result<RunObjective> {
    match o {
        ObjectiveArg::Nash => Ok(RunObjective::Nash),
        ObjectiveArg::Social => Ok(RunObjective::Social),
        ObjectiveArg::UniformSweep => bail!(UsageError("verify takes nash or social".into())),
    }
}

#[derive(Serialize)]
struct OracleOut {
    node_count: usize,
    levels: usize,
    ne_profiles: Vec<Profile>,
    so_profiles: Vec<Profile>,
    so_welfare: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    welfare: Option<Vec<f64>>,
}

fn oracle(args: OracleArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let path = resolve_dataset(&cfg.dataset, &args.config.cache_dir())?;
    let g = load_graph(&path, cfg.halve)?;
    let params = cfg.game_params(&g)?;
    let res = enumerate_oracle(&g, &params, args.tolerance)?;
    print_json(&OracleOut {
        node_count: g.node_count(),
        levels: params.ladder.len(),
        ne_profiles: res.ne_profiles,
        so_profiles: res.so_profiles,
        so_welfare: res.so_welfare,
        welfare: args.with_welfare.then_some(res.welfare),
    })
}

fn plotdata(args: PlotArgs) -> Result<()> {
    let figures: Vec<Figure> = if args.figure == "all" {
        Figure::ALL.to_vec()
    } else {
        vec![args.figure.parse().map_err(UsageError)?]
    };
    let bundles = args
        .bundles
        .iter()
        .map(|d| Bundle::open(d).map_err(|e| anyhow::Error::new(DataError(format!("{e:#}")))))
        .collect::<Result<Vec<_>>>()?;
    let all = figures.len() > 1;
    for fig in figures {
        match emit_plot_data(&bundles, fig, args.init.as_deref(), &args.out) {
            Ok(p) => println!("{}", p.display()),
            // With `all`, figures the bundles cannot support are skipped.
            Err(e) if all && e.is::<MissingRun>() => eprintln!("skipped {}: {e}", fig.name()),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
