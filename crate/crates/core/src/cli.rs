//! Command-line front end: `gen`, `simulate`, `bench`, `report` and `serve`.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::catalog::{generate_synthetic, Catalog, ItemIdx, SyntheticSpec};
use crate::policy::{DependenceInput, DependenceRefresh, Policy, PolicyConfig, QueryMode};
use crate::scorer::{
    cold_start_scores, frequency_scores, load_scores, DependenceModel, ScoreVector,
};
use crate::service::{self, AppState};
use crate::session::{run_session, Limits};
use crate::simulator::{
    render_table, run_benchmark, BenchConfig, CatalogSource, MetricsReport, ScoreSource,
    SimulatedUser, TargetChoice,
};

/// Where item scores come from: `cold`, `file:<path>` or `freq:<path>`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScoresArg {
    Cold,
    File(PathBuf),
    Freq(PathBuf),
}

impl std::str::FromStr for ScoresArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "cold" {
            return Ok(ScoresArg::Cold);
        }
        match s.split_once(':') {
            Some(("file", p)) if !p.is_empty() => Ok(ScoresArg::File(p.into())),
            Some(("freq", p)) if !p.is_empty() => Ok(ScoresArg::Freq(p.into())),
            _ => Err(format!(
                "expected cold, file:<path> or freq:<path>, got {s:?}"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(
    name = "certainty",
    version,
    about = "Conversational recommendation by expected certainty gain"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic catalog with its target ids.
    Gen(GenArgs),
    /// Run one verbose session against a simulated user.
    Simulate(SimulateArgs),
    /// Run many simulated sessions and write a metrics report.
    Bench(BenchArgs),
    /// Render metrics reports.
    Report(ReportArgs),
    /// Start the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    pub items: usize,
    #[arg(long, default_value_t = 3)]
    pub discrete: usize,
    #[arg(long, default_value_t = 1)]
    pub continuous: usize,
    #[arg(long = "values", default_value_t = 4)]
    pub values_per_attr: usize,
    /// Distinct binary codes over the discrete attributes.
    #[arg(long)]
    pub perfect_split: bool,
}

impl SynthArgs {
    fn spec(&self, seed: u64, targets: usize) -> SyntheticSpec {
        if self.perfect_split {
            let mut spec = SyntheticSpec::perfect_split(seed, self.items, self.discrete);
            spec.targets = targets;
            return spec;
        }
        SyntheticSpec {
            seed,
            items: self.items,
            discrete: self.discrete,
            continuous: self.continuous,
            values_per_attr: self.values_per_attr,
            targets,
            perfect_split: false,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub synth: SynthArgs,
    #[arg(long, default_value_t = 1)]
    pub targets: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long)]
    pub policy: Policy,
    #[arg(long, default_value = "declared")]
    pub mode: QueryMode,
    #[arg(long = "kmax", default_value_t = 5)]
    pub k_max: usize,
    /// `core-d`: estimate dependence once from the full catalog.
    #[arg(long)]
    pub frozen_dependence: bool,
    /// `core-d`: read dependence weights from a JSON file.
    #[arg(long)]
    pub dependence: Option<PathBuf>,
    /// Skip the final forced item query after the budget.
    #[arg(long)]
    pub no_forced: bool,
}

impl PolicyArgs {
    fn config(&self, catalog: Option<&Catalog>) -> Result<PolicyConfig> {
        let mut cfg = PolicyConfig::new(self.policy, self.mode);
        if self.frozen_dependence {
            cfg.dependence_refresh = DependenceRefresh::Frozen;
        }
        if let Some(path) = &self.dependence {
            let catalog = catalog.context("--dependence needs a fixed --catalog")?;
            let model = DependenceModel::load(path, catalog)?;
            cfg.dependence = DependenceInput::External(Arc::new(model));
        }
        Ok(cfg)
    }

    fn limits(&self) -> Limits {
        Limits {
            k_max: self.k_max,
            forced_final: !self.no_forced,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long, default_value = "cold")]
    pub scores: ScoresArg,
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub seed: u64,
    /// Target item id; repeatable. Defaults to the file's targets, else one random item.
    #[arg(long = "target")]
    pub targets: Vec<String>,
    /// Append the transcript as a JSON line.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Fixed catalog; without it each session gets a fresh synthetic catalog.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthArgs,
    #[arg(long, default_value = "cold")]
    pub scores: ScoresArg,
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, default_value_t = 1000)]
    pub sessions: usize,
    #[arg(long)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Does not affect the output.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Random targets per session on a fixed catalog.
    #[arg(long, default_value_t = 1)]
    pub targets: usize,
    /// Upper bound of the 1..=N targets per synthetic session.
    #[arg(long, default_value_t = 3)]
    pub max_targets: usize,
    /// Use the targets stored in the catalog file for every session.
    #[arg(long)]
    pub fixed_targets: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Serve static files (the chat UI) from this directory.
    #[arg(long)]
    pub ui: Option<PathBuf>,
    /// Append finished transcripts to this JSONL file.
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
    /// Preload a catalog under its file stem; repeatable.
    #[arg(long = "catalog")]
    pub catalogs: Vec<PathBuf>,
}

/// Catalog file plus the optional `targets` id list written by `gen`.
fn load_catalog_with_targets(path: &Path) -> Result<(Catalog, Vec<ItemIdx>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let targets: Vec<String> = match value.get("targets") {
        Some(t) => {
            serde_json::from_value(t.clone()).context("targets must be a list of item ids")?
        }
        None => Vec::new(),
    };
    let catalog = Catalog::from_json_value(value)?;
    let targets = resolve_items(&catalog, &targets)?;
    Ok((catalog, targets))
}

fn resolve_items(catalog: &Catalog, ids: &[String]) -> Result<Vec<ItemIdx>> {
    ids.iter()
        .map(|id| {
            catalog
                .item_index(id)
                .with_context(|| format!("unknown item {id:?}"))
        })
        .collect()
}

fn load_scores_arg(arg: &ScoresArg, catalog: &Catalog, smoothing: f64) -> Result<ScoreVector> {
    Ok(match arg {
        ScoresArg::Cold => cold_start_scores(catalog),
        ScoresArg::File(p) => load_scores(p, catalog)?,
        ScoresArg::Freq(p) => frequency_scores(p, catalog, smoothing)?,
    })
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let (catalog, targets) = generate_synthetic(&args.synth.spec(args.seed, args.targets))?;
    let mut value = catalog.to_json_value();
    value["targets"] = targets
        .iter()
        .map(|&t| Value::from(catalog.item_id(t)))
        .collect();
    let text = serde_json::to_string_pretty(&value)? + "\n";
    write_output(Some(&args.out), &text)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (catalog, file_targets) = load_catalog_with_targets(&args.catalog)?;
    let scores = load_scores_arg(&args.scores, &catalog, args.smoothing)?;
    let cfg = args.policy.config(Some(&catalog))?;
    let targets = if !args.targets.is_empty() {
        resolve_items(&catalog, &args.targets)?
    } else if !file_targets.is_empty() {
        file_targets
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        vec![ItemIdx(rand::Rng::random_range(&mut rng, 0..catalog.len()))]
    };
    let catalog = Arc::new(catalog);
    let mut user = SimulatedUser::new(&catalog, targets, args.seed)?;
    let target_ids: Vec<&str> = user.targets().iter().map(|&t| catalog.item_id(t)).collect();
    println!("targets: {}", target_ids.join(", "));
    let session = run_session(
        catalog.clone(),
        Arc::new(scores),
        cfg,
        args.policy.limits(),
        &mut user,
    )?;
    let transcript = session.transcript(format!("sim-{}", args.seed), args.seed);
    for event in &transcript.events {
        let a = &event.action;
        let subject = match (a.kind.as_str(), &a.item, &a.attr) {
            ("item", Some(item), _) => format!("item {item}"),
            ("attribute", _, Some(attr)) => format!("which {attr}"),
            ("value", _, Some(attr)) => format!(
                "{attr} = {}",
                a.value.as_ref().map(|v| v.to_string()).unwrap_or_default()
            ),
            (_, _, Some(attr)) => format!("{attr} >= {}", a.threshold.unwrap_or_default()),
            _ => a.kind.clone(),
        };
        let answer = match &event.answer.value {
            Some(v) => format!("{} {v}", event.answer.kind),
            None => event.answer.kind.clone(),
        };
        println!(
            "turn {:>2}{} {subject}? gain {:.4} -> {answer}; remaining {}, uncertainty {:.4}",
            event.turn,
            if a.forced { " (forced)" } else { "" },
            a.gain,
            event.remaining,
            event.uncertainty
        );
    }
    let outcome = &transcript.outcome;
    match (&outcome.item, outcome.success_turn) {
        (Some(item), Some(turn)) => println!("outcome: success, {item} at turn {turn}"),
        _ => println!("outcome: {}", outcome.status),
    }
    if let Some(path) = &args.transcript {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        writeln!(file, "{}", transcript.to_jsonl())?;
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let (source, scores, cfg) = match &args.catalog {
        Some(path) => {
            let (catalog, file_targets) = load_catalog_with_targets(path)?;
            let targets = if args.fixed_targets {
                if file_targets.is_empty() {
                    bail!("--fixed-targets: {} lists no targets", path.display());
                }
                TargetChoice::Fixed(file_targets)
            } else {
                TargetChoice::Random {
                    count: args.targets,
                }
            };
            let scores = match args.scores {
                ScoresArg::Cold => ScoreSource::Cold,
                _ => ScoreSource::Fixed(Arc::new(load_scores_arg(
                    &args.scores,
                    &catalog,
                    args.smoothing,
                )?)),
            };
            let cfg = args.policy.config(Some(&catalog))?;
            (
                CatalogSource::Fixed {
                    catalog: Arc::new(catalog),
                    targets,
                },
                scores,
                cfg,
            )
        }
        None => {
            if args.scores != ScoresArg::Cold {
                bail!("synthetic benchmarks only support --scores cold");
            }
            let source = CatalogSource::Synthetic {
                spec: args.synth.spec(0, 1),
                max_targets: args.max_targets,
            };
            (source, ScoreSource::Cold, args.policy.config(None)?)
        }
    };
    let mut bench = BenchConfig::new(source, cfg, args.policy.k_max, args.sessions, args.seed);
    bench.scores = scores;
    bench.limits = args.policy.limits();
    bench.jobs = args.jobs;
    let report = run_benchmark(&bench)?;
    write_output(args.out.as_deref(), &report.to_json_string())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let reports = args
        .inputs
        .iter()
        .map(|p| {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<MetricsReport>(&text)
                .with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let text = match args.format {
        ReportFormat::Table => render_table(&reports),
        ReportFormat::Json if reports.len() == 1 => reports[0].to_json_string(),
        ReportFormat::Json => serde_json::to_string_pretty(&reports)? + "\n",
    };
    write_output(None, &text)
}

fn cmd_serve(args: &ServeArgs) -> Result<()> {
    let mut state = AppState::new();
    if let Some(path) = &args.transcripts {
        state = state
            .with_transcript_log(path)
            .with_context(|| format!("opening {}", path.display()))?;
    }
    for path in &args.catalogs {
        let (catalog, _) = load_catalog_with_targets(path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .context("catalog path has no file name")?;
        state.insert_catalog(id, Arc::new(catalog));
    }
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{}", args.addr);
    runtime.block_on(service::serve(args.addr, Arc::new(state), args.ui.clone()))?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Report(a) => cmd_report(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

/// Parses `argv` (including the program name), runs it and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(run_cli(std::env::args_os()) as u8)
}
