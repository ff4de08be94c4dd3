//! `divr` command-line dispatch. Exit codes: 0 success, 1 runtime error,
//! 2 usage error.

use std::ffi::OsString;
use std::io::Read;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use divr_core::diversity::{calibrate_weights_scored, DiversityReport, DiversityScorer};
use divr_core::eval::{emit_report, generate_outputs, read_outputs, run_dir, DiversityScope, Evaluator};
use divr_core::gateway::{DecodeMode, DecodeStrategy, EndpointConfig, Gateway, DEFAULT_DELIMITER};
use divr_core::pipeline::{build_dataset, read_records, write_examples, FilterKind, PipelineConfig};
use serde::Deserialize;
use serde_json::json;

pub mod server;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "divr", version, about = "Diversity scoring, multi-role data building and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Diversity report for a text (from --text, --file or stdin).
    Score(ScoreArgs),
    /// Multi-role data construction.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
    /// Run a dataset through an endpoint and score the outputs.
    Eval(EvalArgs),
    /// Fit diversity weights to human ratings.
    Calibrate(CalibrateArgs),
    /// Reward-scoring HTTP service.
    Reward {
        #[command(subcommand)]
        command: RewardCommand,
    },
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long, conflicts_with = "file")]
    text: Option<String>,
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, default_value_t = 100.0)]
    length_scale: f64,
}

#[derive(Debug, Subcommand)]
enum PipelineCommand {
    Build(BuildArgs),
}

#[derive(Debug, Args)]
struct EndpointArgs {
    /// Overrides DIVR_BASE_URL. `mock://...` uses the built-in synthetic model.
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    concurrency: Option<usize>,
}

impl EndpointArgs {
    fn gateway(&self) -> anyhow::Result<Gateway> {
        let mut cfg = EndpointConfig::from_env();
        if let Some(url) = &self.base_url {
            cfg.base_url = url.clone();
        }
        if let Some(model) = &self.model {
            cfg.model_id = model.clone();
        }
        if let Some(n) = self.concurrency {
            cfg.concurrency_limit = n;
        }
        Ok(Gateway::from_config(cfg)?)
    }
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    samples_per_role: usize,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    orderings: usize,
    #[arg(long, default_value = "self-consistency")]
    filter: FilterKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    min_roles: usize,
    #[arg(long, default_value_t = 4)]
    max_roles: usize,
    #[arg(long, default_value_t = 3)]
    roles_per_record: usize,
    #[arg(long, default_value_t = 10.0)]
    lower_pct: f64,
    #[arg(long, default_value_t = 10.0)]
    upper_pct: f64,
    #[command(flatten)]
    endpoint: EndpointArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Pre-generated outputs (JSONL of {id, text}); skips generation.
    #[arg(long)]
    outputs: Option<PathBuf>,
    #[arg(long, default_value = "regular")]
    strategy: DecodeMode,
    /// Continuations injected under morethink.
    #[arg(long, default_value_t = 3)]
    waits: u32,
    #[arg(long, default_value = "full")]
    scope: DiversityScope,
    /// Report directory; defaults to runs/run-<time>-seed<seed>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    endpoint: EndpointArgs,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// JSONL with `rating` plus either `text` or `sub_scores` (8 values).
    #[arg(long)]
    ratings: PathBuf,
}

#[derive(Debug, Subcommand)]
enum RewardCommand {
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

/// Parses `argv` and runs the subcommand, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let rendered = e.to_string();
            let line = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
            eprintln!("{line}");
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            EXIT_RUNTIME
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Score(args) => score(args),
        Command::Pipeline {
            command: PipelineCommand::Build(args),
        } => build(args),
        Command::Eval(args) => eval(args),
        Command::Calibrate(args) => calibrate(args),
        Command::Reward {
            command: RewardCommand::Serve { port, host },
        } => server::serve(SocketAddr::new(host, port), DiversityScorer::default()),
    }
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn score(args: ScoreArgs) -> anyhow::Result<()> {
    let text = match (args.text, args.file) {
        (Some(t), _) => t,
        (None, Some(path)) => read_text(&path)?,
        (None, None) => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf).context("reading stdin")?;
            buf
        }
    };
    let scorer = DiversityScorer {
        length_scale: args.length_scale,
        ..DiversityScorer::default()
    };
    let scorer = DiversityScorer::new(scorer.lexicon, scorer.weights, scorer.length_scale)?;
    print_json(&scorer.score(&text)?)
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn build(args: BuildArgs) -> anyhow::Result<()> {
    let config = PipelineConfig {
        seed: args.seed,
        n_range: (args.min_roles, args.max_roles),
        lambda: args.lambda,
        roles_per_record: args.roles_per_record,
        samples_per_role: args.samples_per_role,
        orderings: args.orderings,
        filter: args.filter,
        lower_pct: args.lower_pct,
        upper_pct: args.upper_pct,
        ..PipelineConfig::default()
    };
    config.validate()?;
    let records = read_records(&args.dataset).with_context(|| format!("reading {}", args.dataset.display()))?;
    let gateway = args.endpoint.gateway()?;
    let output = build_dataset(&records, &gateway, &config)?;
    write_examples(&args.out, &output.examples).with_context(|| format!("writing {}", args.out.display()))?;
    print_json(&output.stats)
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let records = read_records(&args.dataset).with_context(|| format!("reading {}", args.dataset.display()))?;
    let outputs = match &args.outputs {
        Some(path) => read_outputs(path, DEFAULT_DELIMITER)?,
        None => {
            let strategy = match args.strategy {
                DecodeMode::MoreThink => DecodeStrategy::more_think(args.waits),
                mode => DecodeStrategy::new(mode),
            };
            generate_outputs(&records, &args.endpoint.gateway()?, &strategy, None)?
        }
    };
    let evaluator = Evaluator {
        scope: args.scope,
        ..Evaluator::default()
    };
    let result = evaluator.evaluate_with(&records, &outputs, |r| r.answer_format())?;
    let dir = args.out.unwrap_or_else(|| run_dir(Path::new("runs"), args.seed));
    let paths = emit_report(&result, &dir)?;
    print_json(&json!({
        "records": result.per_record.len(),
        "aggregate_accuracy": result.aggregate_accuracy,
        "aggregate_diversity": result.aggregate_diversity,
        "aggregate_norm": result.aggregate_norm,
        "pearson_acc_div": result.pearson_acc_div,
        "report_dir": dir,
        "summary": paths.summary,
    }))
}

#[derive(Debug, Deserialize)]
struct RatingLine {
    rating: f64,
    text: Option<String>,
    sub_scores: Option<[f64; 8]>,
}

fn calibrate(args: CalibrateArgs) -> anyhow::Result<()> {
    let scorer = DiversityScorer::default();
    let mut samples = Vec::new();
    for (i, line) in read_text(&args.ratings)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RatingLine = serde_json::from_str(line).with_context(|| format!("line {}", i + 1))?;
        let report = match (parsed.sub_scores, parsed.text) {
            (Some(d), _) => DiversityReport::from_sub_scores(d, 1),
            (None, Some(text)) => scorer.score(&text).with_context(|| format!("line {}", i + 1))?,
            (None, None) => bail!("line {}: needs `text` or `sub_scores`", i + 1),
        };
        samples.push((report, parsed.rating));
    }
    let fit = calibrate_weights_scored(&samples)?;
    print_json(&json!({ "weights": fit.weights, "pearson": fit.pearson, "samples": samples.len() }))
}
