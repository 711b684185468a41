//! `forgeda`: synthesize forgery datasets, train domain-adapted detectors,
//! evaluate and report.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forgeda_core::da_train::Method;
use forgeda_core::synth::ColorSpace;
use forgeda_core::{Error, Preset, Result};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "forgeda", version, about = "Copy-move forgery synthesis and domain-adapted detection")]
struct Cli {
    /// TOML config file; each command reads its own section.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the section's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the section's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a small procedural corpus with COCO-style annotations.
    ToyCorpus(ToyArgs),
    /// Synthesize authentic/forged pairs from an annotated corpus.
    Generate(GenerateArgs),
    /// Tag records of a manifest as train or test.
    Split(SplitArgs),
    /// Train a detector (DANN, DDC or source-only).
    Train(TrainArgs),
    /// Score a checkpoint on a labeled manifest.
    Eval(EvalArgs),
    /// Finite-difference check of every layer's backward pass.
    Gradcheck(GradcheckArgs),
    /// Combine eval outputs into one table.
    Report(ReportArgs),
    /// Train and score once per color space.
    Grid(GridArgs),
}

#[derive(Args, Debug)]
struct ToyArgs {
    /// Number of images.
    #[arg(long)]
    images: Option<usize>,
    /// Image side in pixels.
    #[arg(long)]
    size: Option<u32>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Directory holding the corpus images.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// COCO annotation file [default: <corpus>/annotations.json].
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Total records to write (even).
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Manifest to split.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Per-class share of records tagged train.
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// dann, ddc or source_only.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// alexnet, vgg7 or mlp.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// rgb or ycrcb.
    #[arg(long, value_parser = parse_color)]
    color_space: Option<ColorSpace>,
    /// Labeled source manifest.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Unlabeled target manifest.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Batch size per domain.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint written by train.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Labeled manifest to score.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Run name shown in the report.
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Random shapes per layer and precision.
    #[arg(long, default_value_t = 10)]
    cases: usize,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// `metrics.json` files; replaces the config list when given.
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Labeled manifest each run is scored on.
    #[arg(long)]
    eval_manifest: Option<PathBuf>,
}

fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    parse_serde(s)
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    parse_serde(s)
}

fn parse_color(s: &str) -> std::result::Result<ColorSpace, String> {
    parse_serde(s)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(format!("--threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::ToyCorpus(a) => {
            let s = cfg.toy.get_or_insert_with(Default::default);
            set(&mut s.images, a.images);
            set(&mut s.size, a.size);
            set(&mut s.seed, cli.seed);
            set_opt(&mut s.out, cli.out);
            commands::toy_corpus(&cfg)
        }
        Command::Generate(a) => {
            let s = cfg.generate.get_or_insert_with(Default::default);
            set_opt(&mut s.corpus, a.corpus);
            set_opt(&mut s.annotations, a.annotations);
            set(&mut s.count, a.count);
            set(&mut s.seed, cli.seed);
            set_opt(&mut s.out, cli.out);
            commands::generate(&cfg)
        }
        Command::Split(a) => {
            let s = cfg.split.get_or_insert_with(Default::default);
            set_opt(&mut s.manifest, a.manifest);
            set(&mut s.train_fraction, a.train_fraction);
            set(&mut s.seed, cli.seed);
            set_opt(&mut s.out, cli.out);
            commands::split(&cfg)
        }
        Command::Train(a) => {
            let s = cfg.train.get_or_insert_with(Default::default);
            apply_train_args(s, a, cli.seed, cli.out);
            commands::train(&cfg)
        }
        Command::Eval(a) => {
            let s = cfg.eval.get_or_insert_with(Default::default);
            set_opt(&mut s.checkpoint, a.checkpoint);
            set_opt(&mut s.manifest, a.manifest);
            set_opt(&mut s.label, a.label);
            set_opt(&mut s.out, cli.out);
            commands::eval(&cfg)
        }
        Command::Gradcheck(a) => commands::gradcheck(cli.seed.unwrap_or(0), a.cases, cli.out.as_deref()),
        Command::Report(a) => {
            let s = cfg.report.get_or_insert_with(Default::default);
            if !a.inputs.is_empty() {
                s.inputs = a.inputs;
            }
            set_opt(&mut s.out, cli.out);
            commands::report(&cfg)
        }
        Command::Grid(a) => {
            let g = cfg.grid.get_or_insert_with(Default::default);
            set_opt(&mut g.eval_manifest, a.eval_manifest);
            set_opt(&mut g.out, cli.out);
            let t = cfg.train.get_or_insert_with(Default::default);
            set(&mut t.seed, cli.seed);
            commands::grid(&cfg)
        }
    }
}

fn apply_train_args(s: &mut config::TrainSection, a: TrainArgs, seed: Option<u64>, out: Option<PathBuf>) {
    set(&mut s.method, a.method);
    set(&mut s.preset, a.preset);
    set(&mut s.color_space, a.color_space);
    set_opt(&mut s.source_manifest, a.source);
    set_opt(&mut s.target_manifest, a.target);
    set(&mut s.epochs, a.epochs);
    set(&mut s.batch_size, a.batch_size);
    set(&mut s.seed, seed);
    set_opt(&mut s.out, out);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
