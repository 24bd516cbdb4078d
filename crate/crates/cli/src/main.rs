//! `fontgan`: generate a corpus, train, translate single images and compare
//! checkpoints.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fontgan::config::{self, apply_overrides, parse_override, to_pretty_json};
use fontgan::dataset::{generate_dataset, load_png, load_samples, save_png, DatasetConfig};
use fontgan::eval::compare_models;
use fontgan::models::{Checkpoint, Mode, ModelConfig, Models};
use fontgan::train::{self, TrainOptions, TrainingConfig, CONFIG_FILE};

#[derive(Parser)]
#[command(name = "fontgan", version, about = "Word-level font translation pipeline")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a paired multi-font corpus and its manifest.
    DatasetGen(DatasetGen),
    /// Train a recurrent or baseline model on a corpus.
    Train(Train),
    /// Translate one image into a target font.
    Translate(Translate),
    /// Compare a recurrent and a baseline checkpoint on a corpus.
    Eval(Eval),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; missing keys take their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, applied after the file (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct DatasetGen {
    #[command(flatten)]
    config: ConfigArgs,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Width {
    /// The full architecture.
    Standard,
    /// Narrow layers for smoke runs.
    Tiny,
}

#[derive(Args)]
struct Train {
    #[command(flatten)]
    config: ConfigArgs,
    /// Corpus manifest; overrides the config `manifest` key.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Continue from the checkpoint in `--out`.
    #[arg(long)]
    resume: bool,
    #[arg(long, value_enum, default_value = "standard")]
    width: Width,
    /// Stop once this many steps are done, leaving a resumable run.
    #[arg(long, value_name = "STEP")]
    stop_after_step: Option<u64>,
}

#[derive(Args)]
struct Translate {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    target_font: usize,
    /// Output PNG path.
    #[arg(long)]
    out: PathBuf,
    /// Accepted for uniformity; inference is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Eval {
    #[arg(long)]
    recurrent: PathBuf,
    #[arg(long)]
    baseline: PathBuf,
    /// Corpus manifest.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Accepted for uniformity; evaluation is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

/// An error and the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitClass<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitClass<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 2,
            error: e.into(),
        })
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 1,
            error: e.into(),
        })
    }
}

fn resolve<T>(args: &ConfigArgs) -> Result<T, Failure>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    let base: T = config::load(&args.config)
        .with_context(|| format!("--config {}", args.config.display()))
        .usage()?;
    let overrides = args
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()
        .context("--set")
        .usage()?;
    apply_overrides(&base, &overrides).context("--set").usage()
}

fn write_resolved(out: &Path, json: &str) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .with_context(|| format!("--out {}", out.display()))
        .runtime()?;
    let path = out.join(CONFIG_FILE);
    fs::write(&path, json)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()
}

fn dataset_gen(args: DatasetGen) -> Result<(), Failure> {
    let mut cfg: DatasetConfig = resolve(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let catalog = cfg
        .catalog()
        .with_context(|| format!("--config {}", args.config.config.display()))
        .usage()?;
    let vocabulary = cfg.vocabulary();
    write_resolved(&args.out, &to_pretty_json(&cfg))?;
    let summary = generate_dataset(&catalog, &vocabulary, cfg.source_font, &args.out, cfg.seed)
        .with_context(|| format!("generating the corpus in {}", args.out.display()))
        .runtime()?;
    println!(
        "wrote {} pairs over {} fonts to {}",
        summary.manifest.samples.len(),
        catalog.len(),
        summary.manifest_path.display()
    );
    Ok(())
}

fn train(args: Train) -> Result<(), Failure> {
    let mut cfg: TrainingConfig = resolve(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(data) = &args.data {
        cfg.manifest = Some(data.clone());
    }
    cfg.validate()
        .with_context(|| format!("--config {}", args.config.config.display()))
        .usage()?;
    let manifest_path = cfg
        .manifest
        .clone()
        .ok_or_else(|| anyhow!("no corpus given: pass --data or set `manifest` in the config"))
        .usage()?;
    let (manifest, samples) = load_samples(&manifest_path)
        .with_context(|| format!("--data {}", manifest_path.display()))
        .runtime()?;
    let fonts = manifest.fonts.len();
    let model_config = match args.width {
        Width::Standard => ModelConfig::standard(fonts),
        Width::Tiny => ModelConfig::tiny(fonts),
    };
    let opts = TrainOptions {
        resume: args.resume,
        stop_after_step: args.stop_after_step,
    };
    let summary = train::run(&cfg, model_config, samples, &args.out, opts)
        .with_context(|| format!("training into {}", args.out.display()))
        .runtime()?;
    println!(
        "{} model: {} steps, {} epochs{} in {:.1}s; artifacts in {}",
        summary.model,
        summary.steps,
        summary.epochs_completed,
        if summary.interrupted { " (stopped early)" } else { "" },
        summary.wall_clock_seconds,
        args.out.display()
    );
    Ok(())
}

fn load_models(flag: &str, path: &Path) -> Result<Models, Failure> {
    Checkpoint::load(path)
        .and_then(|ck| Models::from_checkpoint(&ck))
        .with_context(|| format!("--{flag} {}", path.display()))
        .runtime()
}

fn translate(args: Translate) -> Result<(), Failure> {
    let models = load_models("checkpoint", &args.checkpoint)?;
    if args.target_font >= models.fonts() {
        return Err(anyhow!(
            "--target-font {} is out of range: the checkpoint has {} fonts",
            args.target_font,
            models.fonts()
        ))
        .usage();
    }
    let input = load_png(&args.input)
        .with_context(|| format!("--input {}", args.input.display()))
        .runtime()?;
    let output = models
        .translate_image(&input, args.target_font, Mode::Infer)
        .with_context(|| format!("translating {}", args.input.display()))
        .runtime()?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("--out {}", args.out.display()))
            .runtime()?;
    }
    save_png(&output, &args.out)
        .with_context(|| format!("--out {}", args.out.display()))
        .runtime()?;
    println!(
        "wrote {}×{} image to {}",
        output.height(),
        output.width(),
        args.out.display()
    );
    Ok(())
}

fn eval(args: Eval) -> Result<(), Failure> {
    let recurrent = load_models("recurrent", &args.recurrent)?;
    let baseline = load_models("baseline", &args.baseline)?;
    let (_, samples) = load_samples(&args.data)
        .with_context(|| format!("--data {}", args.data.display()))
        .runtime()?;
    let report = compare_models(&recurrent, &baseline, &samples, &args.out)
        .with_context(|| format!("evaluating into {}", args.out.display()))
        .runtime()?;
    println!(
        "{} samples: L1 {:.4} vs {:.4}, seam ratio {:.4} vs {:.4} (recurrent vs baseline); report in {}",
        report.samples,
        report.recurrent.l1.mean,
        report.baseline.l1.mean,
        report.recurrent.seam_ratio.mean,
        report.baseline.seam_ratio.mean,
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::DatasetGen(a) => dataset_gen(a),
        Command::Train(a) => train(a),
        Command::Translate(a) => translate(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
