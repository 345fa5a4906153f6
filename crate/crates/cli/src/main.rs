use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bourse_core::pipeline::{plan, Pipeline, PipelineError, RawConfig, Stage};
use bourse_core::synth::{synthetic_stock, StockParams, TextModel};
use clap::{Args, Parser, Subcommand};

/// Forum-sentiment indices and lagged-regression forecasts, stage by stage.
#[derive(Parser)]
#[command(name = "bourse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Key-value TOML file with every pipeline setting.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the stage plan without running anything.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Load comments and market data, assign trading days.
    Ingest(Common),
    /// Normalize, tokenize, stem and emit n-grams.
    Preprocess(Common),
    /// PMI polarity lexicon from labeled comments.
    BuildLexicon(Common),
    /// Cross-validate and train the comment classifier.
    Train(Common),
    /// Label every comment.
    Classify(Common),
    /// Per-user trust coefficients.
    Trust(Common),
    /// Daily sentiment indices and volume series.
    Indices(Common),
    /// ACF, CCF and Granger tables on the training segment.
    Analyze(Common),
    /// Baseline and sentiment-augmented regressions.
    Fit(Common),
    /// One-step-ahead test predictions, MAPE and direction accuracy.
    Evaluate(Common),
    /// M0-vs-M1 comparison table.
    Report(Common),
    /// Every stage in order.
    All(Common),
    /// Write a synthetic stock (comments, market, config) for trying the pipeline.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write into; created if absent.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "SYN")]
    symbol: String,
    #[arg(long, default_value_t = StockParams::default().n_days)]
    days: usize,
    /// Return loading on the previous day's standardized count-with-likes.
    #[arg(long, default_value_t = StockParams::default().beta)]
    beta: f64,
}

fn error_json(err: &PipelineError) -> serde_json::Value {
    serde_json::json!({
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
            "details": err.details(),
        }
    })
}

fn pipeline(common: &Common) -> Result<Pipeline, PipelineError> {
    let mut raw = match &common.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    if let Some(out) = &common.out {
        raw.set("out", out.display().to_string());
    }
    if let Some(seed) = common.seed {
        raw.set("seed", seed.to_string());
    }
    let mut bad = Vec::new();
    for pair in &common.set {
        if let Err(PipelineError::Config(e)) = raw.set_pair(pair) {
            bad.extend(e);
        }
    }
    if !bad.is_empty() {
        return Err(PipelineError::Config(bad));
    }
    Ok(Pipeline::new(raw.resolve()?))
}

fn run(common: &Common, stages: &[Stage]) -> Result<(), PipelineError> {
    let p = pipeline(common)?;
    if common.dry_run {
        print!("{}", p.describe(&plan(stages, &p.config)));
        return Ok(());
    }
    for &stage in stages {
        let outcome = p.run_stage(stage)?;
        for path in outcome.outputs {
            println!("{stage}: wrote {}", path.display());
        }
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<(), PipelineError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| PipelineError::Io { path, source }
    };
    std::fs::create_dir_all(&args.dir).map_err(io(&args.dir))?;
    let params = StockParams {
        n_days: args.days,
        beta: args.beta,
        ..StockParams::default()
    };
    let stock = synthetic_stock(&args.symbol, &params, &TextModel::planted(), args.seed);
    let (comments, market) = stock.write_inputs(&args.dir).map_err(io(&args.dir))?;
    let name = |p: &Path| p.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let config = format!(
        "comments = \"{}\"\nmarket = \"{}\"\nout = \"out\"\nseed = {}\n",
        name(&comments),
        name(&market),
        args.seed
    );
    let path = args.dir.join("config.toml");
    std::fs::write(&path, config).map_err(io(&path))?;
    println!("wrote {}, {}, {}", comments.display(), market.display(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let v = serde_json::json!({
                "error": {"kind": "usage", "message": e.to_string(), "details": {}}
            });
            eprintln!("{v}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Ingest(c) => run(c, &[Stage::Ingest]),
        Command::Preprocess(c) => run(c, &[Stage::Preprocess]),
        Command::BuildLexicon(c) => run(c, &[Stage::BuildLexicon]),
        Command::Train(c) => run(c, &[Stage::Train]),
        Command::Classify(c) => run(c, &[Stage::Classify]),
        Command::Trust(c) => run(c, &[Stage::Trust]),
        Command::Indices(c) => run(c, &[Stage::Indices]),
        Command::Analyze(c) => run(c, &[Stage::Analyze]),
        Command::Fit(c) => run(c, &[Stage::Fit]),
        Command::Evaluate(c) => run(c, &[Stage::Evaluate]),
        Command::Report(c) => run(c, &[Stage::Report]),
        Command::All(c) => run(c, &Stage::ALL),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
