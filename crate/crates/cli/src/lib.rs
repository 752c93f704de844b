//! The `commgraph` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or
//! training error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use commgraph::baselines::{distmult_train, MethodKind};
use commgraph::dataset::TripletDataset;
use commgraph::error::ErrorClass;
use commgraph::evaluation::{run_experiment, ExperimentConfig};
use commgraph::ingest::{build_dataset, parse_connection_log, IngestConfig, LogFormat};
use commgraph::model::{self, HyperParams, Method};
use commgraph::numeric::Rng;
use commgraph::scoring::{batch_score, read_triplet_list};
use commgraph::snapshot::{load_model, save_model};
use commgraph::synthgen::{generate, log_ingest_config, write_connection_log, SynthSpec};
use commgraph::{Error, Result};

/// Seed used by `synth` when `--seed` is absent.
pub const DEFAULT_SYNTH_SEED: u64 = 7;

/// How many times `synth --log` repeats each triplet in the connection log.
const LOG_REPEATS: usize = 3;

#[derive(Debug, Parser)]
#[command(name = "commgraph", version, about = "Learn and score ICS communication triplets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a connection log into a train/test triplet dataset.
    Ingest(IngestArgs),
    /// Generate a synthetic dataset (and optionally a connection log).
    Synth(SynthArgs),
    /// Train an R-GCN or DistMult model on a dataset.
    Train(TrainArgs),
    /// Score a list of triplets against a trained model.
    Score(ScoreArgs),
    /// Run the link-prediction and anomaly-detection evaluation.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Connection log with columns ts, server_ip, proto, port, client_ip.
    #[arg(long)]
    input: PathBuf,
    /// Ingest configuration (TOML: internal_cidrs, train_window, test_window).
    #[arg(long)]
    config: PathBuf,
    /// Dataset file to write.
    #[arg(long)]
    output: PathBuf,
    /// Log format, `tsv` or `csv`; guessed from the file extension if absent.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Dataset file to write.
    #[arg(long)]
    output: PathBuf,
    /// Synthetic plant spec (TOML); the built-in desk-scale plant if absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator seed [default: 7].
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the dataset as a TSV connection log.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Write the ingest configuration matching `--log`.
    #[arg(long, requires = "log")]
    log_config: Option<PathBuf>,
}

/// Hyperparameter flags; each one overrides the config file.
#[derive(Debug, Args, Default)]
struct HyperFlags {
    /// Training epochs [default: 400].
    #[arg(long)]
    epochs: Option<usize>,
    /// Embedding dimension [default: 100 for rgcn, 50 for distmult].
    #[arg(long)]
    dim: Option<usize>,
    /// Block size of the block-diagonal relation weights [default: 10].
    #[arg(long)]
    block_size: Option<usize>,
    /// Dropout rate on each layer input [default: 0.2 for rgcn, 0 for distmult].
    #[arg(long)]
    dropout: Option<f64>,
    /// L2 penalty weight [default: 0 for rgcn, 0.01 for distmult].
    #[arg(long)]
    l2: Option<f64>,
    /// Adam learning rate [default: 0.01 for rgcn, 0.02 for distmult].
    #[arg(long)]
    lr: Option<f64>,
    /// Negative samples per positive triplet [default: 10].
    #[arg(long)]
    neg_rate: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset file.
    #[arg(long)]
    input: PathBuf,
    /// Model snapshot to write.
    #[arg(long)]
    output: PathBuf,
    /// `rgcn` or `distmult` [default: rgcn].
    #[arg(long)]
    method: Option<String>,
    /// Hyperparameter file (TOML keys as in the model snapshot header).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training seed [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    hyper: HyperFlags,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Model snapshot.
    #[arg(long)]
    model: PathBuf,
    /// TSV with columns server_ip, relation, client_ip.
    #[arg(long)]
    input: PathBuf,
    /// Report to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Dataset file.
    #[arg(long)]
    input: PathBuf,
    /// Results table (TSV). A JSON copy is written next to it.
    #[arg(long)]
    output: PathBuf,
    /// `all` or a comma-separated subset of rgcn,distmult,1st-order,2nd-order,random.
    #[arg(long)]
    method: Option<String>,
    /// Number of generated anomalous triplets [default: 500].
    #[arg(long)]
    anomaly_count: Option<usize>,
    /// Evaluation seed for anomaly generation and the random scorer [default: 7].
    #[arg(long = "seed")]
    eval_seed: Option<u64>,
    /// Experiment file (TOML: methods, anomaly_count, eval_seed, [rgcn], [distmult]).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training seed for both learned methods [default: 42].
    #[arg(long)]
    train_seed: Option<u64>,
    #[command(flatten)]
    hyper: HyperFlags,
}

/// Hyperparameter keys accepted in config files. Missing keys keep the
/// method's defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperOverrides {
    method: Option<Method>,
    hidden_dim: Option<usize>,
    block_size: Option<usize>,
    dropout_rate: Option<f64>,
    l2_weight: Option<f64>,
    learning_rate: Option<f64>,
    negative_rate: Option<usize>,
    epochs: Option<usize>,
    seed: Option<u64>,
}

impl HyperOverrides {
    fn apply(&self, hp: &mut HyperParams) {
        set(&mut hp.hidden_dim, self.hidden_dim);
        set(&mut hp.block_size, self.block_size);
        set(&mut hp.dropout_rate, self.dropout_rate);
        set(&mut hp.l2_weight, self.l2_weight);
        set(&mut hp.learning_rate, self.learning_rate);
        set(&mut hp.negative_rate, self.negative_rate);
        set(&mut hp.epochs, self.epochs);
        set(&mut hp.seed, self.seed);
    }
}

impl HyperFlags {
    fn apply(&self, hp: &mut HyperParams) {
        set(&mut hp.epochs, self.epochs);
        set(&mut hp.hidden_dim, self.dim);
        set(&mut hp.block_size, self.block_size);
        set(&mut hp.dropout_rate, self.dropout);
        set(&mut hp.l2_weight, self.l2);
        set(&mut hp.learning_rate, self.lr);
        set(&mut hp.negative_rate, self.neg_rate);
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalFile {
    methods: Option<String>,
    anomaly_count: Option<usize>,
    eval_seed: Option<u64>,
    #[serde(default)]
    rgcn: HyperOverrides,
    #[serde(default)]
    distmult: HyperOverrides,
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn warn_rows(errors: &[commgraph::ingest::RowError]) {
    const SHOWN: usize = 20;
    for e in errors.iter().take(SHOWN) {
        eprintln!("warning: line {}: {}", e.line, e.message);
    }
    if errors.len() > SHOWN {
        eprintln!("warning: {} more rows skipped", errors.len() - SHOWN);
    }
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let cfg = IngestConfig::load(&args.config)?;
    let format = match &args.format {
        Some(f) => f.parse()?,
        None => LogFormat::from_path(&args.input),
    };
    let parsed = parse_connection_log(&args.input, format)?;
    warn_rows(&parsed.row_errors);
    let dataset = build_dataset(&parsed.observations, &cfg)?;
    dataset.save(&args.output)?;
    println!("{}", dataset.summary());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = match &args.config {
        Some(path) => SynthSpec::load(path)?,
        None => SynthSpec::desk_scale(),
    };
    let mut rng = Rng::seed_from_u64(args.seed.unwrap_or(DEFAULT_SYNTH_SEED));
    let out = generate(&spec, &mut rng)?;
    out.dataset.save(&args.output)?;
    if let Some(log) = &args.log {
        let mut w = create(log)?;
        write_connection_log(&out.dataset, LOG_REPEATS, &mut w)?;
        w.flush().map_err(|e| Error::io(log, e))?;
    }
    if let Some(path) = &args.log_config {
        write_text(path, &log_ingest_config().to_toml())?;
    }
    println!("{}", out.dataset.summary());
    Ok(())
}

fn train_hyperparams(args: &TrainArgs) -> Result<HyperParams> {
    let file: HyperOverrides = match &args.config {
        Some(path) => read_toml(path)?,
        None => HyperOverrides::default(),
    };
    let method = match &args.method {
        Some(m) => m.parse()?,
        None => file.method.unwrap_or(Method::Rgcn),
    };
    let mut hp = HyperParams::defaults_for(method);
    file.apply(&mut hp);
    args.hyper.apply(&mut hp);
    set(&mut hp.seed, args.seed);
    hp.validate()?;
    Ok(hp)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let hp = train_hyperparams(args)?;
    let dataset = TripletDataset::load(&args.input)?;
    let trained = match hp.method {
        Method::Rgcn => model::train(&dataset, &hp)?,
        Method::DistMult => distmult_train(&dataset, &hp)?,
    };
    save_model(&trained, &args.output)?;
    match (trained.training_log.first(), trained.training_log.last()) {
        (Some(first), Some(last)) => {
            println!("{}: {} epochs, loss {first:.6} -> {last:.6}", hp.method, hp.epochs)
        }
        _ => println!("{}: 0 epochs, initialized model written", hp.method),
    }
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let trained = load_model(&args.model)?;
    let file = File::open(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let (rows, mut errors) = read_triplet_list(file)?;
    let report = batch_score(&trained, &rows);
    errors.extend(report.errors.iter().cloned());
    errors.sort_by_key(|e| e.line);
    warn_rows(&errors);
    let mut w = create(&args.output)?;
    report.write_tsv(&mut w)?;
    w.flush().map_err(|e| Error::io(&args.output, e))?;
    println!(
        "whitelisted {}\tunseen {}\tscored {}\tskipped {}",
        report.whitelisted,
        report.unseen,
        report.scored,
        errors.len()
    );
    Ok(())
}

fn experiment_config(args: &EvalArgs) -> Result<ExperimentConfig> {
    let file: EvalFile = match &args.config {
        Some(path) => read_toml(path)?,
        None => EvalFile::default(),
    };
    let mut cfg = ExperimentConfig::default();
    if let Some(m) = args.method.as_deref().or(file.methods.as_deref()) {
        cfg.methods = MethodKind::parse_list(m)?;
    }
    set(&mut cfg.anomaly_count, file.anomaly_count);
    set(&mut cfg.anomaly_count, args.anomaly_count);
    set(&mut cfg.eval_seed, file.eval_seed);
    set(&mut cfg.eval_seed, args.eval_seed);
    for (hp, over) in [(&mut cfg.rgcn, &file.rgcn), (&mut cfg.distmult, &file.distmult)] {
        if over.method.is_some() {
            return Err(Error::Argument("method cannot be set inside [rgcn] or [distmult]".into()));
        }
        over.apply(hp);
        args.hyper.apply(hp);
        set(&mut hp.seed, args.train_seed);
        hp.validate()?;
    }
    Ok(cfg)
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let json_path = args.output.with_extension("json");
    if json_path == args.output {
        return Err(Error::Argument(
            "--output must not have a .json extension; the JSON copy is written next to it".into(),
        ));
    }
    let cfg = experiment_config(args)?;
    let dataset = TripletDataset::load(&args.input)?;
    let results = run_experiment(&dataset, &cfg)?;
    let tsv = results.to_tsv();
    write_text(&args.output, &tsv)?;
    write_text(&json_path, &results.to_json())?;
    print!("{tsv}");
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numeric => 3,
    }
}

/// Parse `args` (including the program name) and run the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
