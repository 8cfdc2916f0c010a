//! The `ggparse` command line.
//!
//! Exit codes: 0 success, 2 usage, configuration or unreadable input,
//! 3 model errors, 4 data errors such as misaligned files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::decoder::{decode, DecodeOptions, DecoderKind};
use crate::error::{Error, Result};
use crate::evaluation::{
    attachment_scores, benchmark_decode, benchmark_scores, decode_corpus, evaluate_model,
    score_corpus, BenchReport, ReportFormat,
};
use crate::model::Model;
use crate::scores::ScoreSet;
use crate::scores_io::{read_scores, write_scores};
use crate::synthetic::random_scores;
use crate::training::train_with;
use crate::tree::{is_projective, oracle_scores, validate_tree, DepTree};
use crate::treebank::{read_conll, write_conll, Convention, Format, Sentence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_DATA: i32 = 4;

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Io { .. } | Error::Format { .. } | Error::Config(_) => EXIT_CONFIG,
        Error::Model(_) => EXIT_MODEL,
        Error::Argument(_) | Error::Numeric { .. } => EXIT_DATA,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ggparse",
    version,
    about = "Greedy dependency parsing with parsing-order scores",
    after_help = "Any configuration key can be given as --key=value, e.g. --hidden-dim=64.\n\
                  Log verbosity is read from GGPARSE_LOG (error, warn, info, debug)."
)]
pub struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// greedy-projective, greedy-nonprojective or mst.
    #[arg(long, global = true)]
    pub decoder: Option<DecoderKind>,
    /// Punctuation convention: ud or ptb.
    #[arg(long, global = true)]
    pub convention: Option<Convention>,
    /// Worker threads for sentence-level parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// table or kv.
    #[arg(long, global = true, default_value = "table")]
    pub report_format: ReportFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write the best checkpoint.
    Train(TrainArgs),
    /// Parse a treebank with a trained model.
    Parse(ParseArgs),
    /// Score predicted trees against gold trees.
    Evaluate(EvaluateArgs),
    /// Check that decoders rebuild gold trees from oracle scores.
    OracleCheck(OracleArgs),
    /// Decoder operation counts and throughput.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Where to write the checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Also write the per-epoch log lines to this file.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    #[arg(
        long,
        required_unless_present = "scores_in",
        conflicts_with = "scores_in"
    )]
    pub model: Option<PathBuf>,
    /// Decode score sets from an interchange file instead of running a model.
    #[arg(long)]
    pub scores_in: Option<PathBuf>,
    /// Input treebank.
    #[arg(long, alias = "input")]
    pub test: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Dump the score sets in the interchange format.
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Gold treebank.
    #[arg(long, alias = "test")]
    pub gold: PathBuf,
    /// Predicted treebank. Without it, `--model` parses the gold file.
    #[arg(long, alias = "output")]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also report predicted trees with more than one root child.
    #[arg(long)]
    pub single_root: bool,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Gold treebank.
    #[arg(long, alias = "train")]
    pub test: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Benchmark this model on `--test`. Without it, random score sets are used.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Sentence lengths of the random score sets.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
    pub lengths: Vec<usize>,
    /// Random score sets per length.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    /// Print operation counts of every sentence.
    #[arg(long)]
    pub per_sentence: bool,
}

/// Split `--key=value` config overrides from the arguments clap handles.
pub fn split_overrides(args: &[String]) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            if let Some((key, value)) = arg.strip_prefix("--").and_then(|a| a.split_once('=')) {
                let handled_by_flag = matches!(key, "seed" | "decoder" | "convention" | "config");
                if Config::is_key(key) && !handled_by_flag {
                    overrides.push((key.to_owned(), value.to_owned()));
                    continue;
                }
            }
        }
        rest.push(arg.clone());
    }
    (rest, overrides)
}

struct Settings<'a> {
    cli: &'a Cli,
    overrides: &'a [(String, String)],
}

impl Settings<'_> {
    /// Defaults or `base`, then the config file, `--key=value` overrides and
    /// the dedicated flags.
    fn config(&self, base: Option<&Config>) -> Result<Config> {
        let mut config = base.cloned().unwrap_or_default();
        if let Some(path) = &self.cli.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            config.apply_pairs(&text)?;
        }
        for (key, value) in self.overrides {
            config.set(key, value)?;
        }
        if let Some(seed) = self.cli.seed {
            config.seed = seed;
        }
        if let Some(decoder) = self.cli.decoder {
            config.decoder = decoder;
        }
        if let Some(convention) = self.cli.convention {
            config.convention = convention;
        }
        Ok(config)
    }
}

fn read_treebank(path: &Path) -> Result<Vec<Sentence>> {
    read_conll(path, Format::from_path(path))
}

fn load_model(path: &Path) -> Result<Model> {
    Model::load(path).map_err(|e| match e {
        Error::Io { path, source } => Error::Model(format!("{}: {}", path.display(), source)),
        other => other,
    })
}

/// Parse the arguments and run one command. Reports go to `out`, diagnostics
/// to `err`.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (clap_args, overrides) = split_overrides(args);
    let cli = match Cli::try_parse_from(&clap_args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            if code == 0 {
                let _ = write!(out, "{}", rendered);
            } else {
                let _ = write!(err, "{}", rendered);
            }
            return code;
        }
    };
    let settings = Settings {
        cli: &cli,
        overrides: &overrides,
    };

    let result = match cli.jobs {
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(&settings))),
        None => dispatch(&settings),
    };
    match result {
        Ok(text) => match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "error: writing output: {}", e);
                EXIT_CONFIG
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {}", e);
            exit_code(&e)
        }
    }
}

fn dispatch(settings: &Settings<'_>) -> Result<String> {
    let format = settings.cli.report_format;
    match &settings.cli.command {
        Command::Train(a) => cmd_train(settings, a),
        Command::Parse(a) => cmd_parse(settings, a),
        Command::Evaluate(a) => cmd_evaluate(settings, a, format),
        Command::OracleCheck(a) => cmd_oracle_check(settings, a),
        Command::Bench(a) => cmd_bench(settings, a, format),
    }
}

fn cmd_train(settings: &Settings<'_>, args: &TrainArgs) -> Result<String> {
    let config = settings.config(None)?;
    let train_set = read_treebank(&args.train)?;
    let dev = match &args.dev {
        Some(p) => read_treebank(p)?,
        None => Vec::new(),
    };
    let mut log_file = match &args.log {
        Some(p) => Some(BufWriter::new(
            File::create(p).map_err(|e| Error::io(p, e))?,
        )),
        None => None,
    };
    info!(
        "training on {} sentences, {} dev sentences",
        train_set.len(),
        dev.len()
    );
    let mut log_error = None;
    let outcome = train_with(&config, &train_set, &dev, |epoch| {
        let line = epoch.line();
        eprintln!("{}", line);
        if let Some(f) = log_file.as_mut() {
            if let Err(e) = writeln!(f, "{}", line) {
                log_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = log_error {
        return Err(Error::io(args.log.clone().unwrap_or_default(), e));
    }
    if let Some(mut f) = log_file {
        f.flush()
            .map_err(|e| Error::io(args.log.clone().unwrap_or_default(), e))?;
    }
    outcome.model.save(&args.model)?;
    let best = &outcome.log[outcome.best_epoch - 1];
    Ok(format!(
        "best epoch {}: dev UAS {:.2} LAS {:.2} Order Acc {:.2}\nmodel written to {}\n",
        outcome.best_epoch,
        100.0 * best.dev_uas,
        100.0 * best.dev_las,
        100.0 * best.dev_order_acc,
        args.model.display()
    ))
}

fn cmd_parse(settings: &Settings<'_>, args: &ParseArgs) -> Result<String> {
    let input_format = Format::from_path(&args.test);
    let (config, sentences, scores, label_names) = match (&args.model, &args.scores_in) {
        (Some(model_path), _) => {
            let model = load_model(model_path)?;
            let config = settings.config(Some(&model.config))?;
            let sentences = read_conll(&args.test, input_format)?;
            let scores = score_corpus(&model, &sentences)?;
            (
                config,
                sentences,
                scores,
                model.vocab.labels.names().to_vec(),
            )
        }
        (None, Some(scores_path)) => {
            let config = settings.config(None)?;
            let sentences = read_conll(&args.test, input_format)?;
            let scores = aligned_scores(read_scores(scores_path)?, &sentences)?;
            (config, sentences, scores, Vec::new())
        }
        (None, None) => return Err(Error::Config("parse needs --model or --scores-in".into())),
    };
    let predictions = decode_corpus(
        &scores,
        config.decoder,
        &config.decode_options(),
        &label_names,
    )?;
    let trees: Vec<DepTree> = predictions.into_iter().map(|p| p.tree).collect();
    let multi_root = trees
        .iter()
        .filter(|t| t.heads.iter().filter(|&&h| h == 0).count() > 1)
        .count();
    if multi_root > 0 {
        info!(
            "{} of {} trees have more than one root child",
            multi_root,
            trees.len()
        );
    }
    let output_format = match args.output.extension().and_then(|e| e.to_str()) {
        Some("conllu" | "conll" | "conllx") => Format::from_path(&args.output),
        _ => input_format,
    };
    write_conll(&sentences, &trees, &args.output, output_format)?;
    if let Some(path) = &args.scores_out {
        let named: Vec<(String, ScoreSet)> = sentences
            .iter()
            .map(|s| s.source_id.clone())
            .zip(scores)
            .collect();
        write_scores(path, &named)?;
    }
    Ok(format!(
        "parsed {} sentences with {} into {}\n",
        sentences.len(),
        config.decoder,
        args.output.display()
    ))
}

fn cmd_evaluate(
    settings: &Settings<'_>,
    args: &EvaluateArgs,
    format: ReportFormat,
) -> Result<String> {
    let gold = read_treebank(&args.gold)?;
    let mut report = match (&args.pred, &args.model) {
        (Some(pred_path), _) => {
            let config = settings.config(None)?;
            let pred = read_treebank(pred_path)?;
            if pred.len() != gold.len() {
                return Err(Error::Argument(format!(
                    "{} gold sentences but {} predicted",
                    gold.len(),
                    pred.len()
                )));
            }
            let trees: Vec<DepTree> = pred
                .iter()
                .map(|s| DepTree {
                    heads: s.tokens.iter().map(|t| t.gold_head).collect(),
                    labels: Some(s.tokens.iter().map(|t| t.gold_label.clone()).collect()),
                })
                .collect();
            attachment_scores(&gold, &trees, config.convention)?
        }
        (None, Some(model_path)) => {
            let model = load_model(model_path)?;
            let config = settings.config(Some(&model.config))?;
            evaluate_model(
                &model,
                &gold,
                config.decoder,
                &config.decode_options(),
                config.convention,
            )?
        }
        (None, None) => {
            return Err(Error::Config("evaluate needs --pred or --model".into()));
        }
    };
    if args.single_root {
        report.strict_single_root = true;
        if !report.multi_root.is_empty() {
            warn!(
                "trees with several root children: {}",
                report.multi_root.join(" ")
            );
        }
    }
    Ok(report.render(format))
}

/// Score sets of an interchange file, checked against the sentences they
/// are meant to parse.
fn aligned_scores(named: Vec<(String, ScoreSet)>, sentences: &[Sentence]) -> Result<Vec<ScoreSet>> {
    if named.len() != sentences.len() {
        return Err(Error::Argument(format!(
            "{} score sets for {} sentences",
            named.len(),
            sentences.len()
        )));
    }
    named
        .into_iter()
        .zip(sentences)
        .map(|((id, s), sentence)| {
            if s.n() == sentence.len() {
                Ok(s)
            } else {
                Err(Error::Argument(format!(
                    "score set {} has {} words but sentence {} has {}",
                    id,
                    s.n(),
                    sentence.source_id,
                    sentence.len()
                )))
            }
        })
        .collect()
}

/// Reconstruction counts for one decoder setting.
#[derive(Debug, Default)]
struct Reconstruction {
    attempted: usize,
    rebuilt: usize,
    failures: Vec<String>,
}

impl Reconstruction {
    fn rate(&self) -> f64 {
        if self.attempted == 0 {
            1.0
        } else {
            self.rebuilt as f64 / self.attempted as f64
        }
    }
}

fn cmd_oracle_check(settings: &Settings<'_>, args: &OracleArgs) -> Result<String> {
    let config = settings.config(None)?;
    let kind = config.decoder;
    let sentences = read_treebank(&args.test)?;
    let with_order = config.decode_options();
    let arc_only = DecodeOptions {
        use_order: false,
        ..with_order
    };

    let mut full = Reconstruction::default();
    let mut ablated = Reconstruction::default();
    let mut unreachable = Vec::new();
    let mut invalid = Vec::new();
    for s in &sentences {
        let gold = s.gold_tree();
        if s.is_empty() || validate_tree(&gold.heads).is_err() {
            invalid.push(s.source_id.clone());
            continue;
        }
        if kind == DecoderKind::GreedyProjective && !is_projective(&gold) {
            unreachable.push(s.source_id.clone());
            continue;
        }
        let scores = oracle_scores(&gold)?;
        for (opts, tally) in [(&with_order, &mut full), (&arc_only, &mut ablated)] {
            tally.attempted += 1;
            if decode(&scores, kind, opts).tree.heads == gold.heads {
                tally.rebuilt += 1;
            } else {
                tally.failures.push(s.source_id.clone());
            }
        }
    }

    let mut text = String::new();
    let line = |text: &mut String, s: String| {
        text.push_str(&s);
        text.push('\n');
    };
    line(&mut text, format!("decoder: {}", kind));
    line(&mut text, format!("sentences: {}", sentences.len()));
    line(
        &mut text,
        format!(
            "reconstructed: {}/{} ({:.2}%)",
            full.rebuilt,
            full.attempted,
            100.0 * full.rate()
        ),
    );
    if !full.failures.is_empty() {
        line(&mut text, format!("failures: {}", full.failures.join(" ")));
    }
    line(
        &mut text,
        format!("unreachable (non-projective): {}", unreachable.len()),
    );
    if !unreachable.is_empty() {
        line(
            &mut text,
            format!("unreachable ids: {}", unreachable.join(" ")),
        );
    }
    if !invalid.is_empty() {
        line(
            &mut text,
            format!("invalid gold trees skipped: {}", invalid.join(" ")),
        );
    }
    line(
        &mut text,
        format!(
            "arc-only reconstructed: {}/{} ({:.2}%)",
            ablated.rebuilt,
            ablated.attempted,
            100.0 * ablated.rate()
        ),
    );
    if !ablated.failures.is_empty() {
        line(
            &mut text,
            format!("arc-only failures: {}", ablated.failures.join(" ")),
        );
    }
    line(
        &mut text,
        format!(
            "result: {}",
            if full.failures.is_empty() {
                "pass"
            } else {
                "fail"
            }
        ),
    );
    Ok(text)
}

fn cmd_bench(settings: &Settings<'_>, args: &BenchArgs, format: ReportFormat) -> Result<String> {
    if args.repetitions < 3 {
        return Err(Error::Config(format!(
            "--repetitions must be at least 3, got {}",
            args.repetitions
        )));
    }
    let kinds: Vec<DecoderKind> = match settings.cli.decoder {
        Some(k) => vec![k],
        None => DecoderKind::ALL.to_vec(),
    };
    let mut reports: Vec<BenchReport> = Vec::new();
    match &args.model {
        Some(model_path) => {
            let model = load_model(model_path)?;
            let test = args
                .test
                .as_ref()
                .ok_or_else(|| Error::Config("bench with --model needs --test".into()))?;
            let sentences = read_treebank(test)?;
            for kind in kinds {
                reports.push(benchmark_decode(
                    &model,
                    &sentences,
                    kind,
                    args.repetitions,
                )?);
            }
        }
        None => {
            let config = settings.config(None)?;
            if args.lengths.contains(&0) || args.count == 0 {
                return Err(Error::Config("lengths and count must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut scores = Vec::new();
            for &n in &args.lengths {
                for i in 0..args.count {
                    scores.push((format!("n{}-{}", n, i + 1), random_scores(n, 0, &mut rng)));
                }
            }
            for kind in kinds {
                reports.push(benchmark_scores(
                    &scores,
                    kind,
                    &config.decode_options(),
                    args.repetitions,
                )?);
            }
        }
    }
    if reports.iter().any(|r| r.tokens == 0) {
        warn!("no tokens to benchmark");
    }
    let mut text = String::new();
    for r in &reports {
        text.push_str(&r.render(format));
        if args.per_sentence {
            text.push_str(&r.per_sentence_lines());
        }
        if format == ReportFormat::Table {
            text.push('\n');
        }
    }
    Ok(text)
}
