//! Attachment scores, order accuracy and decoder benchmarks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;

use crate::decoder::{assign_labels, decode, DecodeOptions, DecodeStats, DecoderKind};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scorer::{score_sentence, Mode};
use crate::scores::ScoreSet;
use crate::tree::{compute_layers, DepTree, LayerAssignment, LAYER_CAP};
use crate::treebank::{is_punctuation, Convention, Sentence};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Kv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "kv" => Ok(ReportFormat::Kv),
            other => Err(Error::Config(format!(
                "unknown report format `{}` (expected table or kv)",
                other
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceEval {
    pub id: String,
    pub tokens: usize,
    pub scored: usize,
    pub correct_heads: usize,
    pub correct_labels: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub uas: f64,
    pub las: f64,
    pub order_acc: f64,
    pub total_tokens: usize,
    pub scored_tokens: usize,
    pub excluded_punct: usize,
    pub sentences: Vec<SentenceEval>,
    pub decode_seconds: f64,
    pub tokens_per_sec: f64,
    pub convention: Convention,
    /// Ids of predicted trees with more than one word attached to the root.
    pub multi_root: Vec<String>,
    /// Report `multi_root` alongside the scores.
    pub strict_single_root: bool,
}

fn ratio(num: usize, den: usize, what: &str) -> f64 {
    if den == 0 {
        warn!("{}: no tokens to score, reporting 1.0", what);
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// UAS and LAS over non-punctuation tokens. Order accuracy is filled in from
/// the layers of the predicted trees.
pub fn attachment_scores(
    gold: &[Sentence],
    pred: &[DepTree],
    convention: Convention,
) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::Argument(format!(
            "{} gold sentences but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut sentences = Vec::with_capacity(gold.len());
    let (mut total, mut scored, mut heads, mut labels) = (0, 0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(Error::Argument(format!(
                "sentence {}: {} gold tokens but {} predicted",
                g.source_id,
                g.len(),
                p.len()
            )));
        }
        let mut eval = SentenceEval {
            id: g.source_id.clone(),
            tokens: g.len(),
            scored: 0,
            correct_heads: 0,
            correct_labels: 0,
        };
        for (i, token) in g.tokens.iter().enumerate() {
            if is_punctuation(token, convention) {
                continue;
            }
            eval.scored += 1;
            if p.heads[i] == token.gold_head {
                eval.correct_heads += 1;
                if p.labels.as_ref().is_some_and(|l| l[i] == token.gold_label) {
                    eval.correct_labels += 1;
                }
            }
        }
        total += eval.tokens;
        scored += eval.scored;
        heads += eval.correct_heads;
        labels += eval.correct_labels;
        sentences.push(eval);
    }

    let (gold_layers, pred_layers): (Vec<_>, Vec<_>) = gold
        .iter()
        .zip(pred)
        .filter_map(|(g, p)| match compute_layers(&g.gold_tree()) {
            Ok(gl) => {
                let pl = compute_layers(p).unwrap_or_else(|_| LayerAssignment {
                    layers: vec![usize::MAX; p.len()],
                });
                Some((gl, pl))
            }
            Err(_) => {
                warn!(
                    "sentence {}: gold annotation is not a tree, skipped for order accuracy",
                    g.source_id
                );
                None
            }
        })
        .unzip();

    Ok(EvalReport {
        uas: ratio(heads, scored, "UAS"),
        las: ratio(labels, scored, "LAS"),
        order_acc: order_accuracy(&gold_layers, &pred_layers),
        total_tokens: total,
        scored_tokens: scored,
        excluded_punct: total - scored,
        sentences,
        decode_seconds: 0.0,
        tokens_per_sec: 0.0,
        convention,
        multi_root: gold
            .iter()
            .zip(pred)
            .filter(|(_, p)| p.heads.iter().filter(|&&h| h == 0).count() > 1)
            .map(|(g, _)| g.source_id.clone())
            .collect(),
        strict_single_root: false,
    })
}

/// Fraction of words whose capped predicted layer equals the capped gold
/// layer. Punctuation is included.
///
/// # Panics
///
/// If the two lists are not aligned sentence by sentence.
pub fn order_accuracy(gold: &[LayerAssignment], pred: &[LayerAssignment]) -> f64 {
    assert_eq!(gold.len(), pred.len(), "layer lists are not aligned");
    let mut total = 0;
    let mut correct = 0;
    for (g, p) in gold.iter().zip(pred) {
        assert_eq!(g.layers.len(), p.layers.len(), "sentence lengths differ");
        total += g.layers.len();
        correct += g
            .layers
            .iter()
            .zip(&p.layers)
            .filter(|(a, b)| (**a).min(LAYER_CAP) == (**b).min(LAYER_CAP))
            .count();
    }
    ratio(correct, total, "order accuracy")
}

/// A parsed sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub tree: DepTree,
    /// Layer predicted by the order head for every word.
    pub order_layers: Vec<usize>,
    pub stats: DecodeStats,
}

/// Score every sentence with the model in evaluation mode.
pub fn score_corpus(model: &Model, sentences: &[Sentence]) -> Result<Vec<ScoreSet>> {
    sentences
        .par_iter()
        .map(|s| score_sentence(s, model, Mode::Eval))
        .collect()
}

/// Decode score sets and attach label names.
pub fn decode_corpus(
    scores: &[ScoreSet],
    kind: DecoderKind,
    opts: &DecodeOptions,
    label_names: &[String],
) -> Result<Vec<Prediction>> {
    scores
        .par_iter()
        .map(|s| {
            let decoding = decode(s, kind, opts);
            let tree = if s.label.is_some() && !label_names.is_empty() {
                assign_labels(s, &decoding.tree, label_names)?
            } else {
                decoding.tree
            };
            Ok(Prediction {
                tree,
                order_layers: s.order_priorities(),
                stats: decoding.stats,
            })
        })
        .collect()
}

pub fn predict(
    model: &Model,
    sentences: &[Sentence],
    kind: DecoderKind,
    opts: &DecodeOptions,
) -> Result<Vec<Prediction>> {
    let scores = score_corpus(model, sentences)?;
    decode_corpus(&scores, kind, opts, model.vocab.labels.names())
}

/// Parse `sentences` and score the result. Order accuracy comes from the
/// model's order head.
pub fn evaluate_model(
    model: &Model,
    sentences: &[Sentence],
    kind: DecoderKind,
    opts: &DecodeOptions,
    convention: Convention,
) -> Result<EvalReport> {
    let scores = score_corpus(model, sentences)?;
    let start = Instant::now();
    let predictions = decode_corpus(&scores, kind, opts, model.vocab.labels.names())?;
    let seconds = start.elapsed().as_secs_f64();

    let trees: Vec<DepTree> = predictions.iter().map(|p| p.tree.clone()).collect();
    let mut report = attachment_scores(sentences, &trees, convention)?;
    let (gold, pred): (Vec<_>, Vec<_>) = sentences
        .iter()
        .zip(&predictions)
        .filter_map(|(s, p)| {
            compute_layers(&s.gold_tree()).ok().map(|g| {
                (
                    g,
                    LayerAssignment {
                        layers: p.order_layers.clone(),
                    },
                )
            })
        })
        .unzip();
    report.order_acc = order_accuracy(&gold, &pred);
    report.decode_seconds = seconds;
    report.tokens_per_sec = if seconds > 0.0 {
        report.total_tokens as f64 / seconds
    } else {
        0.0
    };
    Ok(report)
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let conv = match self.convention {
            Convention::Ud => "ud",
            Convention::Ptb => "ptb",
        };
        let _ = writeln!(out, "{:<18}{:>10}", "metric", "value");
        let _ = writeln!(out, "{:<18}{:>10.2}", "UAS", 100.0 * self.uas);
        let _ = writeln!(out, "{:<18}{:>10.2}", "LAS", 100.0 * self.las);
        let _ = writeln!(out, "{:<18}{:>10.2}", "Order Acc", 100.0 * self.order_acc);
        let _ = writeln!(out, "{:<18}{:>10}", "sentences", self.sentences.len());
        let _ = writeln!(out, "{:<18}{:>10}", "tokens", self.total_tokens);
        let _ = writeln!(out, "{:<18}{:>10}", "scored", self.scored_tokens);
        let _ = writeln!(out, "{:<18}{:>10}", "excluded punct", self.excluded_punct);
        let _ = writeln!(out, "{:<18}{:>10}", "convention", conv);
        if self.strict_single_root {
            let _ = writeln!(
                out,
                "{:<18}{:>10}",
                "multi-root trees",
                self.multi_root.len()
            );
        }
        if self.decode_seconds > 0.0 {
            let _ = writeln!(out, "{:<18}{:>10.4}", "decode seconds", self.decode_seconds);
            let _ = writeln!(out, "{:<18}{:>10.0}", "tokens/sec", self.tokens_per_sec);
        }
        out
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let conv = match self.convention {
            Convention::Ud => "ud",
            Convention::Ptb => "ptb",
        };
        let _ = writeln!(out, "uas={:.4}", 100.0 * self.uas);
        let _ = writeln!(out, "las={:.4}", 100.0 * self.las);
        let _ = writeln!(out, "order_acc={:.4}", 100.0 * self.order_acc);
        let _ = writeln!(out, "sentences={}", self.sentences.len());
        let _ = writeln!(out, "tokens={}", self.total_tokens);
        let _ = writeln!(out, "scored_tokens={}", self.scored_tokens);
        let _ = writeln!(out, "excluded_punct={}", self.excluded_punct);
        let _ = writeln!(out, "convention={}", conv);
        if self.strict_single_root {
            let _ = writeln!(out, "multi_root_trees={}", self.multi_root.len());
        }
        let _ = writeln!(out, "decode_seconds={:.6}", self.decode_seconds);
        let _ = writeln!(out, "tokens_per_sec={:.1}", self.tokens_per_sec);
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Table => self.to_table(),
            ReportFormat::Kv => self.to_kv(),
        }
    }
}

/// Summed operation counts of all sentences of one length.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub length: usize,
    pub sentences: usize,
    pub stats: DecodeStats,
}

impl BenchRow {
    /// Candidate evaluations per sentence.
    pub fn mean_candidates(&self) -> f64 {
        self.stats.candidate_evaluations as f64 / self.sentences as f64
    }

    pub fn mean_comparisons(&self) -> f64 {
        self.stats.sort_comparisons as f64 / self.sentences as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub decoder: DecoderKind,
    pub repetitions: usize,
    pub tokens: usize,
    pub median_tokens_per_sec: f64,
    pub rows: Vec<BenchRow>,
    /// Sentence id and operation counts of every sentence.
    pub per_sentence: Vec<(String, DecodeStats)>,
}

fn add_stats(total: &mut DecodeStats, s: &DecodeStats) {
    total.attachments += s.attachments;
    total.candidate_evaluations += s.candidate_evaluations;
    total.sort_comparisons += s.sort_comparisons;
    total.contractions += s.contractions;
}

/// Decode every score set `repetitions` times and report the median
/// throughput together with operation counts grouped by sentence length.
pub fn benchmark_scores(
    scores: &[(String, ScoreSet)],
    kind: DecoderKind,
    opts: &DecodeOptions,
    repetitions: usize,
) -> Result<BenchReport> {
    if repetitions < 3 {
        return Err(Error::Argument(format!(
            "repetitions must be at least 3, got {}",
            repetitions
        )));
    }
    let tokens: usize = scores.iter().map(|(_, s)| s.n()).sum();
    let mut rates = Vec::with_capacity(repetitions);
    let mut first: Option<Vec<DecodeStats>> = None;
    for _ in 0..repetitions {
        let start = Instant::now();
        let stats: Vec<DecodeStats> = scores
            .iter()
            .map(|(_, s)| decode(s, kind, opts).stats)
            .collect();
        let seconds = start.elapsed().as_secs_f64();
        rates.push(if seconds > 0.0 {
            tokens as f64 / seconds
        } else {
            f64::INFINITY
        });
        match &first {
            None => first = Some(stats),
            Some(f) if *f != stats => {
                return Err(Error::Argument(
                    "operation counts differ between repetitions".into(),
                ))
            }
            Some(_) => {}
        }
    }
    rates.sort_by(|a, b| a.total_cmp(b));
    let stats = first.unwrap_or_default();

    let mut by_len: BTreeMap<usize, BenchRow> = BTreeMap::new();
    for ((_, s), st) in scores.iter().zip(&stats) {
        let row = by_len.entry(s.n()).or_insert_with(|| BenchRow {
            length: s.n(),
            sentences: 0,
            stats: DecodeStats::default(),
        });
        row.sentences += 1;
        add_stats(&mut row.stats, st);
    }
    Ok(BenchReport {
        decoder: kind,
        repetitions,
        tokens,
        median_tokens_per_sec: rates[rates.len() / 2],
        rows: by_len.into_values().collect(),
        per_sentence: scores.iter().map(|(id, _)| id.clone()).zip(stats).collect(),
    })
}

/// Score `sentences` once with the model, then benchmark decoding.
pub fn benchmark_decode(
    model: &Model,
    sentences: &[Sentence],
    kind: DecoderKind,
    repetitions: usize,
) -> Result<BenchReport> {
    let scores = score_corpus(model, sentences)?;
    let named: Vec<(String, ScoreSet)> = sentences
        .iter()
        .map(|s| s.source_id.clone())
        .zip(scores)
        .collect();
    benchmark_scores(&named, kind, &model.config.decode_options(), repetitions)
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "decoder {}  repetitions {}  tokens {}  median tokens/sec {:.0}",
            self.decoder, self.repetitions, self.tokens, self.median_tokens_per_sec
        );
        let _ = writeln!(
            out,
            "{:>6} {:>9} {:>14} {:>14} {:>12} {:>12}",
            "length", "sentences", "candidates", "comparisons", "contractions", "attachments"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6} {:>9} {:>14.1} {:>14.1} {:>12.1} {:>12.1}",
                r.length,
                r.sentences,
                r.mean_candidates(),
                r.mean_comparisons(),
                r.stats.contractions as f64 / r.sentences as f64,
                r.stats.attachments as f64 / r.sentences as f64,
            );
        }
        out
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "decoder={}", self.decoder);
        let _ = writeln!(out, "repetitions={}", self.repetitions);
        let _ = writeln!(out, "tokens={}", self.tokens);
        let _ = writeln!(
            out,
            "median_tokens_per_sec={:.1}",
            self.median_tokens_per_sec
        );
        for r in &self.rows {
            let p = format!("length.{}", r.length);
            let _ = writeln!(out, "{}.sentences={}", p, r.sentences);
            let _ = writeln!(
                out,
                "{}.candidate_evaluations={}",
                p, r.stats.candidate_evaluations
            );
            let _ = writeln!(out, "{}.sort_comparisons={}", p, r.stats.sort_comparisons);
            let _ = writeln!(out, "{}.contractions={}", p, r.stats.contractions);
            let _ = writeln!(out, "{}.attachments={}", p, r.stats.attachments);
        }
        out
    }

    /// Operation counts of every sentence, one line each.
    pub fn per_sentence_lines(&self) -> String {
        let mut out = String::new();
        for (id, s) in &self.per_sentence {
            let _ = writeln!(
                out,
                "{} {} candidates={} comparisons={} contractions={} attachments={}",
                self.decoder,
                id,
                s.candidate_evaluations,
                s.sort_comparisons,
                s.contractions,
                s.attachments
            );
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Table => self.to_table(),
            ReportFormat::Kv => self.to_kv(),
        }
    }
}
