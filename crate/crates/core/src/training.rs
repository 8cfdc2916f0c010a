//! Losses, gradients, the optimizer and the training loop.

use std::time::Instant;

use log::{info, warn};
use ndarray::{s, Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Config;
use crate::embeddings::{read_embeddings, ExternalEmbeddings};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_model, EvalReport};
use crate::model::{Model, Params};
use crate::nn::log_softmax;
use crate::scorer::{backward, forward, label_scores_at, ScoreGrads, SentenceInput};
use crate::scores::ScoreSet;
use crate::tree::{compute_layers, DepTree};
use crate::treebank::{build_vocab, Sentence};

/// Sentences per gradient chunk. Chunks are summed in a fixed order so the
/// result does not depend on the number of threads.
const CHUNK: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_arc: f64,
    pub l_rel: f64,
    pub l_order: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.l_arc + self.l_rel + self.l_order
    }

    fn add(&mut self, other: &LossBreakdown) {
        self.l_arc += other.l_arc;
        self.l_rel += other.l_rel;
        self.l_order += other.l_order;
    }

    fn scaled(&self, alpha: f64) -> LossBreakdown {
        LossBreakdown {
            l_arc: self.l_arc * alpha,
            l_rel: self.l_rel * alpha,
            l_order: self.l_order * alpha,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_arc.is_finite() && self.l_rel.is_finite() && self.l_order.is_finite()
    }
}

/// Negative log-likelihood of `targets` under row-wise softmax, and its
/// gradient with respect to the logits.
fn nll_rows(logits: &Array2<f64>, targets: &[usize]) -> (f64, Array2<f64>) {
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.dim());
    for (i, &t) in targets.iter().enumerate() {
        let ls = log_softmax(logits.row(i));
        loss -= ls[t];
        let mut g = grad.row_mut(i);
        g.assign(&ls.mapv(f64::exp));
        g[t] -= 1.0;
    }
    (loss, grad)
}

fn nll(logits: ArrayView1<f64>, target: usize) -> (f64, Array1<f64>) {
    let ls = log_softmax(logits);
    let mut g = ls.mapv(f64::exp);
    g[target] -= 1.0;
    (-ls[target], g)
}

/// Head-selection loss over the columns of `arc` (raw scores, `[head, dep]`).
/// The diagonal is masked.
fn arc_loss(arc: &Array2<f64>, heads: &[usize]) -> (f64, Array2<f64>) {
    let n = heads.len();
    let mut columns = Array2::zeros((n, n + 1));
    for d in 1..=n {
        let mut row = columns.row_mut(d - 1);
        row.assign(&arc.column(d));
        row[d] = f64::NEG_INFINITY;
    }
    let (loss, g) = nll_rows(&columns, heads);
    let mut grad = Array2::zeros(arc.dim());
    for d in 1..=n {
        grad.column_mut(d).assign(&g.row(d - 1));
        grad[[d, d]] = 0.0;
    }
    (loss, grad)
}

fn check_gold(gold: &DepTree, n: usize) -> Result<Vec<usize>> {
    if gold.len() != n {
        return Err(Error::Argument(format!(
            "gold tree has {} words, scores have {}",
            gold.len(),
            n
        )));
    }
    Ok(compute_layers(gold)?.targets())
}

/// Losses of the gold tree under a score set. `label_ids` holds the gold label
/// id of every word; without it, or without label scores, `l_rel` is 0.
pub fn loss(
    gold: &DepTree,
    label_ids: Option<&[usize]>,
    scores: &ScoreSet,
) -> Result<LossBreakdown> {
    let n = scores.n();
    let layers = check_gold(gold, n)?;
    let (l_arc, _) = arc_loss(&scores.arc, &gold.heads);
    let (l_order, _) = nll_rows(&scores.order_logits, &layers);
    let l_rel = match (label_ids, &scores.label) {
        (Some(ids), Some(label)) => {
            if ids.len() != n || ids.iter().any(|&r| r >= scores.num_labels()) {
                return Err(Error::Argument(
                    "gold label ids do not fit the label scores".into(),
                ));
            }
            (1..=n)
                .map(|d| nll(label.slice(s![gold.head(d), d - 1, ..]), ids[d - 1]).0)
                .sum()
        }
        _ => 0.0,
    };
    Ok(LossBreakdown {
        l_arc,
        l_rel,
        l_order,
    })
}

/// A training sentence with its precomputed targets.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    input: SentenceInput,
    heads: Vec<usize>,
    labels: Vec<usize>,
    layers: Vec<usize>,
}

impl Example {
    pub fn new(sentence: &Sentence, model: &Model) -> Result<Self> {
        let input = SentenceInput::new(sentence, model)?;
        let gold = sentence.gold_tree();
        let layers = compute_layers(&gold)
            .map_err(|e| Error::Argument(format!("sentence {}: {}", sentence.source_id, e)))?
            .targets();
        let labels = sentence
            .tokens
            .iter()
            .map(|t| {
                model.vocab.label_id(&t.gold_label).ok_or_else(|| {
                    Error::Argument(format!(
                        "sentence {}: label `{}` not in vocabulary",
                        sentence.source_id, t.gold_label
                    ))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Example {
            id: sentence.source_id.clone(),
            input,
            heads: gold.heads,
            labels,
            layers,
        })
    }
}

/// Loss and parameter gradient of one example. Dropout is active when `rng`
/// is given.
pub(crate) fn example_gradient(
    model: &Model,
    ex: &Example,
    rng: Option<&mut ChaCha8Rng>,
    grad: &mut Params,
) -> Result<LossBreakdown> {
    let trace = forward(model, ex.input.clone(), rng);
    let (l_arc, d_arc) = arc_loss(&trace.arc, &ex.heads);
    let (l_order, d_order) = nll_rows(&trace.order, &ex.layers);
    let mut l_rel = 0.0;
    let mut label = Vec::with_capacity(ex.heads.len());
    for (i, (&h, &r)) in ex.heads.iter().zip(&ex.labels).enumerate() {
        let d = i + 1;
        let scores = label_scores_at(
            &model.params,
            trace.label_head.row(h),
            trace.label_dep.row(d),
        );
        let (l, g) = nll(scores.view(), r);
        l_rel += l;
        label.push((h, d, g));
    }
    let losses = LossBreakdown {
        l_arc,
        l_rel,
        l_order,
    };
    if !losses.is_finite() {
        return Err(Error::Numeric {
            sentence: ex.id.clone(),
            message: format!("non-finite loss {:?}", losses),
        });
    }
    let grads = ScoreGrads {
        arc: d_arc,
        order: d_order,
        label,
    };
    backward(&model.params, &trace, &grads, grad);
    Ok(losses)
}

/// Mean loss and mean gradient over `batch`. With `seeds`, sentence `i` uses
/// dropout drawn from a generator seeded with `seeds[i]`.
pub fn batch_gradients(
    model: &Model,
    batch: &[&Example],
    seeds: Option<&[u64]>,
) -> Result<(LossBreakdown, Params)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    if let Some(seeds) = seeds {
        if seeds.len() != batch.len() {
            return Err(Error::Argument(
                "one dropout seed per sentence required".into(),
            ));
        }
    }
    let dims = model.dims();
    let chunks: Vec<Result<(LossBreakdown, Params)>> = batch
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut grad = Params::zeros(dims);
            let mut total = LossBreakdown::default();
            for (k, ex) in chunk.iter().enumerate() {
                let mut rng = seeds.map(|s| ChaCha8Rng::seed_from_u64(s[c * CHUNK + k]));
                total.add(&example_gradient(model, ex, rng.as_mut(), &mut grad)?);
            }
            Ok((total, grad))
        })
        .collect();

    let mut loss = LossBreakdown::default();
    let mut grad: Option<Params> = None;
    for chunk in chunks {
        let (l, g) = chunk?;
        loss.add(&l);
        match &mut grad {
            None => grad = Some(g),
            Some(acc) => acc.add_scaled(&g, 1.0),
        }
    }
    let mut grad = grad.expect("batch is non-empty");
    let scale = 1.0 / batch.len() as f64;
    grad.scale(scale);
    Ok((loss.scaled(scale), grad))
}

/// Mean loss and gradient over sentences with dropout disabled.
pub fn gradients(model: &Model, batch: &[Sentence]) -> Result<(LossBreakdown, Params)> {
    let examples = batch
        .iter()
        .map(|s| Example::new(s, model))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Example> = examples.iter().collect();
    batch_gradients(model, &refs, None)
}

/// Adam moments and schedule state.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Params,
    pub v: Params,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
}

impl OptimizerState {
    pub fn new(config: &Config, params: &Params) -> Self {
        OptimizerState {
            m: Params::zeros(params.dims),
            v: Params::zeros(params.dims),
            step: 0,
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            clip_norm: config.clip_norm,
        }
    }
}

/// Rescale `grads` so its global norm is at most `max_norm`. Returns the norm
/// before clipping.
pub fn clip_gradients(grads: &mut Params, max_norm: f64) -> f64 {
    let norm = grads.squared_norm().sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Clip, then apply one Adam update. Returns the gradient norm before clipping.
pub fn step(state: &mut OptimizerState, model: &mut Model, grads: &Params) -> Result<f64> {
    if grads.dims != model.params.dims || state.m.dims != model.params.dims {
        return Err(Error::Argument(
            "gradient shapes do not match the model".into(),
        ));
    }
    let mut g = grads.clone();
    let norm = clip_gradients(&mut g, state.clip_norm);
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let (lr, eps) = (state.lr, state.epsilon);

    let params = model.params.tensors_mut();
    let moments = state.m.tensors_mut().into_iter().zip(state.v.tensors_mut());
    for ((_, mut p), (((_, mut m), (_, mut v)), (_, g))) in
        params.into_iter().zip(moments.zip(g.tensors()))
    {
        ndarray::Zip::from(&mut p)
            .and(&mut m)
            .and(&mut v)
            .and(&g)
            .for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
    }
    Ok(norm)
}

/// What the schedule did after an epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleEvent {
    Improved,
    Stale,
    Decayed,
    Stop,
}

/// Learning-rate annealing on stalled dev UAS.
#[derive(Clone, Debug, PartialEq)]
pub struct LrSchedule {
    pub lr: f64,
    decay: f64,
    patience: usize,
    min_improvement: f64,
    max_decays: usize,
    best: Option<f64>,
    stale: usize,
    pub decays: usize,
}

impl LrSchedule {
    pub fn new(config: &Config) -> Self {
        LrSchedule {
            lr: config.learning_rate,
            decay: config.lr_decay,
            patience: config.patience,
            min_improvement: config.min_improvement,
            max_decays: config.max_decays,
            best: None,
            stale: 0,
            decays: 0,
        }
    }

    /// Record a dev UAS in percent.
    pub fn observe(&mut self, uas_percent: f64) -> ScheduleEvent {
        let improved = self
            .best
            .is_none_or(|b| uas_percent >= b + self.min_improvement);
        if improved {
            self.best = Some(uas_percent);
            self.stale = 0;
            return ScheduleEvent::Improved;
        }
        self.stale += 1;
        if self.stale < self.patience {
            return ScheduleEvent::Stale;
        }
        self.stale = 0;
        self.lr *= self.decay;
        self.decays += 1;
        if self.decays >= self.max_decays {
            ScheduleEvent::Stop
        } else {
            ScheduleEvent::Decayed
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-sentence training loss.
    pub loss: LossBreakdown,
    pub dev_uas: f64,
    pub dev_las: f64,
    pub dev_order_acc: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
    pub seconds: f64,
}

impl EpochLog {
    pub fn line(&self) -> String {
        format!(
            "epoch {}: loss {:.4}/{:.4}/{:.4}, dev {:.2}/{:.2}/{:.2}, lr {:.3e}",
            self.epoch,
            self.loss.l_arc,
            self.loss.l_rel,
            self.loss.l_order,
            100.0 * self.dev_uas,
            100.0 * self.dev_las,
            100.0 * self.dev_order_acc,
            self.lr
        )
    }
}

pub struct TrainOutcome {
    /// Parameters of the best dev epoch.
    pub model: Model,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Train from scratch. When `dev` is empty, the training set is used for
/// model selection.
pub fn train(config: &Config, train_set: &[Sentence], dev: &[Sentence]) -> Result<TrainOutcome> {
    train_with(config, train_set, dev, |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with(
    config: &Config,
    train_set: &[Sentence],
    dev: &[Sentence],
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    let external: Option<ExternalEmbeddings> = match &config.external_embeddings {
        Some(path) => Some(read_embeddings(path)?),
        None => None,
    };
    let vocab = build_vocab(train_set, config.min_word_freq)?;
    let mut model = Model::new(config, vocab, external)?;
    let examples = train_set
        .iter()
        .map(|s| Example::new(s, &model))
        .collect::<Result<Vec<_>>>()?;
    let dev = if dev.is_empty() {
        warn!("no dev set, selecting on the training set");
        train_set
    } else {
        dev
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));
    let mut opt = OptimizerState::new(config, &model.params);
    let mut schedule = LrSchedule::new(config);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut best: Option<(f64, usize, Params)> = None;
    let mut log = Vec::new();
    let decode_opts = config.decode_options();

    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_loss = LossBreakdown::default();
        let lr = opt.lr;
        for batch in order.chunks(config.batch_size) {
            let refs: Vec<&Example> = batch.iter().map(|&i| &examples[i]).collect();
            let seeds: Vec<u64> = (0..refs.len()).map(|_| rng.random()).collect();
            let (l, g) = batch_gradients(&model, &refs, Some(&seeds))?;
            epoch_loss.add(&l.scaled(refs.len() as f64));
            step(&mut opt, &mut model, &g)?;
            if !model.params.all_finite() {
                return Err(Error::Numeric {
                    sentence: refs[0].id.clone(),
                    message: format!("parameters diverged in epoch {}", epoch),
                });
            }
        }

        let report: EvalReport =
            evaluate_model(&model, dev, config.decoder, &decode_opts, config.convention)?;
        let entry = EpochLog {
            epoch,
            loss: epoch_loss.scaled(1.0 / examples.len() as f64),
            dev_uas: report.uas,
            dev_las: report.las,
            dev_order_acc: report.order_acc,
            lr,
            seconds: start.elapsed().as_secs_f64(),
        };
        info!("{}", entry.line());
        on_epoch(&entry);

        if best.as_ref().is_none_or(|(b, _, _)| report.uas > *b) {
            best = Some((report.uas, epoch, model.params.clone()));
        }
        let event = schedule.observe(100.0 * report.uas);
        log.push(entry);
        match event {
            ScheduleEvent::Decayed => {
                opt.lr = schedule.lr;
                info!("learning rate decayed to {:.3e}", opt.lr);
            }
            ScheduleEvent::Stop => {
                info!("stopping after {} learning-rate decays", schedule.decays);
                break;
            }
            _ => {}
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    model.params = params;
    Ok(TrainOutcome {
        model,
        best_epoch,
        log,
    })
}
