//! Per-sentence score container shared by the scorer and the decoders.

use ndarray::{Array2, Array3, ArrayView1};

use crate::error::{Error, Result};

/// Number of parsing-order classes (layers 0..=32).
pub const ORDER_CLASSES: usize = 33;

/// All scores for one sentence of `n` words.
///
/// Row and column 0 of the arc matrices stand for the artificial root.
/// `arc[[h, d]]` scores `h` as the head of `d`; the diagonal is masked to
/// negative infinity. Order logits are stored per word, row `d - 1` for word
/// `d`. Label scores are indexed `[[h, d - 1, label]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSet {
    pub arc: Array2<f64>,
    pub arc_prob: Array2<f64>,
    pub order_logits: Array2<f64>,
    pub label: Option<Array3<f64>>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Index of the largest value, the first one on ties.
pub(crate) fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl ScoreSet {
    /// Build a score set from raw scores; arc probabilities are the logistic
    /// squash of the raw arc scores.
    pub fn from_raw(
        mut arc: Array2<f64>,
        order_logits: Array2<f64>,
        label: Option<Array3<f64>>,
    ) -> Result<Self> {
        let n = order_logits.nrows();
        if arc.dim() != (n + 1, n + 1) {
            return Err(Error::Argument(format!(
                "arc matrix is {:?}, expected ({}, {})",
                arc.dim(),
                n + 1,
                n + 1
            )));
        }
        if order_logits.ncols() != ORDER_CLASSES {
            return Err(Error::Argument(format!(
                "order logits have {} classes, expected {}",
                order_logits.ncols(),
                ORDER_CLASSES
            )));
        }
        if let Some(label) = &label {
            let (h, d, _) = label.dim();
            if h != n + 1 || d != n {
                return Err(Error::Argument(format!(
                    "label tensor is {:?}, expected ({}, {}, _)",
                    label.dim(),
                    n + 1,
                    n
                )));
            }
        }
        for i in 0..=n {
            arc[[i, i]] = f64::NEG_INFINITY;
        }
        let arc_prob = arc.mapv(sigmoid);
        Ok(ScoreSet {
            arc,
            arc_prob,
            order_logits,
            label,
        })
    }

    /// Number of words.
    pub fn n(&self) -> usize {
        self.order_logits.nrows()
    }

    pub fn num_labels(&self) -> usize {
        self.label.as_ref().map_or(0, |l| l.dim().2)
    }

    /// Predicted layer of word `dep` (1-based): argmax of its order logits,
    /// lowest layer on ties.
    pub fn order_priority(&self, dep: usize) -> usize {
        assert!(
            dep >= 1 && dep <= self.n(),
            "dependent {} outside 1..={}",
            dep,
            self.n()
        );
        argmax(self.order_logits.row(dep - 1))
    }

    /// Predicted layers for all words.
    pub fn order_priorities(&self) -> Vec<usize> {
        (1..=self.n()).map(|d| self.order_priority(d)).collect()
    }

    /// Softmax-free confidence of the predicted layer (its logit).
    pub(crate) fn order_confidence(&self, dep: usize) -> f64 {
        let row = self.order_logits.row(dep - 1);
        row[argmax(row)]
    }

    /// Copy of this score set with the order logits made uniform, so every
    /// word has priority 0. Used for the arc-only ablation.
    pub fn without_order(&self) -> ScoreSet {
        ScoreSet {
            order_logits: Array2::zeros(self.order_logits.dim()),
            ..self.clone()
        }
    }
}
