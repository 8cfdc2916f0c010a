//! Sentence encoder and the arc, order and label scorers.

use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView1, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Dims, Model, Params};
use crate::nn::{
    dropout_mask, lstm_backward, lstm_forward, relu, relu_backward, CharCnnCache, LstmCache,
};
use crate::scores::ScoreSet;
use crate::treebank::{Sentence, PAD};

/// Scoring mode. Training mode applies dropout drawn from the given stream.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Vocabulary ids and fixed vectors for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceInput {
    pub words: Vec<usize>,
    pub pos: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
    pub external: Option<Array2<f64>>,
}

impl SentenceInput {
    pub fn new(sentence: &Sentence, model: &Model) -> Result<Self> {
        if sentence.is_empty() {
            return Err(Error::Argument(format!(
                "sentence {} is empty",
                sentence.source_id
            )));
        }
        let vocab = &model.vocab;
        let tokens = &sentence.tokens;
        let external = model.external.as_ref().map(|ext| {
            let mut rows = Array2::zeros((tokens.len(), ext.dim()));
            for (i, t) in tokens.iter().enumerate() {
                if let Some(v) = ext.lookup(&t.form) {
                    rows.row_mut(i).assign(&v);
                }
            }
            rows
        });
        Ok(SentenceInput {
            words: tokens.iter().map(|t| vocab.word_id(&t.form)).collect(),
            pos: tokens.iter().map(|t| vocab.pos_id(&t.upos)).collect(),
            chars: tokens
                .iter()
                .map(|t| {
                    let ids = vocab.char_ids(&t.form);
                    if ids.is_empty() {
                        vec![PAD]
                    } else {
                        ids
                    }
                })
                .collect(),
            external,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Dropout masks for one forward pass.
struct Dropout {
    /// Word, POS and character scale per token.
    embedding: Vec<[f64; 3]>,
    /// Input mask of every stacked layer above the first.
    layer: Vec<Option<Array2<f64>>>,
    recurrent: Vec<[Option<Array1<f64>>; 2]>,
}

impl Dropout {
    fn none(dims: &Dims, n: usize) -> Self {
        Dropout {
            embedding: vec![[1.0; 3]; n],
            layer: vec![None; dims.rnn_layers],
            recurrent: vec![[None, None]; dims.rnn_layers],
        }
    }

    fn sample(model: &Model, n: usize, rng: &mut ChaCha8Rng) -> Self {
        let dims = model.dims();
        let config = &model.config;
        let p = config.embedding_dropout;
        let keep = 1.0 / (1.0 - p);
        let embedding = (0..n)
            .map(|_| {
                let mut scales = [keep; 3];
                for s in scales.iter_mut() {
                    if rng.random::<f64>() < p {
                        *s = 0.0;
                    }
                }
                scales
            })
            .collect();
        let mut layer = Vec::with_capacity(dims.rnn_layers);
        let mut recurrent = Vec::with_capacity(dims.rnn_layers);
        let h = dims.hidden_dim;
        for l in 0..dims.rnn_layers {
            layer.push((l > 0 && config.layer_dropout > 0.0).then(|| {
                let cols = 2 * h;
                let flat = dropout_mask(rng, (n + 1) * cols, config.layer_dropout);
                flat.into_shape_with_order((n + 1, cols)).unwrap()
            }));
            let mut cell_mask = || {
                (config.recurrent_dropout > 0.0)
                    .then(|| dropout_mask(rng, h, config.recurrent_dropout))
            };
            let fwd = cell_mask();
            let bwd = cell_mask();
            recurrent.push([fwd, bwd]);
        }
        Dropout {
            embedding,
            layer,
            recurrent,
        }
    }
}

struct LayerTrace {
    cells: [LstmCache; 2],
}

/// Everything the backward pass needs from a forward pass.
pub(crate) struct Trace {
    input: SentenceInput,
    dropout: Dropout,
    chars: CharCnnCache,
    layers: Vec<LayerTrace>,
    pub(crate) encoded: Array2<f64>,
    pub(crate) head: Array2<f64>,
    pub(crate) dep: Array2<f64>,
    pub(crate) order_hidden: Array2<f64>,
    pub(crate) label_head: Array2<f64>,
    pub(crate) label_dep: Array2<f64>,
    /// Unmasked biaffine arc scores.
    pub(crate) arc: Array2<f64>,
    pub(crate) order: Array2<f64>,
}

impl Trace {
    pub(crate) fn n(&self) -> usize {
        self.input.len()
    }
}

pub(crate) fn forward(model: &Model, input: SentenceInput, rng: Option<&mut ChaCha8Rng>) -> Trace {
    let p = &model.params;
    let dims = p.dims;
    let n = input.len();
    let dropout = match rng {
        Some(rng) => Dropout::sample(model, n, rng),
        None => Dropout::none(&dims, n),
    };

    let (char_out, chars) = p.chars.forward(&input.chars);
    let mut x = Array2::zeros((n + 1, dims.input_dim()));
    x.row_mut(0).assign(&p.root);
    let (wd, pd, cd) = (dims.word_dim, dims.pos_dim, dims.char_filters);
    for i in 0..n {
        let [mw, mp, mc] = dropout.embedding[i];
        let mut row = x.row_mut(i + 1);
        row.slice_mut(s![..wd])
            .assign(&(&p.word_emb.row(input.words[i]) * mw));
        row.slice_mut(s![wd..wd + pd])
            .assign(&(&p.pos_emb.row(input.pos[i]) * mp));
        row.slice_mut(s![wd + pd..wd + pd + cd])
            .assign(&(&char_out.row(i) * mc));
        if let Some(ext) = &input.external {
            row.slice_mut(s![wd + pd + cd..]).assign(&ext.row(i));
        }
    }

    let mut layers = Vec::with_capacity(dims.rnn_layers);
    for (l, cells) in p.lstm.iter().enumerate() {
        if let Some(mask) = &dropout.layer[l] {
            x *= mask;
        }
        let [mf, mb] = dropout.recurrent[l].clone();
        let (hf, cf) = lstm_forward(&cells[0], x.clone(), false, mf);
        let (hb, cb) = lstm_forward(&cells[1], x, true, mb);
        x = concatenate![Axis(1), hf, hb];
        layers.push(LayerTrace { cells: [cf, cb] });
    }
    let encoded = x;

    let head = relu(p.mlp_head.forward(encoded.view()));
    let dep = relu(p.mlp_dep.forward(encoded.view()));
    let order_hidden = relu(p.mlp_order.forward(encoded.slice(s![1.., ..])));
    let label_head = relu(p.mlp_label_head.forward(encoded.view()));
    let label_dep = relu(p.mlp_label_dep.forward(encoded.view()));

    let arc = p.arc.forward(head.view(), dep.view());
    let order = p.order.forward(order_hidden.view());

    Trace {
        input,
        dropout,
        chars,
        layers,
        encoded,
        head,
        dep,
        order_hidden,
        label_head,
        label_dep,
        arc,
        order,
    }
}

/// Label scores of head `h` over dependent `d` (row indices into the label
/// representations, 0 is the root).
pub(crate) fn label_scores_at(p: &Params, lh: ArrayView1<f64>, ld: ArrayView1<f64>) -> Array1<f64> {
    let lab = &p.label;
    let mut out = lab.u.dot(&lh) + lab.v.dot(&ld) + &lab.bias;
    for r in 0..out.len() {
        out[r] += lh.dot(&lab.w.index_axis(Axis(0), r).dot(&ld));
    }
    out
}

fn label_tensor(p: &Params, trace: &Trace) -> Array3<f64> {
    let n = trace.n();
    let lab = &p.label;
    let labels = lab.bias.len();
    let lh = &trace.label_head;
    let ld = trace.label_dep.slice(s![1.., ..]);
    let head_lin = lh.dot(&lab.u.t());
    let dep_lin = ld.dot(&lab.v.t());
    let mut out = Array3::zeros((n + 1, n, labels));
    for r in 0..labels {
        let bil = lh.dot(&lab.w.index_axis(Axis(0), r)).dot(&ld.t());
        for h in 0..=n {
            for d in 0..n {
                out[[h, d, r]] = bil[[h, d]] + head_lin[[h, r]] + dep_lin[[d, r]] + lab.bias[r];
            }
        }
    }
    out
}

/// Gradients of a scalar objective with respect to the scorer outputs.
pub(crate) struct ScoreGrads {
    pub arc: Array2<f64>,
    pub order: Array2<f64>,
    /// `(head, dependent, d_scores)` for each label-scored pair.
    pub label: Vec<(usize, usize, Array1<f64>)>,
}

pub(crate) fn backward(p: &Params, trace: &Trace, grads: &ScoreGrads, out: &mut Params) {
    let dims = p.dims;
    let n = trace.n();

    let mut d_arc = grads.arc.clone();
    d_arc.diag_mut().fill(0.0);
    let (d_head, d_dep) = p.arc.backward(
        trace.head.view(),
        trace.dep.view(),
        d_arc.view(),
        &mut out.arc,
    );

    let d_order_hidden = p.order.backward(
        trace.order_hidden.view(),
        grads.order.view(),
        &mut out.order,
    );

    let mut d_lh = Array2::<f64>::zeros(trace.label_head.dim());
    let mut d_ld = Array2::<f64>::zeros(trace.label_dep.dim());
    for (h, d, g) in &grads.label {
        let lh = trace.label_head.row(*h);
        let ld = trace.label_dep.row(*d);
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            let w = p.label.w.index_axis(Axis(0), r);
            let mut gw = out.label.w.index_axis_mut(Axis(0), r);
            for i in 0..lh.len() {
                if lh[i] != 0.0 {
                    gw.row_mut(i).scaled_add(gr * lh[i], &ld);
                }
            }
            out.label.u.row_mut(r).scaled_add(gr, &lh);
            out.label.v.row_mut(r).scaled_add(gr, &ld);
            out.label.bias[r] += gr;
            d_lh.row_mut(*h)
                .scaled_add(gr, &(&w.dot(&ld) + &p.label.u.row(r)));
            d_ld.row_mut(*d)
                .scaled_add(gr, &(&w.t().dot(&lh) + &p.label.v.row(r)));
        }
    }

    let enc = trace.encoded.view();
    let mut d_enc = Array2::<f64>::zeros(trace.encoded.dim());
    let mlp = |lin: &crate::nn::Linear,
               y: &Array2<f64>,
               dy: Array2<f64>,
               x,
               grad: &mut crate::nn::Linear| {
        lin.backward(x, relu_backward(y.view(), dy).view(), grad)
    };
    d_enc += &mlp(&p.mlp_head, &trace.head, d_head, enc, &mut out.mlp_head);
    d_enc += &mlp(&p.mlp_dep, &trace.dep, d_dep, enc, &mut out.mlp_dep);
    d_enc += &mlp(
        &p.mlp_label_head,
        &trace.label_head,
        d_lh,
        enc,
        &mut out.mlp_label_head,
    );
    d_enc += &mlp(
        &p.mlp_label_dep,
        &trace.label_dep,
        d_ld,
        enc,
        &mut out.mlp_label_dep,
    );
    let d_words = mlp(
        &p.mlp_order,
        &trace.order_hidden,
        d_order_hidden,
        enc.slice(s![1.., ..]),
        &mut out.mlp_order,
    );
    {
        let mut words = d_enc.slice_mut(s![1.., ..]);
        words += &d_words;
    }

    let h = dims.hidden_dim;
    let mut dx = d_enc;
    for l in (0..dims.rnn_layers).rev() {
        let cells = &p.lstm[l];
        let layer = &trace.layers[l];
        let (g_fwd, g_bwd) = out.lstm[l].split_at_mut(1);
        let mut d_in = lstm_backward(
            &cells[0],
            &layer.cells[0],
            dx.slice(s![.., ..h]),
            &mut g_fwd[0],
        );
        d_in += &lstm_backward(
            &cells[1],
            &layer.cells[1],
            dx.slice(s![.., h..]),
            &mut g_bwd[0],
        );
        if let Some(mask) = &trace.dropout.layer[l] {
            d_in *= mask;
        }
        dx = d_in;
    }

    out.root += &dx.row(0);
    let (wd, pd, cd) = (dims.word_dim, dims.pos_dim, dims.char_filters);
    let mut d_chars = Array2::zeros((n, cd));
    for i in 0..n {
        let [mw, mp, mc] = trace.dropout.embedding[i];
        let row = dx.row(i + 1);
        out.word_emb
            .row_mut(trace.input.words[i])
            .scaled_add(mw, &row.slice(s![..wd]));
        out.pos_emb
            .row_mut(trace.input.pos[i])
            .scaled_add(mp, &row.slice(s![wd..wd + pd]));
        d_chars
            .row_mut(i)
            .scaled_add(mc, &row.slice(s![wd + pd..wd + pd + cd]));
    }
    p.chars
        .backward(&trace.chars, d_chars.view(), &mut out.chars);
}

/// Contextual vectors, one row per position with the root at row 0.
pub fn encode(sentence: &Sentence, model: &Model) -> Result<Array2<f64>> {
    let input = SentenceInput::new(sentence, model)?;
    Ok(forward(model, input, None).encoded)
}

/// Score every head-dependent pair, every word's layer and every label.
pub fn score_sentence(sentence: &Sentence, model: &Model, mode: Mode<'_>) -> Result<ScoreSet> {
    let input = SentenceInput::new(sentence, model)?;
    let rng = match mode {
        Mode::Eval => None,
        Mode::Train(rng) => Some(rng),
    };
    let trace = forward(model, input, rng);
    let labels = label_tensor(&model.params, &trace);
    ScoreSet::from_raw(trace.arc, trace.order, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::scores::sigmoid;
    use crate::treebank::{build_vocab, Token};
    use rand::SeedableRng;

    fn corpus() -> Vec<Sentence> {
        let words = [
            ("A", "DET", 2, "det"),
            ("cat", "NOUN", 3, "nsubj"),
            ("sat", "VERB", 0, "root"),
            ("down", "ADV", 3, "advmod"),
            (".", "PUNCT", 3, "punct"),
        ];
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, (f, p, h, l))| Token::new(i + 1, f, p, *h, l))
            .collect();
        vec![Sentence::new("s1", tokens)]
    }

    fn model(config: Config) -> Model {
        let vocab = build_vocab(&corpus(), 1).unwrap();
        Model::new(&config, vocab, None).unwrap()
    }

    #[test]
    fn shapes() {
        let m = model(Config::tiny());
        let s = &corpus()[0];
        let h = encode(s, &m).unwrap();
        assert_eq!(h.dim(), (6, 2 * m.config.hidden_dim));
        let scores = score_sentence(s, &m, Mode::Eval).unwrap();
        assert_eq!(scores.arc.dim(), (6, 6));
        assert_eq!(scores.order_logits.dim(), (5, 33));
        assert_eq!(
            scores.label.as_ref().unwrap().dim(),
            (6, 5, m.vocab.labels.len())
        );
    }

    #[test]
    fn empty_sentence_is_argument_error() {
        let m = model(Config::tiny());
        let empty = Sentence::new("e", vec![]);
        assert!(matches!(encode(&empty, &m), Err(Error::Argument(_))));
    }

    #[test]
    fn arc_scores_match_double_loop() {
        let m = model(Config::tiny());
        let s = &corpus()[0];
        let trace = forward(&m, SentenceInput::new(s, &m).unwrap(), None);
        let bi = &m.params.arc;
        for h in 0..6 {
            for d in 0..6 {
                let mut expected = bi.bias[0];
                for i in 0..bi.w.nrows() {
                    expected += trace.head[[h, i]] * bi.u[i];
                    for j in 0..bi.w.ncols() {
                        expected += trace.head[[h, i]] * bi.w[[i, j]] * trace.dep[[d, j]];
                    }
                }
                for j in 0..bi.v.len() {
                    expected += bi.v[j] * trace.dep[[d, j]];
                }
                assert!((trace.arc[[h, d]] - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn label_tensor_matches_pointwise() {
        let mut m = model(Config::tiny());
        m.params.label.u.fill(0.3);
        m.params.label.bias[1] = -0.7;
        let s = &corpus()[0];
        let scores = score_sentence(s, &m, Mode::Eval).unwrap();
        let trace = forward(&m, SentenceInput::new(s, &m).unwrap(), None);
        let label = scores.label.unwrap();
        for h in 0..6 {
            for d in 1..6 {
                let point =
                    label_scores_at(&m.params, trace.label_head.row(h), trace.label_dep.row(d));
                for r in 0..point.len() {
                    assert!((label[[h, d - 1, r]] - point[r]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn constant_biaffine_gives_constant_scores() {
        let mut m = model(Config::tiny());
        m.params.arc.w.fill(0.0);
        m.params.arc.u.fill(0.0);
        m.params.arc.v.fill(0.0);
        m.params.arc.bias[0] = 0.8;
        let scores = score_sentence(&corpus()[0], &m, Mode::Eval).unwrap();
        for ((h, d), &v) in scores.arc.indexed_iter() {
            if h == d {
                assert_eq!(v, f64::NEG_INFINITY);
            } else {
                assert_eq!(v, 0.8);
                assert!((scores.arc_prob[[h, d]] - sigmoid(0.8)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_parameters_encode_to_zero() {
        let mut m = model(Config::tiny());
        m.params = Params::zeros(m.dims());
        let h = encode(&corpus()[0], &m).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_is_deterministic_and_train_mode_differs() {
        let m = model(Config::tiny());
        let s = &corpus()[0];
        let a = score_sentence(s, &m, Mode::Eval).unwrap();
        let b = score_sentence(s, &m, Mode::Eval).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = score_sentence(s, &m, Mode::Train(&mut rng)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn context_changes_encoding() {
        let m = model(Config::tiny());
        let s = &corpus()[0];
        let mut swapped = s.clone();
        swapped.tokens.swap(0, 3);
        let a = encode(s, &m).unwrap();
        let b = encode(&swapped, &m).unwrap();
        assert_eq!(a.row(0).len(), b.row(0).len());
        assert_ne!(a.row(2), b.row(2));
    }
}
