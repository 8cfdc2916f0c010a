//! Layers with hand-written backward passes.
//!
//! Every forward function returns whatever its backward counterpart needs;
//! backward functions accumulate parameter gradients into a structure of the
//! same shape and return the gradient with respect to the layer input.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::scores::sigmoid;

pub fn glorot(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    let limit = scale * (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).unwrap();
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

pub fn uniform_vec(rng: &mut impl Rng, len: usize, limit: f64) -> Array1<f64> {
    let dist = Uniform::new_inclusive(-limit, limit).unwrap();
    Array1::from_shape_simple_fn(len, || dist.sample(rng))
}

/// Inverted dropout mask: entries are 0 or `1 / (1 - p)`.
pub fn dropout_mask(rng: &mut impl Rng, len: usize, p: f64) -> Array1<f64> {
    let keep = 1.0 / (1.0 - p);
    Array1::from_shape_simple_fn(len, || if rng.random::<f64>() < p { 0.0 } else { keep })
}

/// Affine map `y = W x + b` applied to the rows of a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `out x in`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn new(rng: &mut impl Rng, out_dim: usize, in_dim: usize, scale: f64) -> Self {
        Linear {
            w: glorot(rng, out_dim, in_dim, scale),
            b: Array1::zeros(out_dim),
        }
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Linear {
            w: Array2::zeros((out_dim, in_dim)),
            b: Array1::zeros(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    pub fn backward(
        &self,
        x: ArrayView2<f64>,
        dy: ArrayView2<f64>,
        grad: &mut Linear,
    ) -> Array2<f64> {
        grad.w += &dy.t().dot(&x);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w)
    }
}

pub fn relu(x: Array2<f64>) -> Array2<f64> {
    x.mapv_into(|v| v.max(0.0))
}

/// Gradient through a ReLU given its output.
pub fn relu_backward(y: ArrayView2<f64>, mut dy: Array2<f64>) -> Array2<f64> {
    Zip::from(&mut dy).and(y).for_each(|d, &v| {
        if v <= 0.0 {
            *d = 0.0
        }
    });
    dy
}

/// One direction of an LSTM layer. Gates are stacked as input, forget,
/// cell candidate, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `4h x in`
    pub w_x: Array2<f64>,
    /// `4h x h`
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmParams {
    pub fn new(rng: &mut impl Rng, hidden: usize, input: usize, scale: f64) -> Self {
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        LstmParams {
            w_x: glorot(rng, 4 * hidden, input, scale),
            w_h: glorot(rng, 4 * hidden, hidden, scale),
            b,
        }
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            w_x: Array2::zeros((4 * hidden, input)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.ncols()
    }
}

pub struct LstmCache {
    x: Array2<f64>,
    reverse: bool,
    /// Activated gates per position.
    gates: Array2<f64>,
    tanh_c: Array2<f64>,
    c_prev: Array2<f64>,
    /// Recurrent input after dropout.
    h_prev: Array2<f64>,
    mask: Option<Array1<f64>>,
}

fn steps(len: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    }
}

/// Run one LSTM direction over the rows of `x`. Output rows are aligned with
/// input rows regardless of direction. `mask` is a recurrent dropout mask
/// applied to the previous hidden state.
pub fn lstm_forward(
    p: &LstmParams,
    x: Array2<f64>,
    reverse: bool,
    mask: Option<Array1<f64>>,
) -> (Array2<f64>, LstmCache) {
    let len = x.nrows();
    let h = p.hidden();
    let pre = x.dot(&p.w_x.t()) + &p.b;

    let mut out = Array2::zeros((len, h));
    let mut gates = Array2::zeros((len, 4 * h));
    let mut tanh_c = Array2::zeros((len, h));
    let mut c_prev_all = Array2::zeros((len, h));
    let mut h_prev_all = Array2::zeros((len, h));

    let mut h_prev = Array1::<f64>::zeros(h);
    let mut c_prev = Array1::<f64>::zeros(h);
    for t in steps(len, reverse) {
        let h_in = match &mask {
            Some(m) => &h_prev * m,
            None => h_prev.clone(),
        };
        let z = &pre.row(t) + &p.w_h.dot(&h_in);
        let mut g = gates.row_mut(t);
        for k in 0..h {
            g[k] = sigmoid(z[k]);
            g[h + k] = sigmoid(z[h + k]);
            g[2 * h + k] = z[2 * h + k].tanh();
            g[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        let mut c = Array1::zeros(h);
        for k in 0..h {
            c[k] = g[h + k] * c_prev[k] + g[k] * g[2 * h + k];
            let tc = c[k].tanh();
            tanh_c[[t, k]] = tc;
            out[[t, k]] = g[3 * h + k] * tc;
        }
        c_prev_all.row_mut(t).assign(&c_prev);
        h_prev_all.row_mut(t).assign(&h_in);
        c_prev = c;
        h_prev = out.row(t).to_owned();
    }

    let cache = LstmCache {
        x,
        reverse,
        gates,
        tanh_c,
        c_prev: c_prev_all,
        h_prev: h_prev_all,
        mask,
    };
    (out, cache)
}

pub fn lstm_backward(
    p: &LstmParams,
    cache: &LstmCache,
    d_out: ArrayView2<f64>,
    grad: &mut LstmParams,
) -> Array2<f64> {
    let len = cache.x.nrows();
    let h = p.hidden();
    let mut dz_all = Array2::<f64>::zeros((len, 4 * h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);

    for t in steps(len, !cache.reverse) {
        let g = cache.gates.row(t);
        let mut dz = dz_all.row_mut(t);
        for k in 0..h {
            let (i, f, cand, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let tc = cache.tanh_c[[t, k]];
            let dh = d_out[[t, k]] + dh_next[k];
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            dz[k] = dc * cand * i * (1.0 - i);
            dz[h + k] = dc * cache.c_prev[[t, k]] * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - cand * cand);
            dz[3 * h + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        let dh_in = p.w_h.t().dot(&dz);
        dh_next = match &cache.mask {
            Some(m) => dh_in * m,
            None => dh_in,
        };
    }

    grad.w_h += &dz_all.t().dot(&cache.h_prev);
    grad.w_x += &dz_all.t().dot(&cache.x);
    grad.b += &dz_all.sum_axis(Axis(0));
    dz_all.dot(&p.w_x)
}

/// Character convolution followed by max-pooling over positions and tanh.
#[derive(Clone, Debug, PartialEq)]
pub struct CharCnnParams {
    pub emb: Array2<f64>,
    /// `filters x (window * char_dim)`
    pub conv: Linear,
    pub window: usize,
}

pub struct CharCnnCache {
    char_ids: Vec<Vec<usize>>,
    windows: Vec<Array2<f64>>,
    /// Winning position per word and filter.
    argmax: Vec<Vec<usize>>,
    out: Array2<f64>,
}

impl CharCnnParams {
    fn char_dim(&self) -> usize {
        self.emb.ncols()
    }

    fn windows(&self, ids: &[usize]) -> Array2<f64> {
        let dim = self.char_dim();
        let half = self.window / 2;
        let mut windows = Array2::zeros((ids.len(), self.window * dim));
        for pos in 0..ids.len() {
            for k in 0..self.window {
                let src = pos + k;
                if src < half || src - half >= ids.len() {
                    continue;
                }
                windows
                    .slice_mut(s![pos, k * dim..(k + 1) * dim])
                    .assign(&self.emb.row(ids[src - half]));
            }
        }
        windows
    }

    pub fn forward(&self, words: &[Vec<usize>]) -> (Array2<f64>, CharCnnCache) {
        let filters = self.conv.out_dim();
        let mut out = Array2::zeros((words.len(), filters));
        let mut windows = Vec::with_capacity(words.len());
        let mut argmax = Vec::with_capacity(words.len());
        for (i, ids) in words.iter().enumerate() {
            let win = self.windows(ids);
            let conv = self.conv.forward(win.view());
            let mut best = vec![0; filters];
            for f in 0..filters {
                for pos in 1..conv.nrows() {
                    if conv[[pos, f]] > conv[[best[f], f]] {
                        best[f] = pos;
                    }
                }
                out[[i, f]] = conv[[best[f], f]].tanh();
            }
            windows.push(win);
            argmax.push(best);
        }
        let cache = CharCnnCache {
            char_ids: words.to_vec(),
            windows,
            argmax,
            out: out.clone(),
        };
        (out, cache)
    }

    pub fn backward(&self, cache: &CharCnnCache, d_out: ArrayView2<f64>, grad: &mut CharCnnParams) {
        let dim = self.char_dim();
        let half = self.window / 2;
        for (i, ids) in cache.char_ids.iter().enumerate() {
            for (f, &pos) in cache.argmax[i].iter().enumerate() {
                let y = cache.out[[i, f]];
                let dm = d_out[[i, f]] * (1.0 - y * y);
                if dm == 0.0 {
                    continue;
                }
                let win = cache.windows[i].row(pos);
                grad.conv.w.row_mut(f).scaled_add(dm, &win);
                grad.conv.b[f] += dm;
                let w_row = self.conv.w.row(f);
                for k in 0..self.window {
                    let src = pos + k;
                    if src < half || src - half >= ids.len() {
                        continue;
                    }
                    grad.emb
                        .row_mut(ids[src - half])
                        .scaled_add(dm, &w_row.slice(s![k * dim..(k + 1) * dim]));
                }
            }
        }
    }
}

/// Pairwise biaffine scores `s[i][j] = a_i^T W b_j + u^T a_i + v^T b_j + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct Biaffine {
    pub w: Array2<f64>,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub bias: Array1<f64>,
}

impl Biaffine {
    pub fn zeros(left: usize, right: usize) -> Self {
        Biaffine {
            w: Array2::zeros((left, right)),
            u: Array1::zeros(left),
            v: Array1::zeros(right),
            bias: Array1::zeros(1),
        }
    }

    pub fn forward(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
        let mut scores = a.dot(&self.w).dot(&b.t());
        let left = a.dot(&self.u);
        let right = b.dot(&self.v);
        for ((i, j), s) in scores.indexed_iter_mut() {
            *s += left[i] + right[j] + self.bias[0];
        }
        scores
    }

    /// Returns gradients with respect to `a` and `b`.
    pub fn backward(
        &self,
        a: ArrayView2<f64>,
        b: ArrayView2<f64>,
        d_scores: ArrayView2<f64>,
        grad: &mut Biaffine,
    ) -> (Array2<f64>, Array2<f64>) {
        let row_sums = d_scores.sum_axis(Axis(1));
        let col_sums = d_scores.sum_axis(Axis(0));

        let db_w = d_scores.dot(&b);
        grad.w += &a.t().dot(&db_w);
        grad.u += &a.t().dot(&row_sums);
        grad.v += &b.t().dot(&col_sums);
        grad.bias[0] += d_scores.sum();

        let mut da = db_w.dot(&self.w.t());
        for (i, mut row) in da.rows_mut().into_iter().enumerate() {
            row.scaled_add(row_sums[i], &self.u);
        }
        let mut db = d_scores.t().dot(&a).dot(&self.w);
        for (j, mut row) in db.rows_mut().into_iter().enumerate() {
            row.scaled_add(col_sums[j], &self.v);
        }
        (da, db)
    }
}

/// Log-softmax of a vector, skipping entries that are negative infinity.
pub fn log_softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let sum: f64 = x.iter().map(|&v| (v - max).exp()).sum();
    let log_z = max + sum.ln();
    x.mapv(|v| v - log_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central finite differences of `f` at every entry of `x`.
    fn numeric_grad(x: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
        let h = 1e-6;
        let mut g = Array2::zeros(x.dim());
        for idx in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus.as_slice_mut().unwrap()[idx] += h;
            minus.as_slice_mut().unwrap()[idx] -= h;
            g.as_slice_mut().unwrap()[idx] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        g
    }

    fn close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) -> bool {
        a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    #[test]
    fn log_softmax_ignores_masked_entries() {
        let ls = log_softmax(array![0.0, f64::NEG_INFINITY, 0.0].view());
        assert!((ls[0] - (0.5f64).ln()).abs() < 1e-12);
        assert_eq!(ls[1], f64::NEG_INFINITY);
    }

    #[test]
    fn lstm_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::new(&mut rng, 3, 2, 1.0);
        let x = glorot(&mut rng, 4, 2, 2.0);
        let weights = glorot(&mut rng, 4, 3, 2.0);
        for reverse in [false, true] {
            let mask = Some(array![1.5, 0.0, 1.5]);
            let loss = |x: &Array2<f64>| {
                let (h, _) = lstm_forward(&p, x.clone(), reverse, mask.clone());
                (&h * &weights).sum()
            };
            let (_, cache) = lstm_forward(&p, x.clone(), reverse, mask.clone());
            let mut grad = LstmParams::zeros(3, 2);
            let dx = lstm_backward(&p, &cache, weights.view(), &mut grad);
            assert!(close(&dx, &numeric_grad(&x, loss), 1e-6));
        }
    }

    #[test]
    fn zero_lstm_outputs_zero() {
        let p = LstmParams::zeros(4, 3);
        let x = Array2::from_elem((5, 3), 0.7);
        let (h, _) = lstm_forward(&p, x, false, None);
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn biaffine_input_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bi = Biaffine {
            w: glorot(&mut rng, 3, 2, 1.0),
            u: uniform_vec(&mut rng, 3, 1.0),
            v: uniform_vec(&mut rng, 2, 1.0),
            bias: array![0.3],
        };
        let a = glorot(&mut rng, 4, 3, 1.0);
        let b = glorot(&mut rng, 5, 2, 1.0);
        let weights = glorot(&mut rng, 4, 5, 1.0);
        let mut grad = Biaffine::zeros(3, 2);
        let (da, db) = bi.backward(a.view(), b.view(), weights.view(), &mut grad);
        let fa = |a: &Array2<f64>| (&bi.forward(a.view(), b.view()) * &weights).sum();
        let fb = |b: &Array2<f64>| (&bi.forward(a.view(), b.view()) * &weights).sum();
        assert!(close(&da, &numeric_grad(&a, fa), 1e-6));
        assert!(close(&db, &numeric_grad(&b, fb), 1e-6));
    }

    #[test]
    fn char_cnn_shapes_and_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cnn = CharCnnParams {
            emb: glorot(&mut rng, 6, 2, 1.0),
            conv: Linear::new(&mut rng, 4, 6, 1.0),
            window: 3,
        };
        let (out, _) = cnn.forward(&[vec![2], vec![3, 4, 5]]);
        assert_eq!(out.dim(), (2, 4));
        assert!(out.iter().all(|v| v.abs() < 1.0));
        // A single character only sees itself in the centre slot.
        let win = cnn.windows(&[2]);
        assert_eq!(win.slice(s![0, 0..2]).sum(), 0.0);
        assert_eq!(win.slice(s![0, 2..4]), cnn.emb.row(2));
    }

    #[test]
    fn dropout_mask_scales_kept_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = dropout_mask(&mut rng, 1000, 0.25);
        assert!(m.iter().all(|&v| v == 0.0 || (v - 4.0 / 3.0).abs() < 1e-12));
        let kept = m.iter().filter(|&&v| v > 0.0).count();
        assert!((650..850).contains(&kept));
    }
}
