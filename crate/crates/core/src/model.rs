//! Learnable parameters, vocabularies and the checkpoint container.
//!
//! A checkpoint is the magic bytes `GGPARSE\0`, a little-endian `u64` header
//! length, a JSON header, then every tensor listed in the header as
//! little-endian `f32` values in row-major order. Fixed external vectors, when
//! present, follow as one more block.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::embeddings::ExternalEmbeddings;
use crate::error::{Error, Result};
use crate::nn::{glorot, Biaffine, CharCnnParams, Linear, LstmParams};
use crate::scores::ORDER_CLASSES;
use crate::treebank::Vocab;

pub const MAGIC: &[u8; 8] = b"GGPARSE\0";
pub const FORMAT_VERSION: u32 = 1;

/// Tensor sizes implied by a config, a vocabulary and optional external vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub words: usize,
    pub pos_tags: usize,
    pub chars: usize,
    pub labels: usize,
    pub word_dim: usize,
    pub pos_dim: usize,
    pub char_dim: usize,
    pub char_filters: usize,
    pub char_window: usize,
    pub external_dim: usize,
    pub hidden_dim: usize,
    pub rnn_layers: usize,
    pub arc_dim: usize,
    pub order_dim: usize,
    pub label_dim: usize,
}

impl Dims {
    pub fn new(config: &Config, vocab: &Vocab, external_dim: usize) -> Self {
        Dims {
            words: vocab.words.len(),
            pos_tags: vocab.pos.len(),
            chars: vocab.chars.len(),
            labels: vocab.labels.len(),
            word_dim: config.word_dim,
            pos_dim: config.pos_dim,
            char_dim: config.char_dim,
            char_filters: config.char_filters,
            char_window: config.char_window,
            external_dim,
            hidden_dim: config.hidden_dim,
            rnn_layers: config.rnn_layers,
            arc_dim: config.arc_dim,
            order_dim: config.order_dim,
            label_dim: config.label_dim,
        }
    }

    /// Width of one encoder input row.
    pub fn input_dim(&self) -> usize {
        self.word_dim + self.pos_dim + self.char_filters + self.external_dim
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim()
        } else {
            2 * self.hidden_dim
        }
    }
}

/// Per-label biaffine scorer; slice `r` of each tensor belongs to label `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelBiaffine {
    pub w: Array3<f64>,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub dims: Dims,
    pub word_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub chars: CharCnnParams,
    /// Encoder input at the root position.
    pub root: Array1<f64>,
    /// Forward and backward cell of each stacked layer.
    pub lstm: Vec<[LstmParams; 2]>,
    pub mlp_head: Linear,
    pub mlp_dep: Linear,
    pub mlp_order: Linear,
    pub mlp_label_head: Linear,
    pub mlp_label_dep: Linear,
    pub arc: Biaffine,
    pub order: Linear,
    pub label: LabelBiaffine,
}

impl Params {
    pub fn zeros(dims: Dims) -> Self {
        let h = dims.hidden_dim;
        Params {
            dims,
            word_emb: Array2::zeros((dims.words, dims.word_dim)),
            pos_emb: Array2::zeros((dims.pos_tags, dims.pos_dim)),
            chars: CharCnnParams {
                emb: Array2::zeros((dims.chars, dims.char_dim)),
                conv: Linear::zeros(dims.char_filters, dims.char_window * dims.char_dim),
                window: dims.char_window,
            },
            root: Array1::zeros(dims.input_dim()),
            lstm: (0..dims.rnn_layers)
                .map(|l| {
                    let input = dims.layer_input(l);
                    [LstmParams::zeros(h, input), LstmParams::zeros(h, input)]
                })
                .collect(),
            mlp_head: Linear::zeros(dims.arc_dim, 2 * h),
            mlp_dep: Linear::zeros(dims.arc_dim, 2 * h),
            mlp_order: Linear::zeros(dims.order_dim, 2 * h),
            mlp_label_head: Linear::zeros(dims.label_dim, 2 * h),
            mlp_label_dep: Linear::zeros(dims.label_dim, 2 * h),
            arc: Biaffine::zeros(dims.arc_dim, dims.arc_dim),
            order: Linear::zeros(ORDER_CLASSES, dims.order_dim),
            label: LabelBiaffine {
                w: Array3::zeros((dims.labels, dims.label_dim, dims.label_dim)),
                u: Array2::zeros((dims.labels, dims.label_dim)),
                v: Array2::zeros((dims.labels, dims.label_dim)),
                bias: Array1::zeros(dims.labels),
            },
        }
    }

    /// Random initialization. Weight matrices are Glorot-uniform scaled by
    /// `scale`; biases and the biaffine linear terms start at zero.
    pub fn random(dims: Dims, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let h = dims.hidden_dim;
        let mut p = Params::zeros(dims);
        p.word_emb = glorot(rng, dims.words, dims.word_dim, scale);
        p.pos_emb = glorot(rng, dims.pos_tags, dims.pos_dim, scale);
        p.chars.emb = glorot(rng, dims.chars, dims.char_dim, scale);
        p.chars.conv = Linear::new(
            rng,
            dims.char_filters,
            dims.char_window * dims.char_dim,
            scale,
        );
        p.root = glorot(rng, 1, dims.input_dim(), scale).row(0).to_owned();
        for (l, cells) in p.lstm.iter_mut().enumerate() {
            let input = dims.layer_input(l);
            *cells = [
                LstmParams::new(rng, h, input, scale),
                LstmParams::new(rng, h, input, scale),
            ];
        }
        p.mlp_head = Linear::new(rng, dims.arc_dim, 2 * h, scale);
        p.mlp_dep = Linear::new(rng, dims.arc_dim, 2 * h, scale);
        p.mlp_order = Linear::new(rng, dims.order_dim, 2 * h, scale);
        p.mlp_label_head = Linear::new(rng, dims.label_dim, 2 * h, scale);
        p.mlp_label_dep = Linear::new(rng, dims.label_dim, 2 * h, scale);
        p.arc.w = glorot(rng, dims.arc_dim, dims.arc_dim, scale);
        p.order = Linear::new(rng, ORDER_CLASSES, dims.order_dim, scale);
        for r in 0..dims.labels {
            p.label
                .w
                .index_axis_mut(ndarray::Axis(0), r)
                .assign(&glorot(rng, dims.label_dim, dims.label_dim, scale));
        }
        p
    }

    /// Every tensor with its name, in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out: Vec<(String, ArrayViewD<'_, f64>)> = vec![
            ("word_emb".into(), self.word_emb.view().into_dyn()),
            ("pos_emb".into(), self.pos_emb.view().into_dyn()),
            ("char_emb".into(), self.chars.emb.view().into_dyn()),
            ("char_conv.w".into(), self.chars.conv.w.view().into_dyn()),
            ("char_conv.b".into(), self.chars.conv.b.view().into_dyn()),
            ("root".into(), self.root.view().into_dyn()),
        ];
        for (l, cells) in self.lstm.iter().enumerate() {
            for (dir, cell) in ["fwd", "bwd"].iter().zip(cells) {
                let prefix = format!("lstm.{}.{}", l, dir);
                out.push((format!("{}.w_x", prefix), cell.w_x.view().into_dyn()));
                out.push((format!("{}.w_h", prefix), cell.w_h.view().into_dyn()));
                out.push((format!("{}.b", prefix), cell.b.view().into_dyn()));
            }
        }
        for (name, lin) in [
            ("mlp_head", &self.mlp_head),
            ("mlp_dep", &self.mlp_dep),
            ("mlp_order", &self.mlp_order),
            ("mlp_label_head", &self.mlp_label_head),
            ("mlp_label_dep", &self.mlp_label_dep),
        ] {
            out.push((format!("{}.w", name), lin.w.view().into_dyn()));
            out.push((format!("{}.b", name), lin.b.view().into_dyn()));
        }
        out.push(("arc.w".into(), self.arc.w.view().into_dyn()));
        out.push(("arc.u".into(), self.arc.u.view().into_dyn()));
        out.push(("arc.v".into(), self.arc.v.view().into_dyn()));
        out.push(("arc.bias".into(), self.arc.bias.view().into_dyn()));
        out.push(("order.w".into(), self.order.w.view().into_dyn()));
        out.push(("order.b".into(), self.order.b.view().into_dyn()));
        out.push(("label.w".into(), self.label.w.view().into_dyn()));
        out.push(("label.u".into(), self.label.u.view().into_dyn()));
        out.push(("label.v".into(), self.label.v.view().into_dyn()));
        out.push(("label.bias".into(), self.label.bias.view().into_dyn()));
        out
    }

    /// Mutable views in the same order as [`Params::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out: Vec<(String, ArrayViewMutD<'_, f64>)> = vec![
            ("word_emb".into(), self.word_emb.view_mut().into_dyn()),
            ("pos_emb".into(), self.pos_emb.view_mut().into_dyn()),
            ("char_emb".into(), self.chars.emb.view_mut().into_dyn()),
            (
                "char_conv.w".into(),
                self.chars.conv.w.view_mut().into_dyn(),
            ),
            (
                "char_conv.b".into(),
                self.chars.conv.b.view_mut().into_dyn(),
            ),
            ("root".into(), self.root.view_mut().into_dyn()),
        ];
        for (l, cells) in self.lstm.iter_mut().enumerate() {
            for (dir, cell) in ["fwd", "bwd"].iter().zip(cells.iter_mut()) {
                let prefix = format!("lstm.{}.{}", l, dir);
                out.push((format!("{}.w_x", prefix), cell.w_x.view_mut().into_dyn()));
                out.push((format!("{}.w_h", prefix), cell.w_h.view_mut().into_dyn()));
                out.push((format!("{}.b", prefix), cell.b.view_mut().into_dyn()));
            }
        }
        for (name, lin) in [
            ("mlp_head", &mut self.mlp_head),
            ("mlp_dep", &mut self.mlp_dep),
            ("mlp_order", &mut self.mlp_order),
            ("mlp_label_head", &mut self.mlp_label_head),
            ("mlp_label_dep", &mut self.mlp_label_dep),
        ] {
            out.push((format!("{}.w", name), lin.w.view_mut().into_dyn()));
            out.push((format!("{}.b", name), lin.b.view_mut().into_dyn()));
        }
        out.push(("arc.w".into(), self.arc.w.view_mut().into_dyn()));
        out.push(("arc.u".into(), self.arc.u.view_mut().into_dyn()));
        out.push(("arc.v".into(), self.arc.v.view_mut().into_dyn()));
        out.push(("arc.bias".into(), self.arc.bias.view_mut().into_dyn()));
        out.push(("order.w".into(), self.order.w.view_mut().into_dyn()));
        out.push(("order.b".into(), self.order.b.view_mut().into_dyn()));
        out.push(("label.w".into(), self.label.w.view_mut().into_dyn()));
        out.push(("label.u".into(), self.label.u.view_mut().into_dyn()));
        out.push(("label.v".into(), self.label.v.view_mut().into_dyn()));
        out.push(("label.bias".into(), self.label.bias.view_mut().into_dyn()));
        out
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += other * alpha`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Params, alpha: f64) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(alpha, &b);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * alpha);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, t)| t.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// A trained or freshly initialized parser.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: Config,
    pub vocab: Vocab,
    pub params: Params,
    pub external: Option<ExternalEmbeddings>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Fingerprints {
    words: String,
    pos: String,
    chars: String,
    labels: String,
}

impl Fingerprints {
    fn of(vocab: &Vocab) -> Self {
        let hex = |v: u64| format!("{:016x}", v);
        Fingerprints {
            words: hex(vocab.words.fingerprint()),
            pos: hex(vocab.pos.fingerprint()),
            chars: hex(vocab.chars.fingerprint()),
            labels: hex(vocab.labels.fingerprint()),
        }
    }

    fn matches(&self, other: &Fingerprints) -> bool {
        self.words == other.words
            && self.pos == other.pos
            && self.chars == other.chars
            && self.labels == other.labels
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    dims: Dims,
    fingerprints: Fingerprints,
    vocab: Vocab,
    config: Vec<(String, String)>,
    tensors: Vec<TensorEntry>,
    external_forms: Option<Vec<String>>,
}

fn write_f32s<'a, W: Write>(
    out: &mut W,
    values: impl Iterator<Item = &'a f64>,
) -> std::io::Result<()> {
    for &v in values {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_f32s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 4];
    input
        .read_exact(&mut buf)
        .map_err(|_| Error::Model("checkpoint truncated".into()))?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

impl Model {
    /// Randomly initialized model for `vocab`, seeded from `config.seed`.
    pub fn new(
        config: &Config,
        vocab: Vocab,
        external: Option<ExternalEmbeddings>,
    ) -> Result<Self> {
        config.validate()?;
        if vocab.labels.is_empty() {
            return Err(Error::Argument("vocabulary has no labels".into()));
        }
        let dims = Dims::new(config, &vocab, external.as_ref().map_or(0, |e| e.dim()));
        Ok(Model {
            config: config.clone(),
            vocab,
            params: Params::random(dims, config.seed, config.init_scale),
            external,
        })
    }

    pub fn dims(&self) -> Dims {
        self.params.dims
    }

    fn header(&self) -> Header {
        Header {
            format_version: FORMAT_VERSION,
            dims: self.params.dims,
            fingerprints: Fingerprints::of(&self.vocab),
            vocab: self.vocab.clone(),
            config: self
                .config
                .to_pairs()
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v))
                .collect(),
            tensors: self
                .params
                .tensors()
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
            external_forms: self.external.as_ref().map(|e| e.forms().to_vec()),
        }
    }

    pub fn save_to<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header()).map_err(|e| Error::Model(e.to_string()))?;
        let io = |e: std::io::Error| Error::Model(format!("writing checkpoint: {}", e));
        out.write_all(MAGIC).map_err(io)?;
        out.write_all(&(header.len() as u64).to_le_bytes())
            .map_err(io)?;
        out.write_all(&header).map_err(io)?;
        for (_, t) in self.params.tensors() {
            write_f32s(&mut out, t.iter()).map_err(io)?;
        }
        if let Some(ext) = &self.external {
            write_f32s(&mut out, ext.vectors().iter()).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.save_to(BufWriter::new(file))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.save_to(&mut buf)
            .expect("writing to memory cannot fail");
        buf
    }

    pub fn load_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input
            .read_exact(&mut magic)
            .map_err(|_| Error::Model("not a checkpoint: file too short".into()))?;
        if &magic != MAGIC {
            return Err(Error::Model("not a checkpoint: bad magic bytes".into()));
        }
        let mut len = [0u8; 8];
        input
            .read_exact(&mut len)
            .map_err(|_| Error::Model("checkpoint truncated".into()))?;
        let len = u64::from_le_bytes(len) as usize;
        let mut header = vec![0u8; len];
        input
            .read_exact(&mut header)
            .map_err(|_| Error::Model("checkpoint truncated".into()))?;
        let header: Header = serde_json::from_slice(&header)
            .map_err(|e| Error::Model(format!("bad header: {}", e)))?;

        if header.format_version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "checkpoint format version {} not supported (expected {})",
                header.format_version, FORMAT_VERSION
            )));
        }
        let mut vocab = header.vocab;
        vocab.rebuild_indices();
        if !Fingerprints::of(&vocab).matches(&header.fingerprints) {
            return Err(Error::Model("vocabulary fingerprint mismatch".into()));
        }
        let mut config = Config::default();
        for (key, value) in &header.config {
            config
                .set(key, value)
                .map_err(|e| Error::Model(e.to_string()))?;
        }
        let dims = header.dims;
        if dims.words != vocab.words.len()
            || dims.pos_tags != vocab.pos.len()
            || dims.chars != vocab.chars.len()
            || dims.labels != vocab.labels.len()
        {
            return Err(Error::Model(
                "vocabulary sizes disagree with dimensions".into(),
            ));
        }

        let mut params = Params::zeros(dims);
        let expected = params.tensors();
        if expected.len() != header.tensors.len() {
            return Err(Error::Model(format!(
                "checkpoint lists {} tensors, expected {}",
                header.tensors.len(),
                expected.len()
            )));
        }
        for ((name, t), entry) in expected.iter().zip(&header.tensors) {
            if *name != entry.name || t.shape() != entry.shape.as_slice() {
                return Err(Error::Model(format!(
                    "tensor `{}` {:?} does not match expected `{}` {:?}",
                    entry.name,
                    entry.shape,
                    name,
                    t.shape()
                )));
            }
        }
        drop(expected);
        for (_, mut t) in params.tensors_mut() {
            let values = read_f32s(&mut input, t.len())?;
            for (dst, src) in t.iter_mut().zip(values) {
                *dst = src;
            }
        }

        let external = match header.external_forms {
            Some(forms) => {
                if dims.external_dim == 0 {
                    return Err(Error::Model("external vectors without a dimension".into()));
                }
                let values = read_f32s(&mut input, forms.len() * dims.external_dim)?;
                let vectors = Array2::from_shape_vec((forms.len(), dims.external_dim), values)
                    .map_err(|e| Error::Model(e.to_string()))?;
                Some(
                    ExternalEmbeddings::new(forms, vectors)
                        .map_err(|e| Error::Model(e.to_string()))?,
                )
            }
            None if dims.external_dim > 0 => {
                return Err(Error::Model(
                    "external dimension set but no vectors stored".into(),
                ))
            }
            None => None,
        };

        let mut rest = Vec::new();
        input
            .read_to_end(&mut rest)
            .map_err(|e| Error::Model(e.to_string()))?;
        if !rest.is_empty() {
            return Err(Error::Model(format!(
                "{} trailing bytes after parameters",
                rest.len()
            )));
        }
        Ok(Model {
            config,
            vocab,
            params,
            external,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Model::load_from(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{build_vocab, Sentence, Token};

    pub(crate) fn tiny_model(seed: u64) -> Model {
        let sentences = vec![Sentence::new(
            "1",
            vec![
                Token::new(1, "Dogs", "NOUN", 2, "nsubj"),
                Token::new(2, "bark", "VERB", 0, "root"),
                Token::new(3, ".", "PUNCT", 2, "punct"),
            ],
        )];
        let vocab = build_vocab(&sentences, 1).unwrap();
        let config = Config {
            seed,
            ..Config::tiny()
        };
        Model::new(&config, vocab, None).unwrap()
    }

    fn rounded(model: &Model) -> Params {
        let mut p = model.params.clone();
        for (_, mut t) in p.tensors_mut() {
            t.mapv_inplace(|v| f64::from(v as f32));
        }
        p
    }

    #[test]
    fn tensor_lists_agree() {
        let mut model = tiny_model(1);
        let names: Vec<String> = model.params.tensors().into_iter().map(|(n, _)| n).collect();
        let names_mut: Vec<String> = model
            .params
            .tensors_mut()
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        assert_eq!(names, names_mut);
        assert_eq!(names.len(), 6 + 6 + 10 + 6 + 4);
    }

    #[test]
    fn save_load_round_trip() {
        let model = tiny_model(4);
        let bytes = model.to_bytes();
        let loaded = Model::load_from(bytes.as_slice()).unwrap();
        assert_eq!(loaded.params, rounded(&model));
        assert_eq!(loaded.vocab, model.vocab);
        assert_eq!(loaded.config, model.config);
        assert_eq!(loaded.to_bytes(), bytes);
    }

    #[test]
    fn same_seed_gives_identical_bytes() {
        assert_eq!(tiny_model(7).to_bytes(), tiny_model(7).to_bytes());
        assert_ne!(tiny_model(7).to_bytes(), tiny_model(8).to_bytes());
    }

    #[test]
    fn rejects_version_and_shape_mismatch() {
        let model = tiny_model(1);
        let bytes = model.to_bytes();
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[16..16 + len]).unwrap();

        let patched = |new_header: String| {
            let mut out = MAGIC.to_vec();
            out.extend((new_header.len() as u64).to_le_bytes());
            out.extend(new_header.as_bytes());
            out.extend(&bytes[16 + len..]);
            out
        };
        let bad_version =
            patched(header.replacen("\"format_version\":1", "\"format_version\":9", 1));
        assert!(matches!(
            Model::load_from(bad_version.as_slice()),
            Err(Error::Model(_))
        ));

        let bad_shape = patched(header.replacen("\"shape\":[", "\"shape\":[1,", 1));
        assert!(matches!(
            Model::load_from(bad_shape.as_slice()),
            Err(Error::Model(_))
        ));

        assert!(Model::load_from(&bytes[..bytes.len() - 4]).is_err());
        assert!(Model::load_from(&b"garbage!"[..]).is_err());
    }

    #[test]
    fn external_vectors_are_stored() {
        let base = tiny_model(2);
        let ext = ExternalEmbeddings::new(
            vec!["dogs".into(), "bark".into()],
            Array2::from_shape_vec((2, 2), vec![0.5, -0.5, 1.0, 2.0]).unwrap(),
        )
        .unwrap();
        let model = Model::new(&base.config, base.vocab.clone(), Some(ext.clone())).unwrap();
        assert_eq!(model.dims().input_dim(), base.dims().input_dim() + 2);
        let loaded = Model::load_from(model.to_bytes().as_slice()).unwrap();
        assert_eq!(loaded.external, Some(ext));
    }
}
