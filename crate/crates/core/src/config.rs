//! Hyperparameters and run settings, read from flat `key = value` files.

use std::fs;
use std::path::Path;

use crate::decoder::{DecodeOptions, DecoderKind};
use crate::error::{Error, Result};
use crate::treebank::Convention;

/// All hyperparameters.
///
/// Defaults are desk scale. The published setup used 3 stacked BiLSTM
/// layers with 512 hidden units, a 512-dimensional arc MLP and
/// 128-dimensional label and order MLPs; [`Config::paper_scale`] selects
/// those sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub word_dim: usize,
    pub pos_dim: usize,
    pub char_dim: usize,
    pub char_filters: usize,
    pub char_window: usize,
    /// Hidden units per direction.
    pub hidden_dim: usize,
    pub rnn_layers: usize,
    pub arc_dim: usize,
    pub order_dim: usize,
    pub label_dim: usize,

    pub embedding_dropout: f64,
    /// Dropout on the recurrent state, one mask per sequence.
    pub recurrent_dropout: f64,
    /// Dropout between stacked recurrent layers.
    pub layer_dropout: f64,

    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without sufficient dev improvement before the rate decays.
    pub patience: usize,
    /// Minimum dev UAS gain, in percentage points, that counts as progress.
    pub min_improvement: f64,
    pub max_decays: usize,

    pub min_word_freq: usize,
    pub seed: u64,
    pub init_scale: f64,

    pub decoder: DecoderKind,
    pub convention: Convention,
    pub order_offset_on_raw: bool,
    pub mst_on_prob: bool,
    pub order_tie_by_confidence: bool,
    pub external_embeddings: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            word_dim: 100,
            pos_dim: 32,
            char_dim: 8,
            char_filters: 50,
            char_window: 3,
            hidden_dim: 128,
            rnn_layers: 1,
            arc_dim: 128,
            order_dim: 64,
            label_dim: 64,
            embedding_dropout: 0.33,
            recurrent_dropout: 0.33,
            layer_dropout: 0.33,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.9,
            epsilon: 1e-8,
            lr_decay: 0.75,
            clip_norm: 5.0,
            batch_size: 32,
            max_epochs: 100,
            patience: 3,
            min_improvement: 0.01,
            max_decays: 10,
            min_word_freq: 2,
            seed: 1,
            init_scale: 1.0,
            decoder: DecoderKind::GreedyProjective,
            convention: Convention::Ud,
            order_offset_on_raw: false,
            mst_on_prob: false,
            order_tie_by_confidence: false,
            external_embeddings: None,
        }
    }
}

/// Keys accepted in config files and as `--key=value` overrides.
pub const KEYS: &[&str] = &[
    "preset",
    "word_dim",
    "pos_dim",
    "char_dim",
    "char_filters",
    "char_window",
    "hidden_dim",
    "rnn_layers",
    "arc_dim",
    "order_dim",
    "label_dim",
    "embedding_dropout",
    "recurrent_dropout",
    "layer_dropout",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "lr_decay",
    "clip_norm",
    "batch_size",
    "max_epochs",
    "patience",
    "min_improvement",
    "max_decays",
    "min_word_freq",
    "seed",
    "init_scale",
    "decoder",
    "convention",
    "order_offset_on_raw",
    "mst_on_prob",
    "order_tie_by_confidence",
    "external_embeddings",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{}` for `{}`", value, key)))
}

impl Config {
    /// Network sizes of the published configuration.
    pub fn paper_scale() -> Self {
        Config {
            hidden_dim: 512,
            rnn_layers: 3,
            arc_dim: 512,
            order_dim: 128,
            label_dim: 128,
            ..Config::default()
        }
    }

    /// Small network used by tests and quick experiments.
    pub fn tiny() -> Self {
        Config {
            word_dim: 8,
            pos_dim: 4,
            char_dim: 3,
            char_filters: 5,
            hidden_dim: 6,
            arc_dim: 5,
            order_dim: 4,
            label_dim: 4,
            ..Config::default()
        }
    }

    pub fn is_key(key: &str) -> bool {
        KEYS.contains(&normalize(key).as_str())
    }

    /// Set one key. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize(key);
        let value = value.trim();
        match key.as_str() {
            "preset" => {
                let keep_seed = self.seed;
                *self = match value {
                    "desk" => Config::default(),
                    "paper" => Config::paper_scale(),
                    "tiny" => Config::tiny(),
                    other => return Err(Error::Config(format!("unknown preset `{}`", other))),
                };
                self.seed = keep_seed;
            }
            "word_dim" => self.word_dim = parse(&key, value)?,
            "pos_dim" => self.pos_dim = parse(&key, value)?,
            "char_dim" => self.char_dim = parse(&key, value)?,
            "char_filters" => self.char_filters = parse(&key, value)?,
            "char_window" => self.char_window = parse(&key, value)?,
            "hidden_dim" => self.hidden_dim = parse(&key, value)?,
            "rnn_layers" => self.rnn_layers = parse(&key, value)?,
            "arc_dim" => self.arc_dim = parse(&key, value)?,
            "order_dim" => self.order_dim = parse(&key, value)?,
            "label_dim" => self.label_dim = parse(&key, value)?,
            "embedding_dropout" => self.embedding_dropout = parse(&key, value)?,
            "recurrent_dropout" => self.recurrent_dropout = parse(&key, value)?,
            "layer_dropout" => self.layer_dropout = parse(&key, value)?,
            "learning_rate" => self.learning_rate = parse(&key, value)?,
            "beta1" => self.beta1 = parse(&key, value)?,
            "beta2" => self.beta2 = parse(&key, value)?,
            "epsilon" => self.epsilon = parse(&key, value)?,
            "lr_decay" => self.lr_decay = parse(&key, value)?,
            "clip_norm" => self.clip_norm = parse(&key, value)?,
            "batch_size" => self.batch_size = parse(&key, value)?,
            "max_epochs" => self.max_epochs = parse(&key, value)?,
            "patience" => self.patience = parse(&key, value)?,
            "min_improvement" => self.min_improvement = parse(&key, value)?,
            "max_decays" => self.max_decays = parse(&key, value)?,
            "min_word_freq" => self.min_word_freq = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "init_scale" => self.init_scale = parse(&key, value)?,
            "decoder" => self.decoder = value.parse()?,
            "convention" => self.convention = value.parse()?,
            "order_offset_on_raw" => self.order_offset_on_raw = parse(&key, value)?,
            "mst_on_prob" => self.mst_on_prob = parse(&key, value)?,
            "order_tie_by_confidence" => self.order_tie_by_confidence = parse(&key, value)?,
            "external_embeddings" => {
                self.external_embeddings = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(value.to_owned())
                }
            }
            other => return Err(Error::Config(format!("unknown config key `{}`", other))),
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("word_dim", self.word_dim),
            ("pos_dim", self.pos_dim),
            ("char_dim", self.char_dim),
            ("char_filters", self.char_filters),
            ("hidden_dim", self.hidden_dim),
            ("rnn_layers", self.rnn_layers),
            ("arc_dim", self.arc_dim),
            ("order_dim", self.order_dim),
            ("label_dim", self.label_dim),
            ("batch_size", self.batch_size),
        ];
        if let Some((key, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{}` must be positive", key)));
        }
        if self.char_window.is_multiple_of(2) {
            return Err(Error::Config("`char_window` must be odd".into()));
        }
        for (key, p) in [
            ("embedding_dropout", self.embedding_dropout),
            ("recurrent_dropout", self.recurrent_dropout),
            ("layer_dropout", self.layer_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("`{}` must be in [0, 1)", key)));
            }
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("`learning_rate` must be positive".into()));
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment.
    pub fn from_str_pairs(text: &str) -> Result<Self> {
        let mut config = Config::default();
        config.apply_pairs(text)?;
        Ok(config)
    }

    pub fn apply_pairs(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_str_pairs(&text)
    }

    /// Every key with its current value, in [`KEYS`] order (without `preset`).
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("word_dim", self.word_dim.to_string()),
            ("pos_dim", self.pos_dim.to_string()),
            ("char_dim", self.char_dim.to_string()),
            ("char_filters", self.char_filters.to_string()),
            ("char_window", self.char_window.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("rnn_layers", self.rnn_layers.to_string()),
            ("arc_dim", self.arc_dim.to_string()),
            ("order_dim", self.order_dim.to_string()),
            ("label_dim", self.label_dim.to_string()),
            ("embedding_dropout", self.embedding_dropout.to_string()),
            ("recurrent_dropout", self.recurrent_dropout.to_string()),
            ("layer_dropout", self.layer_dropout.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("lr_decay", self.lr_decay.to_string()),
            ("clip_norm", self.clip_norm.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("min_improvement", self.min_improvement.to_string()),
            ("max_decays", self.max_decays.to_string()),
            ("min_word_freq", self.min_word_freq.to_string()),
            ("seed", self.seed.to_string()),
            ("init_scale", self.init_scale.to_string()),
            ("decoder", self.decoder.to_string()),
            (
                "convention",
                match self.convention {
                    Convention::Ud => "ud".into(),
                    Convention::Ptb => "ptb".into(),
                },
            ),
            ("order_offset_on_raw", self.order_offset_on_raw.to_string()),
            ("mst_on_prob", self.mst_on_prob.to_string()),
            (
                "order_tie_by_confidence",
                self.order_tie_by_confidence.to_string(),
            ),
            (
                "external_embeddings",
                self.external_embeddings
                    .clone()
                    .unwrap_or_else(|| "none".into()),
            ),
        ]
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            use_order: true,
            order_on_raw: self.order_offset_on_raw,
            mst_on_prob: self.mst_on_prob,
            order_tie_by_confidence: self.order_tie_by_confidence,
        }
    }
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}
