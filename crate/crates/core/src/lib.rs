//! Global greedy dependency parsing.
//!
//! Sentences are scored in one shot by a BiLSTM-CNN encoder with biaffine
//! arc and label scorers and a parsing-order classifier that predicts each
//! word's depth below the root. Decoding is a greedy pass over a pending
//! list where the predicted layer is added to the arc probability, so deeper
//! words are attached first. Non-projective decoding, an MST baseline,
//! training with manual backpropagation, CoNLL I/O and evaluation are
//! included.
//!
//! The runnable programs in `examples/` walk through each capability.

pub mod cli;
pub mod config;
pub mod decoder;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod nn;
pub mod scorer;
pub mod scores;
pub mod scores_io;
pub mod synthetic;
pub mod training;
pub mod tree;
pub mod treebank;

pub use config::Config;
pub use decoder::{
    action_score, assign_labels, decode, decode_mst, decode_nonprojective, decode_projective,
    DecodeOptions, DecodeStats, DecoderKind, Decoding, PendingList,
};
pub use error::{Error, Result};
pub use evaluation::{attachment_scores, order_accuracy, EvalReport};
pub use model::Model;
pub use scorer::{encode, score_sentence, Mode};
pub use scores::{ScoreSet, ORDER_CLASSES};
pub use training::{gradients, loss, step, train, LossBreakdown, OptimizerState};
pub use tree::{
    compute_layers, enumerate_arborescences, is_projective, oracle_scores, validate_tree, DepTree,
    LayerAssignment, LAYER_CAP,
};
pub use treebank::{
    build_vocab, is_punctuation, read_conll, write_conll, Convention, Format, Sentence, Token,
    Vocab,
};
