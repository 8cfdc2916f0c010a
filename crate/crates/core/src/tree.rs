//! Dependency trees: validity, projectivity, layers and oracle scores.

use std::fmt;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::scores::{ScoreSet, ORDER_CLASSES};

/// Layers deeper than this are truncated for training targets.
pub const LAYER_CAP: usize = 32;

/// Largest sentence length accepted by [`enumerate_arborescences`].
pub const MAX_ENUMERATION_LEN: usize = 7;

/// A dependency tree over `n` words. `heads[i]` is the head of word `i + 1`
/// (0 is the root).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DepTree {
    pub heads: Vec<usize>,
    pub labels: Option<Vec<String>>,
}

impl DepTree {
    pub fn unlabeled(heads: Vec<usize>) -> Self {
        DepTree {
            heads,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    /// Head of word `dep` (1-based).
    pub fn head(&self, dep: usize) -> usize {
        self.heads[dep - 1]
    }
}

/// Why a head vector is not a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeDefect {
    Empty,
    OutOfRange {
        word: usize,
        head: usize,
    },
    SelfLoop {
        word: usize,
    },
    /// Words on a cycle that does not reach the root.
    Cycle {
        words: Vec<usize>,
    },
}

impl fmt::Display for TreeDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeDefect::Empty => write!(f, "empty tree"),
            TreeDefect::OutOfRange { word, head } => {
                write!(f, "head {} of word {} out of range", head, word)
            }
            TreeDefect::SelfLoop { word } => write!(f, "word {} is its own head", word),
            TreeDefect::Cycle { words } => write!(f, "cycle through words {:?}", words),
        }
    }
}

/// Check that `heads` is an arborescence rooted at 0. The root may have
/// several children.
pub fn validate_tree(heads: &[usize]) -> std::result::Result<(), TreeDefect> {
    let n = heads.len();
    if n == 0 {
        return Err(TreeDefect::Empty);
    }
    for (i, &h) in heads.iter().enumerate() {
        let word = i + 1;
        if h > n {
            return Err(TreeDefect::OutOfRange { word, head: h });
        }
        if h == word {
            return Err(TreeDefect::SelfLoop { word });
        }
    }

    // 0 = unvisited, 1 = on current path, 2 = reaches root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut node = start;
        while state[node] == 0 {
            state[node] = 1;
            path.push(node);
            node = heads[node - 1];
        }
        if state[node] == 1 {
            let pos = path.iter().position(|&w| w == node).unwrap();
            return Err(TreeDefect::Cycle {
                words: path[pos..].to_vec(),
            });
        }
        for w in path {
            state[w] = 2;
        }
    }
    Ok(())
}

/// Depth below the root of every word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerAssignment {
    pub layers: Vec<usize>,
}

impl LayerAssignment {
    /// Training targets: layers truncated at [`LAYER_CAP`].
    pub fn targets(&self) -> Vec<usize> {
        self.layers.iter().map(|&l| l.min(LAYER_CAP)).collect()
    }
}

pub fn compute_layers(tree: &DepTree) -> Result<LayerAssignment> {
    validate_tree(&tree.heads).map_err(|d| Error::Argument(format!("invalid tree: {}", d)))?;
    let n = tree.len();
    let mut layers = vec![usize::MAX; n + 1];
    layers[0] = 0;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut node = start;
        while layers[node] == usize::MAX {
            path.push(node);
            node = tree.head(node);
        }
        let mut depth = layers[node];
        for &w in path.iter().rev() {
            depth += 1;
            layers[w] = depth;
        }
    }
    layers.remove(0);
    Ok(LayerAssignment { layers })
}

fn dominates(heads: &[usize], ancestor: usize, mut node: usize) -> bool {
    while node != 0 {
        if node == ancestor {
            return true;
        }
        node = heads[node - 1];
    }
    ancestor == 0
}

/// A tree is projective when every word between a head and its dependent is
/// a descendant of that head.
pub fn is_projective(tree: &DepTree) -> bool {
    tree.heads.iter().enumerate().all(|(i, &h)| {
        let d = i + 1;
        let (lo, hi) = if h < d { (h, d) } else { (d, h) };
        (lo + 1..hi).all(|k| dominates(&tree.heads, h, k))
    })
}

/// All arborescences over `n` words in lexicographic order of head vectors.
pub fn enumerate_arborescences(n: usize) -> Result<impl Iterator<Item = Vec<usize>>> {
    if n > MAX_ENUMERATION_LEN {
        return Err(Error::Argument(format!(
            "enumeration limited to n <= {}, got {}",
            MAX_ENUMERATION_LEN, n
        )));
    }
    let total = if n == 0 {
        0
    } else {
        (n as u64 + 1).pow(n as u32)
    };
    Ok((0..total).filter_map(move |mut code| {
        let mut heads = Vec::with_capacity(n);
        for _ in 0..n {
            heads.push((code % (n as u64 + 1)) as usize);
            code /= n as u64 + 1;
        }
        heads.reverse();
        validate_tree(&heads).ok().map(|_| heads)
    }))
}

/// Scores under which the gold tree is the unique best decode: gold arcs get
/// score and probability 1, other arcs 0, order logits are one-hot at the
/// capped gold layer.
pub fn oracle_scores(tree: &DepTree) -> Result<ScoreSet> {
    oracle_scores_impl(tree, None)
}

/// Like [`oracle_scores`], with one-hot label scores at the given gold label
/// ids.
pub fn oracle_scores_labeled(
    tree: &DepTree,
    label_ids: &[usize],
    num_labels: usize,
) -> Result<ScoreSet> {
    if label_ids.len() != tree.len() {
        return Err(Error::Argument("one label id per word required".into()));
    }
    if let Some(&bad) = label_ids.iter().find(|&&l| l >= num_labels) {
        return Err(Error::Argument(format!(
            "label id {} outside 0..{}",
            bad, num_labels
        )));
    }
    oracle_scores_impl(tree, Some((label_ids, num_labels)))
}

fn oracle_scores_impl(tree: &DepTree, labels: Option<(&[usize], usize)>) -> Result<ScoreSet> {
    let layers = compute_layers(tree)?.targets();
    let n = tree.len();

    let mut arc = Array2::zeros((n + 1, n + 1));
    let mut order = Array2::zeros((n, ORDER_CLASSES));
    for d in 1..=n {
        arc[[tree.head(d), d]] = 1.0;
        order[[d - 1, layers[d - 1]]] = 1.0;
    }

    let label = labels.map(|(ids, num_labels)| {
        let mut label = Array3::zeros((n + 1, n, num_labels));
        for d in 1..=n {
            label[[tree.head(d), d - 1, ids[d - 1]]] = 1.0;
        }
        label
    });

    let mut arc_prob = arc.clone();
    for i in 0..=n {
        arc[[i, i]] = f64::NEG_INFINITY;
        arc_prob[[i, i]] = 0.0;
    }
    Ok(ScoreSet {
        arc,
        arc_prob,
        order_logits: order,
        label,
    })
}
