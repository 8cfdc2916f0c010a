//! Inference over a [`ScoreSet`]: global greedy projective and
//! non-projective decoding, and a maximum spanning arborescence baseline.
//!
//! The greedy decoders keep a pending list of unattached nodes. A projective
//! step picks the best attachment between adjacent pending nodes, scored as
//! arc probability plus the dependent's predicted layer, so that deeper nodes
//! collect their children before being attached themselves. The
//! non-projective decoder sorts words by predicted layer once and attaches
//! each to its best-scoring pending head.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::{argmax, ScoreSet};
use crate::tree::DepTree;

#[derive(Clone, Copy, Debug, Eq, PartialEq, Hash, Serialize, Deserialize)]
pub enum DecoderKind {
    GreedyProjective,
    GreedyNonProjective,
    Mst,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 3] = [
        DecoderKind::GreedyProjective,
        DecoderKind::GreedyNonProjective,
        DecoderKind::Mst,
    ];
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy-projective" => Ok(DecoderKind::GreedyProjective),
            "greedy-nonprojective" => Ok(DecoderKind::GreedyNonProjective),
            "mst" => Ok(DecoderKind::Mst),
            other => Err(Error::Config(format!("unknown decoder `{}`", other))),
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::GreedyProjective => "greedy-projective",
            DecoderKind::GreedyNonProjective => "greedy-nonprojective",
            DecoderKind::Mst => "mst",
        })
    }
}

/// Decoder switches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Add the predicted layer to the arc term. Disabling it gives the
    /// arc-only ablation.
    pub use_order: bool,
    /// Add the layer offset to the raw biaffine score instead of the arc
    /// probability.
    pub order_on_raw: bool,
    /// Run MST over arc probabilities instead of raw scores.
    pub mst_on_prob: bool,
    /// Break ties between equal predicted layers in non-projective decoding
    /// by the winning order logit before falling back to position.
    pub order_tie_by_confidence: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            use_order: true,
            order_on_raw: false,
            mst_on_prob: false,
            order_tie_by_confidence: false,
        }
    }
}

impl DecodeOptions {
    pub fn arc_only() -> Self {
        DecodeOptions {
            use_order: false,
            ..Default::default()
        }
    }
}

/// Operation counts collected while decoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub attachments: usize,
    /// Action (projective), head candidate (non-projective) or incoming edge
    /// (MST) score evaluations.
    pub candidate_evaluations: usize,
    pub sort_comparisons: usize,
    pub contractions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionKind {
    /// Attach `p[i+1]` to `p[i]`.
    AttachLeft,
    /// Attach `p[i]` to `p[i+1]`.
    AttachRight,
    /// Attach a pending node right of the head.
    NpAttachLeft,
    /// Attach a pending node left of the head.
    NpAttachRight,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub kind: ActionKind,
    pub head: usize,
    pub dep: usize,
    pub score: f64,
}

/// A decoded tree with its action sequence and operation counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoding {
    pub tree: DepTree,
    pub actions: Vec<Action>,
    pub stats: DecodeStats,
}

/// Ordered list of unattached nodes; the root stays at the front.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingList {
    nodes: Vec<usize>,
}

impl PendingList {
    pub fn new(n: usize) -> Self {
        PendingList {
            nodes: (0..=n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.contains(&node)
    }

    /// Remove the node at `position`, keeping the others in order.
    pub fn remove_at(&mut self, position: usize) -> usize {
        assert!(position > 0, "the root cannot be removed from pending");
        self.nodes.remove(position)
    }

    pub fn remove_node(&mut self, node: usize) {
        let position = self
            .nodes
            .iter()
            .position(|&p| p == node)
            .expect("node not pending");
        self.remove_at(position);
    }
}

fn check_pair(scores: &ScoreSet, head: usize, dep: usize) -> Result<()> {
    let n = scores.n();
    if head > n || dep > n || dep == 0 || head == dep {
        return Err(Error::Argument(format!(
            "invalid attachment {} -> {} for {} words",
            head, dep, n
        )));
    }
    Ok(())
}

/// Greedy action score: arc probability of `head -> dep` plus the predicted
/// layer of `dep`.
pub fn action_score(scores: &ScoreSet, head: usize, dep: usize) -> Result<f64> {
    check_pair(scores, head, dep)?;
    Ok(action_score_with(
        scores,
        head,
        dep,
        &DecodeOptions::default(),
    ))
}

fn action_score_with(scores: &ScoreSet, head: usize, dep: usize, opts: &DecodeOptions) -> f64 {
    let arc = if opts.order_on_raw {
        scores.arc[[head, dep]]
    } else {
        scores.arc_prob[[head, dep]]
    };
    if opts.use_order {
        arc + scores.order_priority(dep) as f64
    } else {
        arc
    }
}

pub fn decode(scores: &ScoreSet, kind: DecoderKind, opts: &DecodeOptions) -> Decoding {
    match kind {
        DecoderKind::GreedyProjective => decode_projective_with(scores, opts),
        DecoderKind::GreedyNonProjective => decode_nonprojective_with(scores, opts),
        DecoderKind::Mst => decode_mst_with(scores, opts),
    }
}

pub fn decode_projective(scores: &ScoreSet) -> DepTree {
    decode_projective_with(scores, &DecodeOptions::default()).tree
}

pub fn decode_projective_with(scores: &ScoreSet, opts: &DecodeOptions) -> Decoding {
    let n = scores.n();
    let mut heads = vec![0; n];
    let mut pending = PendingList::new(n);
    let mut stats = DecodeStats::default();
    let mut actions = Vec::with_capacity(n);

    // Layer offsets depend only on the dependent; compute them once.
    let priorities: Vec<f64> = if opts.use_order {
        std::iter::once(0.0)
            .chain((1..=n).map(|d| scores.order_priority(d) as f64))
            .collect()
    } else {
        vec![0.0; n + 1]
    };
    let arcs = if opts.order_on_raw {
        &scores.arc
    } else {
        &scores.arc_prob
    };
    let score = |head: usize, dep: usize| arcs[[head, dep]] + priorities[dep];

    while pending.len() > 1 {
        let nodes = pending.nodes();
        let mut best: Option<(f64, usize, ActionKind)> = None;
        for i in 0..nodes.len() - 1 {
            let (left, right) = (nodes[i], nodes[i + 1]);

            let s = score(left, right);
            stats.candidate_evaluations += 1;
            if best.is_none_or(|(b, _, _)| s > b) {
                best = Some((s, i, ActionKind::AttachLeft));
            }

            // The root is never a dependent.
            if left != 0 {
                let s = score(right, left);
                stats.candidate_evaluations += 1;
                if best.is_none_or(|(b, _, _)| s > b) {
                    best = Some((s, i, ActionKind::AttachRight));
                }
            }
        }

        let (s, i, kind) = best.expect("pending list has an adjacent pair");
        let (head, dep, position) = match kind {
            ActionKind::AttachLeft => (nodes[i], nodes[i + 1], i + 1),
            _ => (nodes[i + 1], nodes[i], i),
        };
        heads[dep - 1] = head;
        pending.remove_at(position);
        stats.attachments += 1;
        actions.push(Action {
            kind,
            head,
            dep,
            score: s,
        });
    }

    Decoding {
        tree: DepTree::unlabeled(heads),
        actions,
        stats,
    }
}

pub fn decode_nonprojective(scores: &ScoreSet) -> DepTree {
    decode_nonprojective_with(scores, &DecodeOptions::default()).tree
}

pub fn decode_nonprojective_with(scores: &ScoreSet, opts: &DecodeOptions) -> Decoding {
    let n = scores.n();
    let mut stats = DecodeStats::default();

    let priorities: Vec<usize> = if opts.use_order {
        scores.order_priorities()
    } else {
        vec![0; n]
    };
    let comparisons = Cell::new(0usize);
    let mut order: Vec<usize> = (1..=n).collect();
    order.sort_by(|&a, &b| {
        comparisons.set(comparisons.get() + 1);
        let by_layer = priorities[b - 1].cmp(&priorities[a - 1]);
        let by_confidence = if opts.order_tie_by_confidence && opts.use_order {
            scores
                .order_confidence(b)
                .partial_cmp(&scores.order_confidence(a))
                .unwrap_or(std::cmp::Ordering::Equal)
        } else {
            std::cmp::Ordering::Equal
        };
        by_layer.then(by_confidence).then(a.cmp(&b))
    });
    stats.sort_comparisons = comparisons.get();

    let arcs = if opts.order_on_raw {
        &scores.arc
    } else {
        &scores.arc_prob
    };
    let mut pending = PendingList::new(n);
    let mut heads = vec![0; n];
    let mut actions = Vec::with_capacity(n);
    for dep in order {
        let mut best: Option<(f64, usize)> = None;
        for &head in pending.nodes() {
            if head == dep {
                continue;
            }
            stats.candidate_evaluations += 1;
            let s = arcs[[head, dep]];
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, head));
            }
        }
        let (s, head) = best.expect("root is always pending");
        heads[dep - 1] = head;
        pending.remove_node(dep);
        stats.attachments += 1;
        actions.push(Action {
            kind: if head < dep {
                ActionKind::NpAttachLeft
            } else {
                ActionKind::NpAttachRight
            },
            head,
            dep,
            score: s,
        });
    }

    Decoding {
        tree: DepTree::unlabeled(heads),
        actions,
        stats,
    }
}

pub fn decode_mst(scores: &ScoreSet) -> DepTree {
    decode_mst_with(scores, &DecodeOptions::default()).tree
}

pub fn decode_mst_with(scores: &ScoreSet, opts: &DecodeOptions) -> Decoding {
    let weights = if opts.mst_on_prob {
        &scores.arc_prob
    } else {
        &scores.arc
    };
    let mut stats = DecodeStats::default();
    let heads = max_arborescence(weights, &mut stats);
    stats.attachments = heads.len();
    Decoding {
        tree: DepTree::unlabeled(heads),
        actions: Vec::new(),
        stats,
    }
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    weight: f64,
    src: usize,
    dst: usize,
}

/// Maximum spanning arborescence rooted at vertex 0 of a dense graph, where
/// `weights[[u, v]]` is the weight of edge `u -> v`.
///
/// Contraction with path growing (Tarjan; Camerini et al.): every vertex
/// searches for its best incoming edge once, cycles are contracted into
/// super-vertices whose incoming edge table is merged from the members, and
/// the contraction forest is expanded at the end. Each selection and merge
/// is linear in the number of vertices, giving O(n^2) overall.
///
/// Returns the head of every vertex `1..n`.
pub fn max_arborescence(weights: &Array2<f64>, stats: &mut DecodeStats) -> Vec<usize> {
    let size = weights.nrows();
    assert_eq!(size, weights.ncols(), "weight matrix must be square");
    if size <= 1 {
        return Vec::new();
    }

    // Super-vertices 0..size are the original vertices; contractions append.
    let mut incoming: Vec<Vec<Edge>> = Vec::with_capacity(2 * size);
    for v in 0..size {
        incoming.push(
            (0..size)
                .map(|u| Edge {
                    weight: if u == v || v == 0 {
                        f64::NEG_INFINITY
                    } else {
                        weights[[u, v]]
                    },
                    src: u,
                    dst: v,
                })
                .collect(),
        );
    }
    let mut owner: Vec<usize> = (0..size).collect();
    let mut members: Vec<Vec<usize>> = (0..size).map(|v| vec![v]).collect();
    let mut parent: Vec<Option<usize>> = vec![None; size];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); size];
    let mut enter: Vec<Option<Edge>> = vec![None; size];
    let mut done = vec![false; size];
    let mut on_path = vec![false; size];
    done[0] = true;

    for start in 1..size {
        if done[owner[start]] {
            continue;
        }
        let mut path = Vec::new();
        let mut current = owner[start];
        loop {
            on_path[current] = true;
            path.push(current);

            let mut best: Option<Edge> = None;
            for (u, edge) in incoming[current].iter().enumerate() {
                if owner[u] == current {
                    continue;
                }
                stats.candidate_evaluations += 1;
                if best.is_none_or(|b| edge.weight > b.weight) {
                    best = Some(*edge);
                }
            }
            let best = best.expect("vertex without candidate heads");
            enter[current] = Some(best);

            let source = owner[best.src];
            if done[source] {
                for &p in &path {
                    done[p] = true;
                    on_path[p] = false;
                }
                break;
            }
            if !on_path[source] {
                current = source;
                continue;
            }

            // Contract the cycle source -> ... -> current.
            stats.contractions += 1;
            let pos = path.iter().position(|&p| p == source).unwrap();
            let cycle = path.split_off(pos);
            let contracted = incoming.len();
            let mut merged: Vec<Edge> = (0..size)
                .map(|u| Edge {
                    weight: f64::NEG_INFINITY,
                    src: u,
                    dst: 0,
                })
                .collect();
            for &m in &cycle {
                let entering = enter[m].unwrap().weight;
                for (u, edge) in incoming[m].iter().enumerate() {
                    let adjusted = edge.weight - entering;
                    if adjusted > merged[u].weight {
                        merged[u] = Edge {
                            weight: adjusted,
                            ..*edge
                        };
                    }
                }
                on_path[m] = false;
                parent[m] = Some(contracted);
            }
            let contracted_members: Vec<usize> = cycle
                .iter()
                .flat_map(|&m| members[m].iter().copied())
                .collect();
            for &v in &contracted_members {
                owner[v] = contracted;
            }
            incoming.push(merged);
            members.push(contracted_members);
            parent.push(None);
            children.push(cycle);
            enter.push(None);
            done.push(false);
            on_path.push(false);
            current = contracted;
        }
    }

    // Expand: an entering edge of a top-level super-vertex fixes the head of
    // its original destination and breaks every cycle on the way down to it.
    let mut heads = vec![usize::MAX; size];
    let mut stack: Vec<usize> = (1..incoming.len())
        .filter(|&s| parent[s].is_none())
        .collect();
    while let Some(top) = stack.pop() {
        let edge = enter[top].unwrap();
        heads[edge.dst] = edge.src;
        let mut node = edge.dst;
        let mut below = None;
        loop {
            for &child in &children[node] {
                if Some(child) != below {
                    stack.push(child);
                }
            }
            if node == top {
                break;
            }
            below = Some(node);
            node = parent[node].unwrap();
        }
    }
    heads.remove(0);
    heads
}

/// Best label id for every attachment in `tree`, lowest id on ties.
pub fn label_ids(scores: &ScoreSet, tree: &DepTree) -> Result<Vec<usize>> {
    let label = scores
        .label
        .as_ref()
        .ok_or_else(|| Error::Argument("score set has no label scores".into()))?;
    if tree.len() != scores.n() {
        return Err(Error::Argument("tree and score set lengths differ".into()));
    }
    Ok((1..=tree.len())
        .map(|d| argmax(label.slice(ndarray::s![tree.head(d), d - 1, ..])))
        .collect())
}

/// Attach label names to a decoded tree.
pub fn assign_labels(scores: &ScoreSet, tree: &DepTree, names: &[String]) -> Result<DepTree> {
    if names.len() != scores.num_labels() {
        return Err(Error::Argument(format!(
            "{} label names for {} label classes",
            names.len(),
            scores.num_labels()
        )));
    }
    let ids = label_ids(scores, tree)?;
    Ok(DepTree {
        heads: tree.heads.clone(),
        labels: Some(ids.into_iter().map(|id| names[id].clone()).collect()),
    })
}

/// Sum of raw arc scores of a tree.
pub fn tree_score(weights: &Array2<f64>, heads: &[usize]) -> f64 {
    heads
        .iter()
        .enumerate()
        .map(|(i, &h)| weights[[h, i + 1]])
        .sum()
}
