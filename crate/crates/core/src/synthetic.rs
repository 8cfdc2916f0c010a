//! Generated data for tests, examples and benchmarks.

use ndarray::{Array2, Array3};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scores::{ScoreSet, ORDER_CLASSES};
use crate::tree::DepTree;
use crate::treebank::{Sentence, Token};

const DETS: &[&str] = &["the", "a", "every", "some"];
const ADJS: &[&str] = &["old", "red", "quiet", "tall", "young", "bright"];
const NOUNS: &[&str] = &[
    "dog", "cat", "farmer", "river", "house", "teacher", "garden", "letter", "city", "child",
];
const VERBS: &[&str] = &[
    "sees", "finds", "likes", "paints", "visits", "sleeps", "writes",
];
const ADPS: &[&str] = &["near", "with", "behind", "under"];
const ADVS: &[&str] = &["often", "slowly", "today"];

struct Builder {
    tokens: Vec<(String, &'static str, usize, &'static str)>,
}

impl Builder {
    fn push(&mut self, form: &str, upos: &'static str, label: &'static str) -> usize {
        self.tokens.push((form.to_owned(), upos, usize::MAX, label));
        self.tokens.len()
    }

    fn attach(&mut self, dep: usize, head: usize) {
        self.tokens[dep - 1].2 = head;
    }

    fn pick(rng: &mut impl Rng, words: &[&str]) -> String {
        words.choose(rng).unwrap().to_string()
    }

    /// Noun phrase; returns the noun. Prepositional modifiers nest up to `depth`.
    fn noun_phrase(&mut self, rng: &mut impl Rng, depth: usize) -> usize {
        let det = rng
            .random_bool(0.8)
            .then(|| self.push(&Self::pick(rng, DETS), "DET", "det"));
        let mut adjs = Vec::new();
        while adjs.len() < 2 && rng.random_bool(0.35) {
            adjs.push(self.push(&Self::pick(rng, ADJS), "ADJ", "amod"));
        }
        let noun = self.push(&Self::pick(rng, NOUNS), "NOUN", "nmod");
        for d in det.into_iter().chain(adjs) {
            self.attach(d, noun);
        }
        if depth > 0 && rng.random_bool(0.3) {
            let pp = self.prep_phrase(rng, depth - 1);
            self.attach(pp, noun);
        }
        noun
    }

    /// Prepositional phrase; returns its noun, with the adposition attached to it.
    fn prep_phrase(&mut self, rng: &mut impl Rng, depth: usize) -> usize {
        let adp = self.push(&Self::pick(rng, ADPS), "ADP", "case");
        let noun = self.noun_phrase(rng, depth);
        self.attach(adp, noun);
        noun
    }
}

/// A projective toy treebank: subject, verb, optional object, prepositional
/// and adverbial modifiers, final punctuation. Same seed, same corpus.
pub fn synthetic_treebank(count: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let rng = &mut rng;
            let mut b = Builder { tokens: Vec::new() };
            let subj = b.noun_phrase(rng, 1);
            b.tokens[subj - 1].3 = "nsubj";
            let adv_before = rng
                .random_bool(0.2)
                .then(|| b.push(&Builder::pick(rng, ADVS), "ADV", "advmod"));
            let verb = b.push(&Builder::pick(rng, VERBS), "VERB", "root");
            b.attach(subj, verb);
            b.attach(verb, 0);
            if let Some(a) = adv_before {
                b.attach(a, verb);
            }
            if rng.random_bool(0.7) {
                let obj = b.noun_phrase(rng, 1);
                b.tokens[obj - 1].3 = "obj";
                b.attach(obj, verb);
            }
            if rng.random_bool(0.4) {
                let obl = b.prep_phrase(rng, 1);
                b.tokens[obl - 1].3 = "obl";
                b.attach(obl, verb);
            }
            if rng.random_bool(0.3) {
                let adv = b.push(&Builder::pick(rng, ADVS), "ADV", "advmod");
                b.attach(adv, verb);
            }
            let punct = b.push(".", "PUNCT", "punct");
            b.attach(punct, verb);

            let tokens = b
                .tokens
                .iter()
                .enumerate()
                .map(|(k, (form, upos, head, label))| {
                    let xpos = if *upos == "PUNCT" { "." } else { upos };
                    Token::new(k + 1, form, upos, *head, label).with_xpos(xpos)
                })
                .collect();
            Sentence::new(format!("syn-{}", i + 1), tokens)
        })
        .collect()
}

/// Random tree over `n` words, crossing arcs allowed. Words are attached in a
/// random order to a uniformly chosen node that is already in the tree.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> DepTree {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut placed = vec![0];
    let mut heads = vec![0; n];
    for w in order {
        heads[w - 1] = *placed.choose(rng).unwrap();
        placed.push(w);
    }
    DepTree::unlabeled(heads)
}

/// Random projective tree over `n` words.
pub fn random_projective_tree(n: usize, rng: &mut impl Rng) -> DepTree {
    let mut heads = vec![0; n];
    if n > 0 {
        attach_span(1, n, 0, &mut heads, rng);
    }
    DepTree::unlabeled(heads)
}

/// Split `lo..=hi` into consecutive chunks, each a subtree under `parent`.
fn attach_span(lo: usize, hi: usize, parent: usize, heads: &mut [usize], rng: &mut impl Rng) {
    let mut start = lo;
    while start <= hi {
        let mut end = start;
        while end < hi && rng.random_bool(0.6) {
            end += 1;
        }
        let head = rng.random_range(start..=end);
        heads[head - 1] = parent;
        if head > start {
            attach_span(start, head - 1, head, heads, rng);
        }
        if head < end {
            attach_span(head + 1, end, head, heads, rng);
        }
        start = end + 1;
    }
}

/// Random scores for `n` words. Values are drawn on a coarse grid so that
/// ties occur.
pub fn random_scores(n: usize, num_labels: usize, rng: &mut impl Rng) -> ScoreSet {
    let mut grid = |scale: f64| (rng.random_range(-8i32..=8) as f64) * scale;
    let arc = Array2::from_shape_simple_fn((n + 1, n + 1), || grid(0.5));
    let order = Array2::from_shape_simple_fn((n, ORDER_CLASSES), || grid(0.25));
    let label = (num_labels > 0)
        .then(|| Array3::from_shape_simple_fn((n + 1, n, num_labels), || grid(0.5)));
    ScoreSet::from_raw(arc, order, label).expect("shapes are consistent")
}

/// Random scores with continuous values, for tests that need a unique optimum.
pub fn random_scores_continuous(n: usize, rng: &mut impl Rng) -> ScoreSet {
    let arc = Array2::from_shape_simple_fn((n + 1, n + 1), || rng.random_range(-4.0..4.0));
    let order = Array2::from_shape_simple_fn((n, ORDER_CLASSES), || rng.random_range(-2.0..2.0));
    ScoreSet::from_raw(arc, order, None).expect("shapes are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{is_projective, validate_tree};

    #[test]
    fn treebank_is_valid_projective_and_deterministic() {
        let a = synthetic_treebank(50, 3);
        assert_eq!(a, synthetic_treebank(50, 3));
        for s in &a {
            let t = s.gold_tree();
            assert_eq!(validate_tree(&t.heads), Ok(()), "{}", s.source_id);
            assert!(is_projective(&t));
            assert_eq!(t.heads.iter().filter(|&&h| h == 0).count(), 1);
        }
        assert!(a.iter().any(|s| s.len() > 8));
    }

    #[test]
    fn random_trees_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut crossing = 0;
        for n in 1..30 {
            let t = random_tree(n, &mut rng);
            assert_eq!(validate_tree(&t.heads), Ok(()));
            if !is_projective(&t) {
                crossing += 1;
            }
            let p = random_projective_tree(n, &mut rng);
            assert_eq!(validate_tree(&p.heads), Ok(()));
            assert!(is_projective(&p));
        }
        assert!(crossing > 0);
    }
}
