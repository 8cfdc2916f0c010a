//! Attachment scores and order accuracy of a corrupted copy of the sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ggparse::evaluation::ReportFormat;
use ggparse::treebank::{read_conll, Convention, Format};
use ggparse::{attachment_scores, validate_tree, DepTree};

fn main() -> ggparse::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/sample.conllx");
    let gold = read_conll(path, Format::Conllx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // Move about a fifth of the heads, keeping each prediction a tree.
    let pred: Vec<DepTree> = gold
        .iter()
        .map(|s| {
            let mut heads: Vec<usize> = s.tokens.iter().map(|t| t.gold_head).collect();
            for i in 0..heads.len() {
                if rng.random_bool(0.2) {
                    let h = rng.random_range(0..=heads.len());
                    let old = heads[i];
                    heads[i] = h;
                    if validate_tree(&heads).is_err() {
                        heads[i] = old;
                    }
                }
            }
            DepTree {
                heads,
                labels: Some(s.tokens.iter().map(|t| t.gold_label.clone()).collect()),
            }
        })
        .collect();

    for convention in [Convention::Ud, Convention::Ptb] {
        let report = attachment_scores(&gold, &pred, convention)?;
        println!("{}", report.render(ReportFormat::Table));
    }
    Ok(())
}
