//! Step through the projective greedy decoder with and without order offsets.

use ggparse::decoder::{decode_projective_with, DecodeOptions, Decoding};
use ggparse::{oracle_scores, DepTree};

const WORDS: [&str; 7] = ["ROOT", "The", "test", "may", "come", "today", "."];

fn show(title: &str, d: &Decoding) {
    println!("{}", title);
    for (k, a) in d.actions.iter().enumerate() {
        println!(
            "  {:>2}. {:?}: {} -> {}  (score {:.2})",
            k + 1,
            a.kind,
            WORDS[a.head],
            WORDS[a.dep],
            a.score
        );
    }
    println!(
        "  heads {:?}, {} candidate evaluations\n",
        d.tree.heads, d.stats.candidate_evaluations
    );
}

fn main() -> ggparse::Result<()> {
    let gold = DepTree::unlabeled(vec![2, 4, 4, 0, 4, 4]);
    let scores = oracle_scores(&gold)?;

    let arc_only = decode_projective_with(&scores, &DecodeOptions::arc_only());
    show("arc scores only", &arc_only);

    let full = decode_projective_with(&scores, &DecodeOptions::default());
    show("arc probability plus predicted layer", &full);

    println!(
        "gold recovered: arc only {}, with order {}",
        arc_only.tree == gold,
        full.tree == gold
    );
    Ok(())
}
