//! Decode a sentence with a crossing arc.

use ggparse::decoder::{decode, DecodeOptions, DecoderKind};
use ggparse::{is_projective, oracle_scores, DepTree};

fn main() -> ggparse::Result<()> {
    // A hearing is scheduled on the issue today .
    let words = [
        "ROOT",
        "A",
        "hearing",
        "is",
        "scheduled",
        "on",
        "the",
        "issue",
        "today",
        ".",
    ];
    let gold = DepTree::unlabeled(vec![2, 4, 4, 0, 7, 7, 2, 4, 4]);
    println!("gold projective: {}", is_projective(&gold));

    let scores = oracle_scores(&gold)?;
    for kind in DecoderKind::ALL {
        let d = decode(&scores, kind, &DecodeOptions::default());
        println!(
            "{:<22} correct={:<5} heads={:?} comparisons={} candidates={}",
            kind.to_string(),
            d.tree == gold,
            d.tree.heads,
            d.stats.sort_comparisons,
            d.stats.candidate_evaluations
        );
    }

    let d = decode(
        &scores,
        DecoderKind::GreedyNonProjective,
        &DecodeOptions::default(),
    );
    println!("\nnon-projective attachment order:");
    for a in &d.actions {
        println!("  {} <- {}", words[a.head], words[a.dep]);
    }
    Ok(())
}
