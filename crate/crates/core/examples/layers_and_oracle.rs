//! Tree layers and the oracle score sets built from them.

use ggparse::{compute_layers, oracle_scores, DepTree};

fn main() -> ggparse::Result<()> {
    let words = ["The", "test", "may", "come", "today", "."];
    let tree = DepTree::unlabeled(vec![2, 4, 4, 0, 4, 4]);
    let layers = compute_layers(&tree)?;
    let scores = oracle_scores(&tree)?;

    println!(
        "{:<6} {:>4} {:>5} {:>8}",
        "word", "head", "layer", "priority"
    );
    for (i, w) in words.iter().enumerate() {
        println!(
            "{:<6} {:>4} {:>5} {:>8}",
            w,
            tree.heads[i],
            layers.layers[i],
            scores.order_priority(i + 1)
        );
    }

    // A chain deeper than the cap: targets stop at 32.
    let chain = DepTree::unlabeled((0..40).collect());
    let deep = compute_layers(&chain)?;
    println!(
        "chain of 40: last layer {}, training target {}",
        deep.layers[39],
        deep.targets()[39]
    );
    Ok(())
}
