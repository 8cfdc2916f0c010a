//! Compare the MST decoder against brute force on small random score sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ggparse::decoder::{decode_mst, tree_score};
use ggparse::enumerate_arborescences;
use ggparse::synthetic::random_scores_continuous;

fn main() -> ggparse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=6 {
        let scores = random_scores_continuous(n, &mut rng);
        let mst = decode_mst(&scores);
        let mut best = f64::NEG_INFINITY;
        let mut count = 0;
        for heads in enumerate_arborescences(n)? {
            best = best.max(tree_score(&scores.arc, &heads));
            count += 1;
        }
        println!(
            "n={} trees={:>6} mst={:>8.4} brute force={:>8.4} heads={:?}",
            n,
            count,
            tree_score(&scores.arc, &mst.heads),
            best,
            mst.heads
        );
    }
    Ok(())
}
