//! Operation counts of the decoders as sentences grow.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ggparse::decoder::{decode, DecodeOptions, DecoderKind};
use ggparse::synthetic::random_scores;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = DecodeOptions::default();
    println!(
        "{:>5} {:>12} {:>12} {:>12} {:>12} {:>9}",
        "n", "proj cand", "cand / n^2", "np sorts", "sorts/nlogn", "mst cand"
    );
    for n in [10, 20, 40, 80, 160, 320, 640] {
        let scores = random_scores(n, 0, &mut rng);
        let p = decode(&scores, DecoderKind::GreedyProjective, &opts).stats;
        let q = decode(&scores, DecoderKind::GreedyNonProjective, &opts).stats;
        let m = decode(&scores, DecoderKind::Mst, &opts).stats;
        let nlogn = n as f64 * (n as f64).log2();
        println!(
            "{:>5} {:>12} {:>12.3} {:>12} {:>12.3} {:>9}",
            n,
            p.candidate_evaluations,
            p.candidate_evaluations as f64 / (n * n) as f64,
            q.sort_comparisons,
            q.sort_comparisons as f64 / nlogn,
            m.candidate_evaluations
        );
    }
}
