//! Write model-free score sets to the text interchange format and decode
//! them again after reading.

use ggparse::scores_io::{read_scores_from, write_scores_to};
use ggparse::synthetic::random_scores;
use ggparse::{decode_projective, oracle_scores, DepTree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ggparse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let items = vec![
        (
            "oracle".to_string(),
            oracle_scores(&DepTree::unlabeled(vec![2, 0, 2]))?,
        ),
        ("random".to_string(), random_scores(2, 2, &mut rng)),
    ];
    let mut text = Vec::new();
    write_scores_to(&mut text, &items)?;
    print!("{}", String::from_utf8_lossy(&text));

    for (id, scores) in read_scores_from(text.as_slice())? {
        println!("{}: heads {:?}", id, decode_projective(&scores).heads);
    }
    Ok(())
}
