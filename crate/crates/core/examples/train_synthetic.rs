//! Train on a generated treebank and report training-set accuracy.

use ggparse::config::Config;
use ggparse::decoder::DecoderKind;
use ggparse::evaluation::evaluate_model;
use ggparse::synthetic::synthetic_treebank;
use ggparse::training::train_with;
use ggparse::treebank::Convention;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs: usize = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(30);
    let sentences = synthetic_treebank(50, 7);
    let config = Config {
        max_epochs: epochs,
        batch_size: 2,
        min_word_freq: 1,
        ..Config::default()
    };
    let outcome = train_with(&config, &sentences, &sentences, |e| {
        println!("{} ({:.2}s)", e.line(), e.seconds)
    })?;
    let report = evaluate_model(
        &outcome.model,
        &sentences,
        DecoderKind::GreedyProjective,
        &config.decode_options(),
        Convention::Ud,
    )?;
    println!("best epoch {}", outcome.best_epoch);
    print!("{}", report.to_table());
    Ok(())
}
