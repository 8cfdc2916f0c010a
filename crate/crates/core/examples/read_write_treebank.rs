//! Read a CoNLL-U file, print a summary, and write it back as CoNLL-X.
//!
//! Usage: `cargo run --example read_write_treebank [input.conllu] [output.conll]`

use ggparse::treebank::{read_conll, write_conll, Format};
use ggparse::{is_projective, DepTree};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let input = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/sample.conllu").into());
    let sentences = read_conll(&input, Format::Conllu)?;

    for s in &sentences {
        let tree = s.gold_tree();
        let forms: Vec<&str> = s.tokens.iter().map(|t| t.form.as_str()).collect();
        println!(
            "{:<4} {:>2} words  projective={:<5} {}",
            s.source_id,
            s.len(),
            is_projective(&tree),
            forms.join(" ")
        );
    }

    if let Some(output) = args.next() {
        let trees: Vec<DepTree> = sentences
            .iter()
            .map(|s| DepTree {
                heads: s.tokens.iter().map(|t| t.gold_head).collect(),
                labels: Some(s.tokens.iter().map(|t| t.gold_label.clone()).collect()),
            })
            .collect();
        write_conll(&sentences, &trees, &output, Format::Conllx)?;
        println!("wrote {} sentences to {}", sentences.len(), output);
    }
    Ok(())
}
