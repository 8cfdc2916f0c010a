use ggparse::config::Config;
use ggparse::synthetic::synthetic_treebank;
use ggparse::training::{gradients, step, OptimizerState};
use ggparse::treebank::build_vocab;
use ggparse::Model;

#[test]
fn loss_falls_over_the_first_steps() {
    let batch = synthetic_treebank(8, 11);
    let config = Config {
        learning_rate: 1e-3,
        min_word_freq: 1,
        ..Config::default()
    };
    let vocab = build_vocab(&batch, config.min_word_freq).unwrap();
    let mut model = Model::new(&config, vocab, None).unwrap();
    let mut opt = OptimizerState::new(&config, &model.params);
    let mut losses = Vec::new();
    for _ in 0..11 {
        let (loss, grads) = gradients(&model, &batch).unwrap();
        assert!(loss.is_finite());
        losses.push(loss.total());
        step(&mut opt, &mut model, &grads).unwrap();
    }
    let increases = losses.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(increases <= 1, "{:?}", losses);
    assert!(losses[10] < losses[0]);
}

#[test]
fn step_rejects_foreign_gradients() {
    let batch = synthetic_treebank(4, 1);
    let vocab = build_vocab(&batch, 1).unwrap();
    let mut model = Model::new(&Config::tiny(), vocab.clone(), None).unwrap();
    let other = Model::new(&Config::default(), vocab, None).unwrap();
    let mut opt = OptimizerState::new(&Config::tiny(), &model.params);
    let (_, grads) = gradients(&other, &batch).unwrap();
    assert!(step(&mut opt, &mut model, &grads).is_err());
}
