//! Transfer learning: pretrain on the modern family, fine-tune on ancient
//! crops with the convolution stack frozen.
//!
//! ```bash
//! cargo run --release --example transfer_freeze
//! ```

use inscript::corpus::{stratified_split, synth_corpus_family, Family};
use inscript::glyphnet::{evaluate_accuracy, train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let modern = synth_corpus_family(8, 30, 100, Family::Modern);
    println!("pretraining on {} modern examples", modern.len());
    let pretrained = train(&modern, &TrainConfig::softmax(0.02, 8, 100))?.checkpoint;

    let ancient = synth_corpus_family(8, 24, 200, Family::Ancient);
    let (tune, held) = stratified_split(&ancient, 0.2);
    let zero_shot = evaluate_accuracy(&pretrained.network, &held)?;
    println!("zero-shot on ancient held-out: {:.1}%", 100.0 * zero_shot);

    // Fine-tune at a gentler rate than pretraining: the warm-started head
    // only needs small corrections for the eroded strokes.
    let config = TrainConfig {
        freeze_conv: true,
        pretrained: Some(pretrained.clone()),
        ..TrainConfig::softmax(0.005, 6, 300)
    };
    let tuned = train(&tune, &config)?.checkpoint;
    assert_eq!(
        tuned.network.conv1, pretrained.network.conv1,
        "frozen conv parameters must not move"
    );

    let tuned_accuracy = evaluate_accuracy(&tuned.network, &held)?;
    println!("fine-tuned on ancient held-out: {:.1}%", 100.0 * tuned_accuracy);
    println!(
        "improvement: {:+.1} points with conv layers bit-identical",
        100.0 * (tuned_accuracy - zero_shot)
    );
    Ok(())
}
