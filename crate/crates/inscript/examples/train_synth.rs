//! Train the network on a synthetic glyph corpus and save a checkpoint.
//!
//! ```bash
//! cargo run --release --example train_synth
//! ```

use std::fs;
use std::path::PathBuf;

use inscript::corpus::{stratified_split, synth_corpus};
use inscript::glyphnet::{evaluate_accuracy, save_checkpoint, train, TrainConfig};
use inscript::recognize::build_prototypes;

fn main() -> anyhow::Result<()> {
    let out_dir = PathBuf::from("target/examples/train_synth");
    fs::create_dir_all(&out_dir)?;

    let corpus = synth_corpus(10, 40, 7);
    let (train_split, held) = stratified_split(&corpus, 0.2);
    println!(
        "corpus: {} classes, {} train / {} held out",
        corpus.num_classes(),
        train_split.len(),
        held.len()
    );

    let config = TrainConfig::softmax(0.02, 8, 7);
    let report = train(&train_split, &config)?;
    for (i, loss) in report.epoch_mean_loss.iter().enumerate() {
        println!("epoch {:>2}/{} mean loss {loss:.4}", i + 1, config.epochs);
    }

    let accuracy = evaluate_accuracy(&report.checkpoint.network, &held)?;
    println!("held-out accuracy: {:.1}%", 100.0 * accuracy);

    let ckpt = out_dir.join("model.ckpt");
    save_checkpoint(&report.checkpoint.network, &report.checkpoint.labels, &ckpt)?;
    let protos = build_prototypes(&report.checkpoint, &train_split)?;
    protos.save(&out_dir.join("model.ckpt.protos.json"))?;
    println!("checkpoint + prototypes written under {}", out_dir.display());
    Ok(())
}
