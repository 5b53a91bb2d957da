//! Shape the embedding space with the contrastive objective.
//!
//! Mixes modern and ancient renderings of the same character set, trains
//! with the same/different-family pair loss, and reports how the mean
//! intra-family and inter-family embedding distances move.
//!
//! ```bash
//! cargo run --release --example contrastive_families
//! ```

use inscript::corpus::{merge, synth_corpus_family, Corpus, Family};
use inscript::glyphnet::{train, Glyphnet, TrainConfig};

fn family_distances(net: &Glyphnet, corpus: &Corpus) -> anyhow::Result<(f64, f64)> {
    let embeddings: Vec<(Family, Vec<f64>)> = corpus
        .examples
        .iter()
        .step_by(2)
        .map(|ex| {
            net.forward_block(&ex.block)
                .map(|fwd| (ex.family, fwd.embedding().to_vec()))
        })
        .collect::<Result<_, _>>()?;
    let (mut intra, mut inter) = ((0.0, 0usize), (0.0, 0usize));
    for (i, (fa, ea)) in embeddings.iter().enumerate() {
        for (fb, eb) in &embeddings[i + 1..] {
            let d = ea
                .iter()
                .zip(eb)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            if fa == fb {
                intra = (intra.0 + d, intra.1 + 1);
            } else {
                inter = (inter.0 + d, inter.1 + 1);
            }
        }
    }
    Ok((intra.0 / intra.1 as f64, inter.0 / inter.1 as f64))
}

fn main() -> anyhow::Result<()> {
    let modern = synth_corpus_family(5, 12, 41, Family::Modern);
    let ancient = synth_corpus_family(5, 12, 42, Family::Ancient);
    let corpus = merge(&modern, &ancient)?;
    println!(
        "mixed corpus: {} examples over {} classes, two families",
        corpus.len(),
        corpus.num_classes()
    );

    let config = TrainConfig::contrastive(1.0, 0.005, 6, 41);
    let before = Glyphnet::new(corpus.num_classes(), config.seed);
    let (intra0, inter0) = family_distances(&before, &corpus)?;
    println!("before training: intra {intra0:.3}  inter {inter0:.3}");

    let report = train(&corpus, &config)?;
    for (i, loss) in report.epoch_mean_loss.iter().enumerate() {
        println!("epoch {:>2}/{} mean pair loss {loss:.4}", i + 1, config.epochs);
    }

    let (intra1, inter1) = family_distances(&report.checkpoint.network, &corpus)?;
    println!("after training : intra {intra1:.3}  inter {inter1:.3}");
    println!(
        "separation ratio moved {:.2} -> {:.2}",
        inter0 / intra0.max(1e-9),
        inter1 / intra1.max(1e-9)
    );
    Ok(())
}
