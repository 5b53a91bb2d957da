//! SGD training with softmax or contrastive objectives, plus transfer
//! learning from a pretrained checkpoint.

use rand::seq::SliceRandom;
use rand::Rng;

use super::checkpoint::ModelCheckpoint;
use super::net::{loss_contrastive, loss_softmax, Glyphnet, Gradients};
use super::tensor::Tensor;
use super::GlyphnetError;
use crate::corpus::Corpus;
use crate::seeds;

/// Training objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrainMode {
    /// Cross-entropy on the dense softmax head.
    Softmax,
    /// Distance shaping on the embedding: pull same-family pairs together,
    /// push different-family pairs apart up to `margin`. The dense head is
    /// untouched on this path.
    Contrastive { margin: f64 },
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Parameters update after every batch; the default of 1 updates after
    /// every iteration.
    pub batch_size: usize,
    pub seed: u64,
    /// Keep convolution parameters bit-identical to their initial values.
    pub freeze_conv: bool,
    /// Warm start. Matching class counts adopt all parameters; otherwise the
    /// conv stack transfers and the dense head is freshly initialized.
    pub pretrained: Option<ModelCheckpoint>,
}

impl TrainConfig {
    pub fn softmax(learning_rate: f64, epochs: usize, seed: u64) -> Self {
        Self {
            mode: TrainMode::Softmax,
            learning_rate,
            epochs,
            batch_size: 1,
            seed,
            freeze_conv: false,
            pretrained: None,
        }
    }

    pub fn contrastive(margin: f64, learning_rate: f64, epochs: usize, seed: u64) -> Self {
        Self {
            mode: TrainMode::Contrastive { margin },
            ..Self::softmax(learning_rate, epochs, seed)
        }
    }

    fn validate(&self) {
        assert!(self.learning_rate > 0.0, "learning rate must be positive");
        assert!(self.epochs >= 1, "needs at least one epoch");
        assert!(self.batch_size >= 1, "batch size must be >= 1");
        if let TrainMode::Contrastive { margin } = self.mode {
            assert!(margin > 0.0, "contrastive margin must be positive");
        }
    }
}

/// Trained model plus the per-epoch mean training loss.
#[derive(Clone, Debug)]
pub struct TrainReport {
    pub checkpoint: ModelCheckpoint,
    pub epoch_mean_loss: Vec<f64>,
}

/// Train a network on the corpus. Identical (corpus, config) pairs produce
/// byte-identical checkpoints.
pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<TrainReport, GlyphnetError> {
    config.validate();
    if corpus.is_empty() {
        return Err(GlyphnetError::EmptyCorpus);
    }
    let num_classes = corpus.num_classes();
    let mut net = Glyphnet::new(num_classes, config.seed);
    if let Some(pretrained) = &config.pretrained {
        if pretrained.num_classes() == num_classes {
            net = pretrained.network.clone();
        } else {
            net.copy_conv_from(&pretrained.network)?;
        }
    }

    let inputs: Vec<Tensor> = corpus
        .examples
        .iter()
        .map(|ex| Tensor::from_block(&ex.block))
        .collect();

    let epoch_mean_loss = match config.mode {
        TrainMode::Softmax => train_softmax(&mut net, corpus, &inputs, config)?,
        TrainMode::Contrastive { margin } => {
            train_contrastive(&mut net, corpus, &inputs, config, margin)?
        }
    };

    Ok(TrainReport {
        checkpoint: ModelCheckpoint::new(net, corpus.labels.clone()),
        epoch_mean_loss,
    })
}

fn train_softmax(
    net: &mut Glyphnet,
    corpus: &Corpus,
    inputs: &[Tensor],
    config: &TrainConfig,
) -> Result<Vec<f64>, GlyphnetError> {
    let n = inputs.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = seeds::stream("train-shuffle", &[config.seed]);
    let mut grads = Gradients::zeros_like(net);
    let mut losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            grads.reset();
            for &i in chunk {
                let target = corpus.examples[i].class_id;
                let fwd = net.forward(&inputs[i])?;
                total += loss_softmax(&fwd.probs, target)?;
                net.accumulate_softmax_gradients(&fwd, &inputs[i], target, &mut grads)?;
            }
            let step = config.learning_rate / chunk.len() as f64;
            net.apply_update(&grads, step, config.freeze_conv);
        }
        losses.push(total / n as f64);
    }
    Ok(losses)
}

fn train_contrastive(
    net: &mut Glyphnet,
    corpus: &Corpus,
    inputs: &[Tensor],
    config: &TrainConfig,
    margin: f64,
) -> Result<Vec<f64>, GlyphnetError> {
    let n = inputs.len();
    let mut pair_rng = seeds::stream("train-pairs", &[config.seed]);
    let mut grads = Gradients::zeros_like(net);
    let mut losses = Vec::with_capacity(config.epochs);
    // One "epoch" draws as many pairs as there are examples.
    let pairs_per_epoch = n;

    for _ in 0..config.epochs {
        let mut total = 0.0;
        let mut drawn = 0usize;
        while drawn < pairs_per_epoch {
            let batch = config.batch_size.min(pairs_per_epoch - drawn);
            grads.reset();
            for _ in 0..batch {
                let (a, b) = draw_pair(corpus, &mut pair_rng);
                let same = corpus.examples[a].family == corpus.examples[b].family;
                let fwd_a = net.forward(&inputs[a])?;
                let fwd_b = net.forward(&inputs[b])?;
                let ea = fwd_a.embedding();
                let eb = fwd_b.embedding();
                total += loss_contrastive(ea, eb, same, margin);

                let diff: Vec<f64> = ea.iter().zip(eb).map(|(x, y)| x - y).collect();
                let d = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
                let coeff = if same {
                    2.0
                } else if d > 0.0 && d < margin {
                    // d/d(ea) of (margin - d)^2 = -2 (margin - d) * diff / d
                    -2.0 * (margin - d) / d
                } else {
                    0.0
                };
                if coeff != 0.0 {
                    let dea: Vec<f64> = diff.iter().map(|v| coeff * v).collect();
                    let deb: Vec<f64> = diff.iter().map(|v| -coeff * v).collect();
                    net.accumulate_embedding_gradients(&fwd_a, &inputs[a], &dea, &mut grads);
                    net.accumulate_embedding_gradients(&fwd_b, &inputs[b], &deb, &mut grads);
                }
            }
            let step = config.learning_rate / batch as f64;
            net.apply_update(&grads, step, config.freeze_conv);
            drawn += batch;
        }
        losses.push(total / pairs_per_epoch as f64);
    }
    Ok(losses)
}

/// Draw a pair, aiming for 50% same-family. When the requested kind is not
/// available (single-family corpora, singleton families) the draw degrades
/// to whatever exists; the caller re-derives the actual relation.
fn draw_pair(corpus: &Corpus, rng: &mut rand_chacha::ChaCha8Rng) -> (usize, usize) {
    let n = corpus.examples.len();
    let want_same = rng.gen::<f64>() < 0.5;
    let a = rng.gen_range(0..n);
    let family = corpus.examples[a].family;
    let pool: Vec<usize> = (0..n)
        .filter(|&i| (corpus.examples[i].family == family) == want_same && i != a)
        .collect();
    if pool.is_empty() {
        return (a, rng.gen_range(0..n));
    }
    (a, pool[rng.gen_range(0..pool.len())])
}

/// Fraction of examples whose softmax argmax equals their label.
pub fn evaluate_accuracy(net: &Glyphnet, corpus: &Corpus) -> Result<f64, GlyphnetError> {
    if corpus.is_empty() {
        return Err(GlyphnetError::EmptyCorpus);
    }
    let mut hits = 0usize;
    for ex in &corpus.examples {
        let fwd = net.forward_block(&ex.block)?;
        if fwd.predicted_class() == ex.class_id {
            hits += 1;
        }
    }
    Ok(hits as f64 / corpus.examples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{merge, synth_corpus, synth_corpus_family, Family};
    use crate::glyphnet::checkpoint::checkpoint_to_bytes;

    #[test]
    fn empty_corpus_is_rejected() {
        let mut corpus = synth_corpus(2, 1, 0);
        corpus.examples.clear();
        let err = train(&corpus, &TrainConfig::softmax(0.01, 1, 0)).unwrap_err();
        assert!(matches!(err, GlyphnetError::EmptyCorpus));
    }

    #[test]
    fn softmax_loss_decreases_over_training() {
        let corpus = synth_corpus(4, 30, 21);
        let report = train(&corpus, &TrainConfig::softmax(0.01, 10, 21)).unwrap();
        let first = report.epoch_mean_loss.first().unwrap();
        let last = report.epoch_mean_loss.last().unwrap();
        assert!(
            last < first,
            "loss should fall: first {first}, last {last}"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = synth_corpus(3, 6, 9);
        let config = TrainConfig::softmax(0.02, 2, 9);
        let a = train(&corpus, &config).unwrap();
        let b = train(&corpus, &config).unwrap();
        assert_eq!(
            checkpoint_to_bytes(&a.checkpoint.network, &a.checkpoint.labels),
            checkpoint_to_bytes(&b.checkpoint.network, &b.checkpoint.labels)
        );
        assert_eq!(a.epoch_mean_loss, b.epoch_mean_loss);
    }

    #[test]
    fn freeze_conv_keeps_conv_bytes() {
        let corpus = synth_corpus(3, 8, 4);
        let pretrained = train(&corpus, &TrainConfig::softmax(0.02, 2, 4))
            .unwrap()
            .checkpoint;
        let frozen = TrainConfig {
            freeze_conv: true,
            pretrained: Some(pretrained.clone()),
            ..TrainConfig::softmax(0.02, 3, 4)
        };
        let tuned = train(&corpus, &frozen).unwrap().checkpoint;
        assert_eq!(tuned.network.conv1, pretrained.network.conv1);
        assert_eq!(tuned.network.conv2, pretrained.network.conv2);
        assert_ne!(
            tuned.network.dense.weights, pretrained.network.dense.weights,
            "dense head should keep training"
        );
    }

    #[test]
    fn transfer_reinitializes_dense_on_class_mismatch() {
        let pretrain_corpus = synth_corpus(6, 4, 2);
        let pretrained = train(&pretrain_corpus, &TrainConfig::softmax(0.02, 1, 2))
            .unwrap()
            .checkpoint;
        let target = synth_corpus(4, 4, 3);
        let config = TrainConfig {
            pretrained: Some(pretrained),
            freeze_conv: true,
            ..TrainConfig::softmax(0.02, 1, 3)
        };
        let tuned = train(&target, &config).unwrap().checkpoint;
        assert_eq!(tuned.num_classes(), 4);
    }

    #[test]
    fn contrastive_training_separates_families() {
        let modern = synth_corpus_family(3, 10, 31, Family::Modern);
        let ancient = synth_corpus_family(3, 10, 32, Family::Ancient);
        let corpus = merge(&modern, &ancient).unwrap();
        let report = train(&corpus, &TrainConfig::contrastive(1.0, 0.005, 4, 31)).unwrap();
        assert!(
            report.epoch_mean_loss.last().unwrap() < report.epoch_mean_loss.first().unwrap(),
            "pair loss should fall: {:?}",
            report.epoch_mean_loss
        );

        // Mean intra-family distance should end below inter-family distance.
        let net = &report.checkpoint.network;
        let embed = |ex: &crate::corpus::LabeledExample| {
            net.forward_block(&ex.block).unwrap().embedding().to_vec()
        };
        let sample: Vec<_> = corpus.examples.iter().step_by(3).collect();
        let (mut intra, mut inter, mut n_intra, mut n_inter) = (0.0, 0.0, 0usize, 0usize);
        for (i, a) in sample.iter().enumerate() {
            for b in &sample[i + 1..] {
                let (ea, eb) = (embed(a), embed(b));
                let d = ea
                    .iter()
                    .zip(&eb)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if a.family == b.family {
                    intra += d;
                    n_intra += 1;
                } else {
                    inter += d;
                    n_inter += 1;
                }
            }
        }
        let (intra, inter) = (intra / n_intra as f64, inter / n_inter as f64);
        assert!(
            intra < inter,
            "intra-family distance {intra} should undercut inter-family {inter}"
        );
    }
}
