//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture`
//! to see them all).

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::time::Duration;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use inscript::binarize::{histogram, otsu_threshold, Histogram256};
use inscript::corpus::{stratified_split, synth_corpus, synth_corpus_family, Family};
use inscript::evalkit::combined_efficiency;
use inscript::glyphnet::{
    checkpoint_to_bytes, load_checkpoint, loss_contrastive, loss_softmax, save_checkpoint,
    evaluate_accuracy, train, Glyphnet, Tensor, TrainConfig,
};
use inscript::raster::{decode_image, encode_pgm, GrayImage};
use inscript::recognize::{
    build_prototypes, classify_block, run_pipeline, EngineBridge, PipelineOptions,
};
use inscript::segment::{assemble_tile, slice, GridSpec};
use inscript::{BinaryImage, Decoded};

fn criterion<F: FnOnce() + UnwindSafe>(id: u32, name: &str, body: F) {
    match catch_unwind(body) {
        Ok(()) => println!("acceptance {id:02} {name}: PASS"),
        Err(cause) => {
            println!("acceptance {id:02} {name}: FAIL");
            resume_unwind(cause);
        }
    }
}

fn seeded_pixels(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<u8>()).collect()
}

// ---------------------------------------------------------------------------
// 1. Reported-arithmetic reproduction
// ---------------------------------------------------------------------------

#[test]
fn c01_combined_efficiency_arithmetic() {
    criterion(1, "combined efficiency over the six reference samples", || {
        let combined =
            combined_efficiency(&[79.1, 79.7, 81.3, 75.0, 71.1, 80.0]).unwrap();
        assert_eq!(combined, 77.7, "expected exactly 77.7, got {combined}");
    });
}

// ---------------------------------------------------------------------------
// 2. Otsu oracle equivalence
// ---------------------------------------------------------------------------

/// Brute-force threshold sweep recomputing class variances directly from the
/// raw pixel list; independent of the cumulative-moment implementation.
fn otsu_oracle(pixels: &[u8]) -> (u8, f64) {
    let total = pixels.len() as f64;
    let spread = |class: &[f64]| -> f64 {
        if class.is_empty() {
            return 0.0;
        }
        let mean = class.iter().sum::<f64>() / class.len() as f64;
        let var =
            class.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / class.len() as f64;
        (class.len() as f64 / total) * var
    };
    let mut best = (0u8, f64::INFINITY);
    let mut best_between = (0u8, f64::NEG_INFINITY);
    let grand_mean = pixels.iter().map(|&p| f64::from(p)).sum::<f64>() / total;
    for t in 0..=255u16 {
        let bg: Vec<f64> = pixels
            .iter()
            .filter(|&&p| u16::from(p) <= t)
            .map(|&p| f64::from(p))
            .collect();
        let fg: Vec<f64> = pixels
            .iter()
            .filter(|&&p| u16::from(p) > t)
            .map(|&p| f64::from(p))
            .collect();
        let within = spread(&bg) + spread(&fg);
        if within < best.1 {
            best = (t as u8, within);
        }
        // Between-class variance, to confirm both objectives agree.
        let mean_of = |class: &[f64]| {
            if class.is_empty() {
                0.0
            } else {
                class.iter().sum::<f64>() / class.len() as f64
            }
        };
        let (wb, wf) = (bg.len() as f64 / total, fg.len() as f64 / total);
        let between = wb * (mean_of(&bg) - grand_mean).powi(2)
            + wf * (mean_of(&fg) - grand_mean).powi(2);
        if between > best_between.1 {
            best_between = (t as u8, between);
        }
    }
    assert_eq!(
        best.0, best_between.0,
        "within-class minimum and between-class maximum disagree"
    );
    best
}

fn pixels_of(hist: &Histogram256) -> Vec<u8> {
    let mut pixels = Vec::new();
    for (value, &count) in hist.counts().iter().enumerate() {
        for _ in 0..count {
            pixels.push(value as u8);
        }
    }
    pixels
}

#[test]
fn c02_otsu_matches_brute_force_oracle() {
    criterion(2, "Otsu equals the exhaustive 256-candidate oracle", || {
        // 100 seeded random 16x16 images.
        for seed in 0..100u64 {
            let pixels = seeded_pixels(256, 0x07_5u64 << 32 | seed);
            let img = GrayImage::new(16, 16, pixels.clone());
            let got = otsu_threshold(&histogram(&img)).unwrap();
            let (want_t, want_sigma) = otsu_oracle(&pixels);
            assert_eq!(got.threshold, want_t, "threshold drifted on seed {seed}");
            let rel = (got.within_class_variance - want_sigma).abs()
                / want_sigma.abs().max(1.0);
            assert!(rel < 1e-9, "objective drifted {rel} on seed {seed}");
        }

        // 10 adversarial histograms: single-bin, two-bin, uniform shapes.
        let mut adversarial: Vec<Histogram256> = Vec::new();
        for bin in [0usize, 128, 255] {
            let mut counts = [0u64; 256];
            counts[bin] = 64;
            adversarial.push(Histogram256::from_counts(counts));
        }
        for (a, b, na, nb) in [
            (0usize, 255usize, 8u64, 8u64),
            (0, 255, 1, 63),
            (10, 200, 48, 16),
            (100, 101, 32, 32),
            (254, 255, 7, 9),
        ] {
            let mut counts = [0u64; 256];
            counts[a] = na;
            counts[b] = nb;
            adversarial.push(Histogram256::from_counts(counts));
        }
        adversarial.push(Histogram256::from_counts([3u64; 256]));
        let mut ramp = [0u64; 256];
        for (v, slot) in ramp.iter_mut().enumerate() {
            *slot = v as u64 % 7;
        }
        adversarial.push(Histogram256::from_counts(ramp));
        assert_eq!(adversarial.len(), 10);

        for (i, hist) in adversarial.iter().enumerate() {
            let got = otsu_threshold(hist).unwrap();
            let pixels = pixels_of(hist);
            let distinct = hist.counts().iter().filter(|&&c| c > 0).count();
            if distinct == 1 {
                // Single-bin convention: that bin value, flagged degenerate.
                let bin = hist.counts().iter().position(|&c| c > 0).unwrap() as u8;
                assert!(got.degenerate);
                assert_eq!(got.threshold, bin);
                assert_eq!(got.within_class_variance, 0.0);
            } else {
                let (want_t, want_sigma) = otsu_oracle(&pixels);
                assert_eq!(got.threshold, want_t, "adversarial case {i}");
                let rel = (got.within_class_variance - want_sigma).abs()
                    / want_sigma.abs().max(1.0);
                assert!(rel < 1e-9, "adversarial case {i}: drift {rel}");
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 3. Gradient correctness
// ---------------------------------------------------------------------------

fn param_len(net: &Glyphnet, slot: usize) -> usize {
    match slot {
        0 => net.conv1.weights.len(),
        1 => net.conv1.biases.len(),
        2 => net.conv2.weights.len(),
        3 => net.conv2.biases.len(),
        4 => net.dense.weights.len(),
        _ => net.dense.biases.len(),
    }
}

fn nudged(net: &Glyphnet, slot: usize, at: usize, delta: f64) -> Glyphnet {
    let mut copy = net.clone();
    let buf = match slot {
        0 => &mut copy.conv1.weights,
        1 => &mut copy.conv1.biases,
        2 => &mut copy.conv2.weights,
        3 => &mut copy.conv2.biases,
        4 => &mut copy.dense.weights,
        _ => &mut copy.dense.biases,
    };
    buf[at] += delta;
    copy
}

fn analytic_at(grads: &inscript::glyphnet::Gradients, slot: usize, at: usize) -> f64 {
    match slot {
        0 => grads.conv1_w[at],
        1 => grads.conv1_b[at],
        2 => grads.conv2_w[at],
        3 => grads.conv2_b[at],
        4 => grads.dense_w[at],
        _ => grads.dense_b[at],
    }
}

fn check_all_gradients(net: &Glyphnet, input: &Tensor, target: usize) -> (usize, f64) {
    let analytic = inscript::glyphnet::gradients(net, input, target).unwrap();
    let loss = |n: &Glyphnet| loss_softmax(&n.forward(input).unwrap().probs, target).unwrap();
    let h = 1e-5;
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    for slot in 0..6 {
        for at in 0..param_len(net, slot) {
            let numeric =
                (loss(&nudged(net, slot, at, h)) - loss(&nudged(net, slot, at, -h))) / (2.0 * h);
            let a = analytic_at(&analytic, slot, at);
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (checked, worst)
}

#[test]
fn c03_gradients_match_finite_differences() {
    criterion(3, "analytic gradients match central differences", || {
        // Reduced 8x8 full net: conv5 -> pool -> conv1x1 -> pool -> dense.
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        let small = Glyphnet::with_geometry((1, 8, 8), 4, 5, 8, 1, 5, 88).unwrap();
        let input8 = Tensor::from_vec(
            &[1, 8, 8],
            (0..64).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        );
        let (n1, worst1) = check_all_gradients(&small, &input8, 3);

        // A second variant with non-trivial kernels on both conv layers, so
        // every layer type sees a general-shape finite-difference check.
        let tiny = Glyphnet::with_geometry((1, 13, 13), 2, 2, 3, 3, 4, 13).unwrap();
        let input13 = Tensor::from_vec(
            &[1, 13, 13],
            (0..169).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        );
        let (n2, worst2) = check_all_gradients(&tiny, &input13, 1);

        let checked = n1 + n2;
        let worst = worst1.max(worst2);
        assert!(checked >= 200, "only {checked} parameters checked");
        assert!(worst < 1e-4, "worst relative error {worst} over {checked} params");
    });
}

// ---------------------------------------------------------------------------
// 4. Architecture invariant
// ---------------------------------------------------------------------------

#[test]
fn c04_architecture_shape_trace() {
    criterion(4, "28x28 input traces through (32,4,4) to 512", || {
        let net = Glyphnet::new(7, 4);
        let input = Tensor::from_vec(
            &[1, 28, 28],
            seeded_pixels(784, 9).iter().map(|&p| f64::from(p) / 255.0).collect(),
        );
        let fwd = net.forward(&input).unwrap();
        assert_eq!(fwd.conv1_pre.shape(), &[16, 24, 24]);
        assert_eq!(fwd.pool1.shape(), &[16, 12, 12]);
        assert_eq!(fwd.conv2_pre.shape(), &[32, 8, 8]);
        assert_eq!(fwd.pool2.shape(), &[32, 4, 4]);
        assert_eq!(fwd.embedding().len(), 512);
        assert_eq!(fwd.logits.len(), 7);
        let sum: f64 = fwd.probs.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    });
}

// ---------------------------------------------------------------------------
// 5. Desk-scale end-to-end learning
// ---------------------------------------------------------------------------

#[test]
fn c05_desk_scale_learning() {
    criterion(5, "synthetic 20-class corpus reaches 95% held-out", || {
        let corpus = synth_corpus(20, 50, 42);
        let (train_split, held) = stratified_split(&corpus, 0.2);
        assert_eq!(held.len(), 200);
        let config = TrainConfig::softmax(0.02, 12, 42);
        assert!(config.epochs <= 15);
        let report = train(&train_split, &config).unwrap();
        let net = &report.checkpoint.network;

        let accuracy = evaluate_accuracy(net, &held).unwrap();
        assert!(
            accuracy >= 0.95,
            "held-out softmax accuracy {accuracy} below 0.95"
        );

        // Nearest-prototype agreement with the softmax head on the same split.
        let prototypes = build_prototypes(&report.checkpoint, &train_split).unwrap();
        let mut agree = 0usize;
        for ex in &held.examples {
            let softmax_class = net.forward_block(&ex.block).unwrap().predicted_class();
            let proto_class = classify_block(&report.checkpoint, &prototypes, &ex.block)
                .unwrap()
                .class_id;
            if softmax_class == proto_class {
                agree += 1;
            }
        }
        let agreement = agree as f64 / held.len() as f64;
        assert!(
            agreement >= 0.90,
            "prototype/softmax agreement {agreement} below 0.90"
        );
    });
}

// ---------------------------------------------------------------------------
// 6. Transfer-learning contract
// ---------------------------------------------------------------------------

#[test]
fn c06_transfer_learning_contract() {
    criterion(6, "frozen-conv fine-tune beats zero-shot on the target family", || {
        let modern = synth_corpus_family(12, 40, 1001, Family::Modern);
        let pretrained = train(&modern, &TrainConfig::softmax(0.02, 10, 1001))
            .unwrap()
            .checkpoint;

        let ancient = synth_corpus_family(12, 30, 2002, Family::Ancient);
        let (tune_split, held) = stratified_split(&ancient, 0.2);
        let zero_shot = evaluate_accuracy(&pretrained.network, &held).unwrap();

        // Gentler rate for the warm-started head; batch-1 SGD at the
        // pretraining rate can thrash a head that is already close.
        let config = TrainConfig {
            freeze_conv: true,
            pretrained: Some(pretrained.clone()),
            ..TrainConfig::softmax(0.005, 10, 3003)
        };
        let tuned = train(&tune_split, &config).unwrap().checkpoint;

        // Conv parameter bytes are identical to the pretrained checkpoint.
        let conv_bytes = |net: &Glyphnet| -> Vec<u8> {
            let mut bytes = Vec::new();
            for slice in [
                &net.conv1.weights,
                &net.conv1.biases,
                &net.conv2.weights,
                &net.conv2.biases,
            ] {
                for &v in slice.iter() {
                    bytes.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            bytes
        };
        assert_eq!(
            conv_bytes(&tuned.network),
            conv_bytes(&pretrained.network),
            "freeze-conv must leave conv bytes untouched"
        );

        let tuned_accuracy = evaluate_accuracy(&tuned.network, &held).unwrap();
        assert!(
            tuned_accuracy > zero_shot,
            "fine-tuned accuracy {tuned_accuracy} does not improve on zero-shot {zero_shot}"
        );
    });
}

// ---------------------------------------------------------------------------
// 7. Determinism
// ---------------------------------------------------------------------------

#[test]
fn c07_determinism() {
    criterion(7, "identical inputs give byte-identical artifacts", || {
        let corpus = synth_corpus(4, 10, 77);
        let config = TrainConfig::softmax(0.02, 3, 77);
        let a = train(&corpus, &config).unwrap().checkpoint;
        let b = train(&corpus, &config).unwrap().checkpoint;
        let bytes_a = checkpoint_to_bytes(&a.network, &a.labels);
        let bytes_b = checkpoint_to_bytes(&b.network, &b.labels);
        assert_eq!(bytes_a, bytes_b, "training is not byte-deterministic");

        let prototypes = build_prototypes(&a, &corpus).unwrap();
        let grid = GridSpec::new(2, 2);
        let page = inscript::corpus::render_page(&[0, 1, 2, 3], grid, Family::Modern, 7);
        let opts = PipelineOptions::default();
        let r1 = run_pipeline(&Decoded::Gray(page.clone()), grid, &a, &prototypes, &opts).unwrap();
        let r2 = run_pipeline(&Decoded::Gray(page), grid, &a, &prototypes, &opts).unwrap();
        assert_eq!(r1.to_json_bytes(), r2.to_json_bytes());
        assert_eq!(r1.tile.to_pgm(), r2.tile.to_pgm());
    });
}

// ---------------------------------------------------------------------------
// 8. Round trips
// ---------------------------------------------------------------------------

#[test]
fn c08_round_trips() {
    criterion(8, "PGM, slice/assemble, and checkpoint round trips", || {
        // PGM encode/decode, bit exact.
        for seed in 0..10u64 {
            let img = GrayImage::new(17, 11, seeded_pixels(187, 800 + seed));
            match decode_image(&encode_pgm(&img)).unwrap() {
                Decoded::Gray(back) => assert!(back == img),
                other => panic!("layout change: {other:?}"),
            }
        }

        // slice -> assemble with gutter 0 on exactly divisible dimensions.
        for (rows, cols) in [(1u32, 1u32), (2, 3), (4, 2)] {
            let n = (rows * 28 * cols * 28) as usize;
            let bits: Vec<u8> = seeded_pixels(n, 900 + u64::from(rows * 16 + cols))
                .into_iter()
                .map(|p| p & 1)
                .collect();
            let img = BinaryImage::new(cols * 28, rows * 28, bits);
            let grid = GridSpec::new(rows, cols);
            let tile = assemble_tile(&slice(&img, grid).unwrap(), grid, 0).unwrap();
            assert_eq!(tile.image(), &img, "{rows}x{cols} grid");
        }

        // Checkpoint save/load, bit exact.
        let corpus = synth_corpus(5, 2, 3);
        let report = train(&corpus, &TrainConfig::softmax(0.05, 1, 3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(
            &report.checkpoint.network,
            &report.checkpoint.labels,
            &path,
        )
        .unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(
            checkpoint_to_bytes(&loaded.network, &loaded.labels),
            checkpoint_to_bytes(&report.checkpoint.network, &report.checkpoint.labels)
        );
    });
}

// ---------------------------------------------------------------------------
// 9. Bridge contracts
// ---------------------------------------------------------------------------

#[test]
fn c09_bridge_contracts() {
    criterion(9, "stub OCR/TTS bridges honor the double-validation contract", || {
        let corpus = synth_corpus(4, 10, 55);
        let report = train(&corpus, &TrainConfig::softmax(0.02, 4, 55)).unwrap();
        let model = report.checkpoint;
        let prototypes = build_prototypes(&model, &corpus).unwrap();
        let grid = GridSpec::new(1, 3);
        let page = inscript::corpus::render_page(&[0, 1, 2], grid, Family::Modern, 14);
        let dir = tempfile::tempdir().unwrap();
        let audio = dir.path().join("out.wav");

        // Healthy stubs: echo for OCR, copy for TTS.
        let opts = PipelineOptions {
            ocr: Some(EngineBridge::ocr("printf 'STUBBED TEXT'; : {input}").unwrap()),
            tts: Some(EngineBridge::tts("cp {input} {output}").unwrap()),
            audio_out: Some(audio.clone()),
            ..Default::default()
        };
        let result = run_pipeline(
            &Decoded::Gray(page.clone()),
            grid,
            &model,
            &prototypes,
            &opts,
        )
        .unwrap();
        assert_eq!(result.final_text, "STUBBED TEXT");
        assert_eq!(result.ocr_text.as_deref(), Some("STUBBED TEXT"));
        assert!(result.bridge_warnings.is_empty(), "{:?}", result.bridge_warnings);
        let audio_bytes = std::fs::read(&audio).unwrap();
        assert!(!audio_bytes.is_empty(), "tts stub must produce audio bytes");
        assert_eq!(audio_bytes, b"STUBBED TEXT");

        // Failing stubs degrade cleanly: net text wins, warnings recorded.
        let broken_audio = dir.path().join("broken.wav");
        let opts = PipelineOptions {
            ocr: Some(
                EngineBridge::ocr("echo IGNORED; false # {input}")
                    .unwrap()
                    .with_timeout(Duration::from_secs(5)),
            ),
            tts: Some(EngineBridge::tts("false # {input} {output}").unwrap()),
            audio_out: Some(broken_audio.clone()),
            ..Default::default()
        };
        let result =
            run_pipeline(&Decoded::Gray(page), grid, &model, &prototypes, &opts).unwrap();
        assert_eq!(result.final_text, result.net_text);
        assert!(result.ocr_text.is_none());
        assert_eq!(result.bridge_warnings.len(), 2, "{:?}", result.bridge_warnings);
        assert!(result.bridge_warnings[0].contains("ocr bridge"));
        assert!(result.bridge_warnings[1].contains("tts bridge"));
        assert!(!broken_audio.exists());
    });
}

// ---------------------------------------------------------------------------
// 10. Contrastive loss properties
// ---------------------------------------------------------------------------

#[test]
fn c10_contrastive_loss_properties() {
    criterion(10, "contrastive loss over 1000 random embedding pairs", || {
        let mut rng = ChaCha8Rng::seed_from_u64(1010);
        for case in 0..1000 {
            let dim = 512;
            let e1: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let e2: Vec<f64> = if case % 5 == 0 {
                e1.clone()
            } else {
                (0..dim).map(|_| rng.gen_range(-2.0..=2.0)).collect()
            };
            let margin = rng.gen_range(0.1..=40.0);
            // Distance computed independently of the implementation.
            let d = e1
                .iter()
                .zip(&e2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();

            let same = loss_contrastive(&e1, &e2, true, margin);
            let diff = loss_contrastive(&e1, &e2, false, margin);
            assert!(same >= 0.0 && diff >= 0.0, "losses must be nonnegative");
            assert!(
                (same - d * d).abs() <= 1e-9 * (d * d).max(1.0),
                "same-family loss must be d^2"
            );
            if e1 == e2 {
                assert_eq!(same, 0.0, "identical same-family pair must cost 0");
            }
            if d >= margin {
                assert_eq!(diff, 0.0, "case {case}: hinge must be inactive at d >= margin");
            } else {
                let want = (margin - d) * (margin - d);
                assert!(
                    (diff - want).abs() <= 1e-9 * want.max(1.0),
                    "case {case}: hinge value drifted"
                );
                if d > 0.0 {
                    assert!(diff > 0.0);
                }
            }
        }
    });
}
