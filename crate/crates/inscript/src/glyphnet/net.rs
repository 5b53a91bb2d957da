//! Layers, forward pass, losses, and analytic gradients.

use rand::Rng;

use super::tensor::Tensor;
use super::{
    GlyphnetError, CONV1_CHANNELS, CONV2_CHANNELS, EMBEDDING_DIM, INPUT_SIDE, KERNEL_SIDE,
};
use crate::seeds;
use crate::segment::GlyphBlock;

/// Log argument floor for the cross-entropy loss.
const LOG_EPS: f64 = 1e-12;

/// Valid 2D convolution, stride 1. Weights are laid out
/// `[out_ch][in_ch][ky][kx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Conv2d {
    fn init(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        let fan_in = (in_channels * kernel * kernel) as f64;
        let fan_out = (out_channels * kernel * kernel) as f64;
        let limit = (6.0 / (fan_in + fan_out)).sqrt();
        let weights = (0..out_channels * in_channels * kernel * kernel)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        Self {
            in_channels,
            out_channels,
            kernel,
            weights,
            biases: vec![0.0; out_channels],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize), GlyphnetError> {
        let (c, h, w) = x.dims3()?;
        if c != self.in_channels || h < self.kernel || w < self.kernel {
            return Err(GlyphnetError::ShapeMismatch {
                expected: format!("({}, >={k}, >={k})", self.in_channels, k = self.kernel),
                found: format!("({c}, {h}, {w})"),
            });
        }
        Ok((c, h, w))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor, GlyphnetError> {
        let (_, h, w) = self.check_input(x)?;
        let k = self.kernel;
        let (oh, ow) = (h - k + 1, w - k + 1);
        let mut out = Tensor::zeros(&[self.out_channels, oh, ow]);
        let data = x.data();
        let o = out.data_mut();
        for oc in 0..self.out_channels {
            let bias = self.biases[oc];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut sum = bias;
                    for ic in 0..self.in_channels {
                        let w_base = ((oc * self.in_channels) + ic) * k * k;
                        let in_base = ic * h * w;
                        for ky in 0..k {
                            let row = in_base + (oy + ky) * w + ox;
                            let w_row = w_base + ky * k;
                            for kx in 0..k {
                                sum += data[row + kx] * self.weights[w_row + kx];
                            }
                        }
                    }
                    o[(oc * oh + oy) * ow + ox] = sum;
                }
            }
        }
        Ok(out)
    }

    /// Accumulate parameter gradients (and optionally the input gradient)
    /// for one example.
    fn backward(
        &self,
        x: &Tensor,
        grad_out: &Tensor,
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        mut grad_in: Option<&mut Tensor>,
    ) {
        let (_, h, w) = x.dims3().expect("conv input is rank 3");
        let (_, oh, ow) = grad_out.dims3().expect("conv grad is rank 3");
        let k = self.kernel;
        let data = x.data();
        let gout = grad_out.data();
        if let Some(gi) = grad_in.as_deref_mut() {
            gi.data_mut().fill(0.0);
        }
        for oc in 0..self.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = gout[(oc * oh + oy) * ow + ox];
                    if g == 0.0 {
                        continue;
                    }
                    grad_b[oc] += g;
                    for ic in 0..self.in_channels {
                        let w_base = ((oc * self.in_channels) + ic) * k * k;
                        let in_base = ic * h * w;
                        for ky in 0..k {
                            let row = in_base + (oy + ky) * w + ox;
                            let w_row = w_base + ky * k;
                            for kx in 0..k {
                                grad_w[w_row + kx] += g * data[row + kx];
                            }
                        }
                        if let Some(gi) = grad_in.as_deref_mut() {
                            let gi = gi.data_mut();
                            for ky in 0..k {
                                let row = in_base + (oy + ky) * w + ox;
                                let w_row = w_base + ky * k;
                                for kx in 0..k {
                                    gi[row + kx] += g * self.weights[w_row + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Fully connected layer; weights laid out `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        (0..self.out_dim)
            .map(|k| {
                let row = &self.weights[k * self.in_dim..(k + 1) * self.in_dim];
                self.biases[k] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

/// ReLU applied elementwise.
pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_vec(x.shape(), data)
}

/// 2x2 max pooling with stride 2 over each channel.
pub fn maxpool2x2(x: &Tensor) -> Result<Tensor, GlyphnetError> {
    maxpool2x2_with_indices(x).map(|(t, _)| t)
}

/// Pooling that also records, per output cell, the flat input index of the
/// maximum. Ties keep the first cell in row-major window order so the
/// backward pass routes deterministically.
pub(super) fn maxpool2x2_with_indices(
    x: &Tensor,
) -> Result<(Tensor, Vec<usize>), GlyphnetError> {
    let (c, h, w) = x.dims3()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(GlyphnetError::OddDimension {
            height: h,
            width: w,
        });
    }
    let (oh, ow) = (h / 2, w / 2);
    let data = x.data();
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut idx = vec![0usize; c * oh * ow];
    let o = out.data_mut();
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0usize;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let at = base + (oy * 2 + dy) * w + ox * 2 + dx;
                        if data[at] > best {
                            best = data[at];
                            best_at = at;
                        }
                    }
                }
                let out_at = (ch * oh + oy) * ow + ox;
                o[out_at] = best;
                idx[out_at] = best_at;
            }
        }
    }
    Ok((out, idx))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of the true class: `-ln(max(probs[class_id], 1e-12))`.
pub fn loss_softmax(probs: &Tensor, class_id: usize) -> Result<f64, GlyphnetError> {
    if class_id >= probs.len() {
        return Err(GlyphnetError::BadClassId {
            class_id,
            num_classes: probs.len(),
        });
    }
    Ok(-(probs.data()[class_id].max(LOG_EPS)).ln())
}

/// Pairwise objective over embeddings: same family pulls (`d^2`), different
/// families push apart up to the margin (`max(0, margin - d)^2`).
pub fn loss_contrastive(e1: &[f64], e2: &[f64], same_family: bool, margin: f64) -> f64 {
    assert_eq!(e1.len(), e2.len(), "embeddings must have equal length");
    assert!(margin > 0.0, "margin must be positive");
    let d = euclidean(e1, e2);
    if same_family {
        d * d
    } else {
        let gap = (margin - d).max(0.0);
        gap * gap
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// All intermediate activations of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub conv1_pre: Tensor,
    pub pool1: Tensor,
    pool1_idx: Vec<usize>,
    pub conv2_pre: Tensor,
    pub pool2: Tensor,
    pool2_idx: Vec<usize>,
    pub logits: Tensor,
    pub probs: Tensor,
}

impl Forward {
    /// Flattened post-pool activation: the embedding used for matching.
    pub fn embedding(&self) -> &[f64] {
        self.pool2.data()
    }

    pub fn predicted_class(&self) -> usize {
        let probs = self.probs.data();
        let mut best = 0usize;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Parameter gradients mirroring the network layout.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Glyphnet) -> Self {
        Self {
            conv1_w: vec![0.0; net.conv1.weights.len()],
            conv1_b: vec![0.0; net.conv1.biases.len()],
            conv2_w: vec![0.0; net.conv2.weights.len()],
            conv2_b: vec![0.0; net.conv2.biases.len()],
            dense_w: vec![0.0; net.dense.weights.len()],
            dense_b: vec![0.0; net.dense.biases.len()],
        }
    }

    pub fn reset(&mut self) {
        for buf in [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.dense_w,
            &mut self.dense_b,
        ] {
            buf.fill(0.0);
        }
    }
}

/// The network. [`Glyphnet::new`] builds the standard 28x28 geometry;
/// [`Glyphnet::with_geometry`] builds reduced variants for gradient checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Glyphnet {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub dense: Dense,
    input_shape: (usize, usize, usize),
}

impl Glyphnet {
    /// Standard network for `num_classes` classes, seeded initialization.
    pub fn new(num_classes: usize, seed: u64) -> Self {
        Self::with_geometry(
            (1, INPUT_SIDE, INPUT_SIDE),
            CONV1_CHANNELS,
            KERNEL_SIDE,
            CONV2_CHANNELS,
            KERNEL_SIDE,
            num_classes,
            seed,
        )
        .expect("standard geometry is valid")
    }

    /// Build an arbitrary conv-pool-conv-pool-dense stack. Both post-conv
    /// feature maps must have even sides for the 2x2 pools.
    #[allow(clippy::too_many_arguments)]
    pub fn with_geometry(
        input_shape: (usize, usize, usize),
        conv1_out: usize,
        kernel1: usize,
        conv2_out: usize,
        kernel2: usize,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self, GlyphnetError> {
        assert!(num_classes >= 1, "need at least one class");
        let (c, h, w) = input_shape;
        let stage = |side: usize, kernel: usize| -> Result<usize, GlyphnetError> {
            if side < kernel {
                return Err(GlyphnetError::ShapeMismatch {
                    expected: format!("side >= {kernel}"),
                    found: format!("{side}"),
                });
            }
            let conv = side - kernel + 1;
            if conv % 2 != 0 {
                return Err(GlyphnetError::OddDimension {
                    height: conv,
                    width: conv,
                });
            }
            Ok(conv / 2)
        };
        let h1 = stage(h, kernel1)?;
        let w1 = stage(w, kernel1)?;
        let h2 = stage(h1, kernel2)?;
        let w2 = stage(w1, kernel2)?;
        let embedding = conv2_out * h2 * w2;

        let mut rng = seeds::stream("glyphnet-init", &[seed]);
        Ok(Self {
            conv1: Conv2d::init(c, conv1_out, kernel1, &mut rng),
            conv2: Conv2d::init(conv1_out, conv2_out, kernel2, &mut rng),
            dense: Dense::init(embedding, num_classes, &mut rng),
            input_shape,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.dense.out_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.dense.in_dim
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    /// True for the fixed production geometry (the only one checkpoints
    /// serialize).
    pub fn is_standard(&self) -> bool {
        self.input_shape == (1, INPUT_SIDE, INPUT_SIDE)
            && self.conv1.out_channels == CONV1_CHANNELS
            && self.conv1.kernel == KERNEL_SIDE
            && self.conv2.out_channels == CONV2_CHANNELS
            && self.conv2.kernel == KERNEL_SIDE
            && self.embedding_dim() == EMBEDDING_DIM
    }

    pub fn parameter_count(&self) -> usize {
        self.conv1.parameter_count() + self.conv2.parameter_count() + self.dense.parameter_count()
    }

    /// Adopt the convolution parameters of another network (transfer
    /// learning); the dense head keeps its own initialization.
    pub fn copy_conv_from(&mut self, other: &Glyphnet) -> Result<(), GlyphnetError> {
        let compatible = self.conv1.weights.len() == other.conv1.weights.len()
            && self.conv2.weights.len() == other.conv2.weights.len()
            && self.input_shape == other.input_shape;
        if !compatible {
            return Err(GlyphnetError::ShapeMismatch {
                expected: format!("conv stack of {:?}", self.input_shape),
                found: format!("conv stack of {:?}", other.input_shape),
            });
        }
        self.conv1 = other.conv1.clone();
        self.conv2 = other.conv2.clone();
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<(), GlyphnetError> {
        let dims = input.dims3()?;
        if dims != self.input_shape {
            return Err(GlyphnetError::ShapeMismatch {
                expected: format!("{:?}", self.input_shape),
                found: format!("{dims:?}"),
            });
        }
        Ok(())
    }

    /// Full forward pass keeping every intermediate needed for backprop.
    pub fn forward(&self, input: &Tensor) -> Result<Forward, GlyphnetError> {
        self.check_input(input)?;
        let conv1_pre = self.conv1.forward(input)?;
        let (pool1, pool1_idx) = maxpool2x2_with_indices(&relu(&conv1_pre))?;
        let conv2_pre = self.conv2.forward(&pool1)?;
        let (pool2, pool2_idx) = maxpool2x2_with_indices(&relu(&conv2_pre))?;
        debug_assert_eq!(pool2.len(), self.embedding_dim());
        let logits = self.dense.forward(pool2.data());
        let probs = softmax(&logits);
        Ok(Forward {
            conv1_pre,
            pool1,
            pool1_idx,
            conv2_pre,
            pool2,
            pool2_idx,
            logits: Tensor::from_vec(&[self.num_classes()], logits),
            probs: Tensor::from_vec(&[self.num_classes()], probs),
        })
    }

    pub fn forward_block(&self, block: &GlyphBlock) -> Result<Forward, GlyphnetError> {
        self.forward(&Tensor::from_block(block))
    }

    /// Backprop of the softmax cross-entropy for one example, accumulated
    /// into `grads`.
    pub fn accumulate_softmax_gradients(
        &self,
        fwd: &Forward,
        input: &Tensor,
        target: usize,
        grads: &mut Gradients,
    ) -> Result<(), GlyphnetError> {
        let k = self.num_classes();
        if target >= k {
            return Err(GlyphnetError::BadClassId {
                class_id: target,
                num_classes: k,
            });
        }
        // d(loss)/d(logit) = probs - onehot for softmax cross-entropy.
        let probs = fwd.probs.data();
        let mut dlogits = probs.to_vec();
        dlogits[target] -= 1.0;

        let emb = fwd.embedding();
        let mut dembed = vec![0.0; emb.len()];
        for (j, &g) in dlogits.iter().enumerate() {
            grads.dense_b[j] += g;
            let row = j * self.dense.in_dim;
            for (i, &e) in emb.iter().enumerate() {
                grads.dense_w[row + i] += g * e;
                dembed[i] += g * self.dense.weights[row + i];
            }
        }
        self.accumulate_embedding_gradients(fwd, input, &dembed, grads);
        Ok(())
    }

    /// Backprop from a gradient at the embedding through both conv stages.
    /// The dense head receives no gradient on this path.
    pub fn accumulate_embedding_gradients(
        &self,
        fwd: &Forward,
        input: &Tensor,
        dembed: &[f64],
        grads: &mut Gradients,
    ) {
        debug_assert_eq!(dembed.len(), self.embedding_dim());
        // Unpool into the second ReLU map, gating dead units.
        let mut d_conv2 = Tensor::zeros(fwd.conv2_pre.shape());
        {
            let d = d_conv2.data_mut();
            for (out_at, &g) in dembed.iter().enumerate() {
                d[fwd.pool2_idx[out_at]] += g;
            }
            for (dv, &pre) in d.iter_mut().zip(fwd.conv2_pre.data()) {
                if pre <= 0.0 {
                    *dv = 0.0;
                }
            }
        }
        let mut d_pool1 = Tensor::zeros(fwd.pool1.shape());
        self.conv2.backward(
            &fwd.pool1,
            &d_conv2,
            &mut grads.conv2_w,
            &mut grads.conv2_b,
            Some(&mut d_pool1),
        );

        let mut d_conv1 = Tensor::zeros(fwd.conv1_pre.shape());
        {
            let d = d_conv1.data_mut();
            for (out_at, &g) in d_pool1.data().iter().enumerate() {
                d[fwd.pool1_idx[out_at]] += g;
            }
            for (dv, &pre) in d.iter_mut().zip(fwd.conv1_pre.data()) {
                if pre <= 0.0 {
                    *dv = 0.0;
                }
            }
        }
        self.conv1.backward(
            input,
            &d_conv1,
            &mut grads.conv1_w,
            &mut grads.conv1_b,
            None,
        );
    }

    /// One SGD step: `p -= step * g`, optionally leaving conv layers frozen.
    pub fn apply_update(&mut self, grads: &Gradients, step: f64, freeze_conv: bool) {
        if !freeze_conv {
            for (w, g) in self.conv1.weights.iter_mut().zip(&grads.conv1_w) {
                *w -= step * g;
            }
            for (b, g) in self.conv1.biases.iter_mut().zip(&grads.conv1_b) {
                *b -= step * g;
            }
            for (w, g) in self.conv2.weights.iter_mut().zip(&grads.conv2_w) {
                *w -= step * g;
            }
            for (b, g) in self.conv2.biases.iter_mut().zip(&grads.conv2_b) {
                *b -= step * g;
            }
        }
        for (w, g) in self.dense.weights.iter_mut().zip(&grads.dense_w) {
            *w -= step * g;
        }
        for (b, g) in self.dense.biases.iter_mut().zip(&grads.dense_b) {
            *b -= step * g;
        }
    }

    /// Flat views over all parameters in checkpoint order.
    pub(super) fn param_slices(&self) -> [&[f64]; 6] {
        [
            &self.conv1.weights,
            &self.conv1.biases,
            &self.conv2.weights,
            &self.conv2.biases,
            &self.dense.weights,
            &self.dense.biases,
        ]
    }

    pub(super) fn param_slices_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.conv1.weights,
            &mut self.conv1.biases,
            &mut self.conv2.weights,
            &mut self.conv2.biases,
            &mut self.dense.weights,
            &mut self.dense.biases,
        ]
    }
}

/// Analytic softmax cross-entropy gradients for a single example.
pub fn gradients(
    net: &Glyphnet,
    input: &Tensor,
    target: usize,
) -> Result<Gradients, GlyphnetError> {
    let fwd = net.forward(input)?;
    let mut grads = Gradients::zeros_like(net);
    net.accumulate_softmax_gradients(&fwd, input, target, &mut grads)?;
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_net(seed: u64) -> Glyphnet {
        // (1,13,13) -> conv2 -> (2,12,12) -> pool -> (2,6,6) -> conv3 ->
        // (3,4,4) -> pool -> (3,2,2) -> dense(12 -> 4): even at every pool.
        Glyphnet::with_geometry((1, 13, 13), 2, 2, 3, 3, 4, seed).unwrap()
    }

    #[test]
    fn standard_parameter_counts() {
        let net = Glyphnet::new(10, 0);
        assert_eq!(net.conv1.parameter_count(), 16 * 25 + 16);
        assert_eq!(net.conv2.parameter_count(), 32 * 16 * 25 + 32);
        assert_eq!(net.dense.parameter_count(), 512 * 10 + 10);
        assert_eq!(net.parameter_count(), 13248 + 513 * 10);
        assert!(net.is_standard());
    }

    #[test]
    fn standard_shape_trace_matches_contract() {
        let net = Glyphnet::new(4, 1);
        let input = Tensor::zeros(&[1, 28, 28]);
        let fwd = net.forward(&input).unwrap();
        assert_eq!(fwd.conv1_pre.shape(), &[16, 24, 24]);
        assert_eq!(fwd.pool1.shape(), &[16, 12, 12]);
        assert_eq!(fwd.conv2_pre.shape(), &[32, 8, 8]);
        assert_eq!(fwd.pool2.shape(), &[32, 4, 4]);
        assert_eq!(fwd.embedding().len(), 512);
        assert_eq!(fwd.logits.len(), 4);
    }

    #[test]
    fn probs_form_a_distribution() {
        let net = Glyphnet::new(5, 9);
        let mut input = Tensor::zeros(&[1, 28, 28]);
        for (i, v) in input.data_mut().iter_mut().enumerate() {
            *v = ((i * 37) % 255) as f64 / 255.0;
        }
        let fwd = net.forward(&input).unwrap();
        let sum: f64 = fwd.probs.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(fwd.probs.data().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn zero_weights_give_uniform_probs() {
        let mut net = Glyphnet::new(4, 0);
        for slice in net.param_slices_mut() {
            slice.fill(0.0);
        }
        let input = Tensor::from_vec(&[1, 28, 28], vec![0.25; 784]);
        let fwd = net.forward(&input).unwrap();
        for &p in fwd.probs.data() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let net = Glyphnet::new(3, 2);
        let err = net.forward(&Tensor::zeros(&[1, 27, 28])).unwrap_err();
        assert!(matches!(err, GlyphnetError::ShapeMismatch { .. }));
    }

    #[test]
    fn maxpool_takes_window_maxima() {
        let x = Tensor::from_vec(
            &[1, 4, 4],
            (1..=16).map(f64::from).collect(),
        );
        let pooled = maxpool2x2(&x).unwrap();
        assert_eq!(pooled.data(), &[6.0, 8.0, 14.0, 16.0]);

        let constant = Tensor::from_vec(&[2, 4, 4], vec![3.5; 32]);
        let pooled = maxpool2x2(&constant).unwrap();
        assert_eq!(pooled.shape(), &[2, 2, 2]);
        assert!(pooled.data().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn maxpool_rejects_odd_dimensions() {
        let x = Tensor::zeros(&[1, 3, 4]);
        assert!(matches!(
            maxpool2x2(&x),
            Err(GlyphnetError::OddDimension { height: 3, width: 4 })
        ));
    }

    #[test]
    fn maxpool_ties_route_to_first_cell() {
        let x = Tensor::from_vec(&[1, 2, 2], vec![5.0, 5.0, 5.0, 5.0]);
        let (_, idx) = maxpool2x2_with_indices(&x).unwrap();
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn softmax_loss_follows_clamp() {
        let uniform = Tensor::from_vec(&[4], vec![0.25; 4]);
        assert!((loss_softmax(&uniform, 0).unwrap() - 4f64.ln()).abs() < 1e-12);
        let onehot = Tensor::from_vec(&[2], vec![1.0, 0.0]);
        assert_eq!(loss_softmax(&onehot, 0).unwrap(), 0.0);
        let clamped = loss_softmax(&onehot, 1).unwrap();
        assert!((clamped - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!((clamped - 27.631).abs() < 0.01);
        assert!(matches!(
            loss_softmax(&onehot, 2),
            Err(GlyphnetError::BadClassId { .. })
        ));
    }

    #[test]
    fn contrastive_loss_cases() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(loss_contrastive(&a, &a, true, 1.0), 0.0);
        let b = vec![1.0, 2.0, 5.0]; // d = 2
        assert_eq!(loss_contrastive(&a, &b, false, 1.0), 0.0);
        let c = vec![1.0, 2.0, 3.5]; // d = 0.5
        assert!((loss_contrastive(&a, &c, false, 1.0) - 0.25).abs() < 1e-12);
        assert!((loss_contrastive(&a, &c, true, 1.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn dense_bias_gradient_is_probs_minus_onehot() {
        let mut net = Glyphnet::new(4, 3);
        for slice in net.param_slices_mut() {
            slice.fill(0.0);
        }
        let input = Tensor::zeros(&[1, 28, 28]);
        let grads = gradients(&net, &input, 2).unwrap();
        for (j, &g) in grads.dense_b.iter().enumerate() {
            let expected = if j == 2 { 0.25 - 1.0 } else { 0.25 };
            assert!((g - expected).abs() < 1e-12, "bias {j}: {g}");
        }
    }

    #[test]
    fn dead_relu_units_block_gradients() {
        let mut net = tiny_net(5);
        // Force every conv1 pre-activation negative via a large negative bias.
        net.conv1.biases.fill(-100.0);
        let input = Tensor::from_vec(&[1, 13, 13], vec![0.5; 169]);
        let grads = gradients(&net, &input, 0).unwrap();
        assert!(grads.conv1_w.iter().all(|&g| g == 0.0));
        // The bias gradient is also gated by the dead ReLU.
        assert!(grads.conv1_b.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn analytic_gradients_match_finite_differences_on_tiny_net() {
        let net = tiny_net(42);
        let mut rng = seeds::stream("gradcheck-input", &[1]);
        let input = Tensor::from_vec(
            &[1, 13, 13],
            (0..169).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        );
        let target = 1usize;
        let analytic = gradients(&net, &input, target).unwrap();

        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for slot in 0..6 {
            let len = net.param_slices()[slot].len();
            // Probe a spread of parameters in each slot.
            for probe in 0..len.min(20) {
                let at = probe * len.div_ceil(20).max(1) % len;
                let mut plus = net.clone();
                plus.param_slices_mut()[slot][at] += h;
                let mut minus = net.clone();
                minus.param_slices_mut()[slot][at] -= h;
                let lp = loss_softmax(&plus.forward(&input).unwrap().probs, target).unwrap();
                let lm = loss_softmax(&minus.forward(&input).unwrap().probs, target).unwrap();
                let numeric = (lp - lm) / (2.0 * h);
                let a = match slot {
                    0 => analytic.conv1_w[at],
                    1 => analytic.conv1_b[at],
                    2 => analytic.conv2_w[at],
                    3 => analytic.conv2_b[at],
                    4 => analytic.dense_w[at],
                    _ => analytic.dense_b[at],
                };
                let rel = (a - numeric).abs() / a.abs().max(1.0);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }
}
