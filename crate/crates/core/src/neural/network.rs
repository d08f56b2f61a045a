use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::Scalar;

use super::layers::{dropout_mask, relu_backward, relu_in_place, sigmoid, BatchNorm, Dense, NormCache};

/// Widths of the four dense layers inside every residual block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Every layer, and the trunk, has the same width.
    Uniform(usize),
    /// Distinct widths per layer; the trunk carries the last width so the
    /// identity skip stays exact.
    Tapered([usize; 4]),
}

impl Layout {
    pub fn trunk_width(&self) -> usize {
        match *self {
            Layout::Uniform(w) => w,
            Layout::Tapered(w) => w[3],
        }
    }

    pub fn block_widths(&self) -> [usize; 4] {
        match *self {
            Layout::Uniform(w) => [w; 4],
            Layout::Tapered(w) => w,
        }
    }
}

/// Architecture and regularisation of a [`MudNetwork`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    /// Feature length, `2 K X`.
    pub inputs: usize,
    /// Number of devices `N`.
    pub outputs: usize,
    pub blocks: usize,
    pub layout: Layout,
    /// Dropout probability after the first dense layer of each block.
    pub dropout: f64,
    /// L2 ratio on the second dense layer of each block.
    pub l2: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl NetworkConfig {
    /// Four uniform blocks of width 128 with dropout 0.5 and L2 ratio 0.01.
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            blocks: 4,
            layout: Layout::Uniform(128),
            dropout: 0.5,
            l2: 0.01,
            bn_eps: 1e-5,
            bn_momentum: 0.99,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = self.layout.block_widths();
        if self.inputs == 0 || self.outputs == 0 || widths.contains(&0) {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::invalid("L2 ratio must be non-negative"));
        }
        if !(self.bn_eps > 0.0) || !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(Error::invalid("batch-norm epsilon must be positive and momentum in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and sampled dropout masks; records a trace.
    Train,
    /// Running statistics, no dropout.
    Infer,
}

/// One residual unit: four dense + batch-norm pairs around an identity skip.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock<F> {
    pub dense: [Dense<F>; 4],
    pub norm: [BatchNorm<F>; 4],
}

/// Pre-activated residual detector mapping stacked pilot features to
/// per-device activity probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MudNetwork<F> {
    config: NetworkConfig,
    pub input: Dense<F>,
    pub input_norm: BatchNorm<F>,
    pub blocks: Vec<ResidualBlock<F>>,
    pub output: Dense<F>,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockTrace<F> {
    h1: Vec<F>,
    mask: Option<Vec<F>>,
    h1d: Vec<F>,
    h2: Vec<F>,
    h3: Vec<F>,
    out: Vec<F>,
    norms: [NormCache<F>; 4],
}

/// Activations of one train-mode forward pass, consumed by
/// [`MudNetwork::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace<F> {
    pub(crate) batch: usize,
    pub(crate) x: Vec<F>,
    pub(crate) input_norm: NormCache<F>,
    pub(crate) z0: Vec<F>,
    pub(crate) blocks: Vec<BlockTrace<F>>,
    pub(crate) agg: Vec<F>,
}

impl<F> ForwardTrace<F> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Normalisation statistics of the input layer followed by those of the
    /// four layers of every block, in network order.
    pub fn norm_caches(&self) -> Vec<&NormCache<F>> {
        std::iter::once(&self.input_norm)
            .chain(self.blocks.iter().flat_map(|b| b.norms.iter()))
            .collect()
    }

    /// Input of the output layer: pre-activated trunk plus every block output.
    pub fn aggregate(&self) -> &[F] {
        &self.agg
    }
}

/// Result of [`MudNetwork::forward`].
#[derive(Debug, Clone)]
pub struct Forward<F> {
    /// `batch x N` probabilities, row-major.
    pub probabilities: Vec<F>,
    pub logits: Vec<F>,
    pub trace: Option<ForwardTrace<F>>,
}

impl<F: Scalar> Forward<F> {
    /// Whether every logit is finite.
    pub fn is_finite(&self) -> bool {
        self.logits.iter().all(|z| z.is_finite())
    }
}

/// Parameter gradients in [`MudNetwork::tensors`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub tensors: Vec<Vec<F>>,
}

impl<F: Scalar> MudNetwork<F> {
    /// He-initialised network; batch norm starts at `gamma = 1, eta = 0`.
    pub fn new(config: NetworkConfig, rng: &mut SimRng) -> Result<Self> {
        config.validate()?;
        let t = config.layout.trunk_width();
        let w = config.layout.block_widths();
        let blocks = (0..config.blocks)
            .map(|_| ResidualBlock {
                dense: [
                    Dense::init(t, w[0], 2.0, rng),
                    Dense::init(w[0], w[1], 2.0, rng),
                    Dense::init(w[1], w[2], 2.0, rng),
                    Dense::init(w[2], w[3], 1.0, rng),
                ],
                norm: [BatchNorm::new(w[0]), BatchNorm::new(w[1]), BatchNorm::new(w[2]), BatchNorm::new(w[3])],
            })
            .collect();
        Ok(Self {
            input: Dense::init(config.inputs, t, 2.0, rng),
            input_norm: BatchNorm::new(t),
            blocks,
            output: Dense::init(t, config.outputs, 1.0, rng),
            config,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn inputs(&self) -> usize {
        self.config.inputs
    }

    pub fn outputs(&self) -> usize {
        self.config.outputs
    }

    /// Trainable tensors in a fixed order: input layer, input norm, then per
    /// block four (dense weight, dense bias, gamma, eta) groups, then the
    /// output layer.
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut v: Vec<&[F]> = vec![&self.input.weight, &self.input.bias, &self.input_norm.gamma, &self.input_norm.eta];
        for b in &self.blocks {
            for i in 0..4 {
                v.extend([&b.dense[i].weight[..], &b.dense[i].bias, &b.norm[i].gamma, &b.norm[i].eta]);
            }
        }
        v.extend([&self.output.weight[..], &self.output.bias]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<F>> {
        let mut v = vec![
            &mut self.input.weight,
            &mut self.input.bias,
            &mut self.input_norm.gamma,
            &mut self.input_norm.eta,
        ];
        for b in &mut self.blocks {
            for (d, n) in b.dense.iter_mut().zip(b.norm.iter_mut()) {
                v.extend([&mut d.weight, &mut d.bias, &mut n.gamma, &mut n.eta]);
            }
        }
        v.extend([&mut self.output.weight, &mut self.output.bias]);
        v
    }

    /// Human-readable name of each entry of [`tensors`](Self::tensors).
    pub fn tensor_names(&self) -> Vec<String> {
        let mut v: Vec<String> = ["input.weight", "input.bias", "input_norm.gamma", "input_norm.eta"]
            .map(String::from)
            .into();
        for l in 0..self.blocks.len() {
            for i in 1..=4 {
                for part in ["weight", "bias", "gamma", "eta"] {
                    v.push(format!("block{l}.layer{i}.{part}"));
                }
            }
        }
        v.extend(["output.weight".into(), "output.bias".into()]);
        v
    }

    /// Index of block `l`'s L2-regularised weight in [`tensors`](Self::tensors).
    pub fn l2_tensor_index(block: usize) -> usize {
        4 + block * 16 + 4
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Running mean and variance buffers in network order.
    pub fn norms(&self) -> Vec<&BatchNorm<F>> {
        std::iter::once(&self.input_norm)
            .chain(self.blocks.iter().flat_map(|b| b.norm.iter()))
            .collect()
    }

    pub(crate) fn norms_mut(&mut self) -> Vec<&mut BatchNorm<F>> {
        std::iter::once(&mut self.input_norm)
            .chain(self.blocks.iter_mut().flat_map(|b| b.norm.iter_mut()))
            .collect()
    }

    fn check_batch(&self, x: &[F], batch: usize) -> Result<()> {
        if batch == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if x.len() != batch * self.config.inputs {
            return Err(Error::mismatch("feature buffer length", batch * self.config.inputs, x.len()));
        }
        Ok(())
    }

    /// Forward pass over `batch` row-major feature vectors. Train mode needs
    /// `rng` for dropout when the rate is positive.
    pub fn forward(&self, x: &[F], batch: usize, mode: Mode, rng: Option<&mut SimRng>) -> Result<Forward<F>> {
        self.check_batch(x, batch)?;
        match mode {
            Mode::Infer => {
                let logits = self.logits_infer(x, batch);
                Ok(Forward {
                    probabilities: logits.iter().map(|&z| sigmoid(z)).collect(),
                    logits,
                    trace: None,
                })
            }
            Mode::Train => self.forward_train(x, batch, rng),
        }
    }

    /// Inference probabilities, evaluated in chunks of at most 4096 rows.
    pub fn predict(&self, x: &[F], batch: usize) -> Result<Vec<F>> {
        self.check_batch(x, batch)?;
        let d = self.config.inputs;
        let mut out = Vec::with_capacity(batch * self.config.outputs);
        for chunk in x.chunks(4096 * d) {
            out.extend(self.logits_infer(chunk, chunk.len() / d).into_iter().map(sigmoid));
        }
        Ok(out)
    }

    fn logits_infer(&self, x: &[F], batch: usize) -> Vec<F> {
        let eps = F::lit(self.config.bn_eps);
        let mut z = self.input_norm.forward_infer(&self.input.forward(x, batch), eps);
        relu_in_place(&mut z);
        let mut agg = z.clone();
        let mut u = z;
        for b in &self.blocks {
            let mut h = b.norm[0].forward_infer(&b.dense[0].forward(&u, batch), eps);
            relu_in_place(&mut h);
            let mut h = b.norm[1].forward_infer(&b.dense[1].forward(&h, batch), eps);
            relu_in_place(&mut h);
            let h = b.norm[2].forward_infer(&b.dense[2].forward(&h, batch), eps);
            let mut s = b.norm[3].forward_infer(&b.dense[3].forward(&h, batch), eps);
            for (s, &u) in s.iter_mut().zip(&u) {
                *s += u;
            }
            relu_in_place(&mut s);
            for (a, &o) in agg.iter_mut().zip(&s) {
                *a += o;
            }
            u = s;
        }
        self.output.forward(&agg, batch)
    }

    fn forward_train(&self, x: &[F], batch: usize, mut rng: Option<&mut SimRng>) -> Result<Forward<F>> {
        let eps = F::lit(self.config.bn_eps);
        let rate = self.config.dropout;
        let (mut z0, input_norm) = self.input_norm.forward_train(&self.input.forward(x, batch), batch, eps);
        relu_in_place(&mut z0);
        let mut agg = z0.clone();
        let mut blocks: Vec<BlockTrace<F>> = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let u = blocks.last().map_or(&z0, |t| &t.out);
            let (mut h1, n1) = b.norm[0].forward_train(&b.dense[0].forward(u, batch), batch, eps);
            relu_in_place(&mut h1);
            let (mask, h1d) = if rate > 0.0 {
                let rng = rng
                    .as_deref_mut()
                    .ok_or_else(|| Error::invalid("train-mode dropout needs a random stream"))?;
                let mask = dropout_mask::<F>(h1.len(), rate, rng);
                let h1d = h1.iter().zip(&mask).map(|(&h, &m)| h * m).collect();
                (Some(mask), h1d)
            } else {
                (None, h1.clone())
            };
            let (mut h2, n2) = b.norm[1].forward_train(&b.dense[1].forward(&h1d, batch), batch, eps);
            relu_in_place(&mut h2);
            let (h3, n3) = b.norm[2].forward_train(&b.dense[2].forward(&h2, batch), batch, eps);
            let (mut out, n4) = b.norm[3].forward_train(&b.dense[3].forward(&h3, batch), batch, eps);
            for (s, &u) in out.iter_mut().zip(u) {
                *s += u;
            }
            relu_in_place(&mut out);
            for (a, &o) in agg.iter_mut().zip(&out) {
                *a += o;
            }
            blocks.push(BlockTrace { h1, mask, h1d, h2, h3, out, norms: [n1, n2, n3, n4] });
        }
        let logits = self.output.forward(&agg, batch);
        Ok(Forward {
            probabilities: logits.iter().map(|&z| sigmoid(z)).collect(),
            logits,
            trace: Some(ForwardTrace { batch, x: x.to_vec(), input_norm, z0, blocks, agg }),
        })
    }

    /// Gradients of [`bce_l2_loss`] with respect to every trainable tensor.
    ///
    /// The cross-entropy gradient is taken through the logits, so it stays
    /// informative where the clipped loss is flat.
    pub fn backward(&self, forward: &Forward<F>, labels: &[F]) -> Result<Gradients<F>> {
        let trace = forward.trace.as_ref().ok_or(Error::MissingTrace)?;
        let batch = trace.batch;
        let n = self.config.outputs;
        if labels.len() != batch * n {
            return Err(Error::mismatch("label buffer length", batch * n, labels.len()));
        }
        let mut grads: Vec<Vec<F>> = self.tensors().iter().map(|t| vec![F::zero(); t.len()]).collect();
        let scale = F::one() / F::from_usize(batch * n).unwrap();
        let dlogits: Vec<F> = forward
            .probabilities
            .iter()
            .zip(labels)
            .map(|(&p, &y)| (p - y) * scale)
            .collect();

        let out_idx = grads.len() - 2;
        let (head, tail) = grads.split_at_mut(out_idx);
        let (gw, gb) = tail.split_at_mut(1);
        let dagg = self
            .output
            .backward(&trace.agg, &dlogits, batch, &mut gw[0], &mut gb[0], true)
            .expect("requested dx");

        let l2 = F::lit(self.config.l2);
        let mut carry: Option<Vec<F>> = None;
        for (l, (b, t)) in self.blocks.iter().zip(&trace.blocks).enumerate().rev() {
            let u = if l == 0 { &trace.z0 } else { &trace.blocks[l - 1].out };
            let base = 4 + 16 * l;
            let g = &mut head[base..base + 16];
            let mut ds: Vec<F> = match carry.take() {
                Some(c) => c.iter().zip(&dagg).map(|(&a, &b)| a + b).collect(),
                None => dagg.clone(),
            };
            relu_backward(&mut ds, &t.out);

            let (g1, g) = g.split_at_mut(4);
            let (g2, g) = g.split_at_mut(4);
            let (g3, g4) = g.split_at_mut(4);
            let [w4, b4, ga4, et4] = g4 else { unreachable!() };
            let da = b.norm[3].backward(&ds, &t.norms[3], batch, ga4, et4);
            let dh3 = b.dense[3].backward(&t.h3, &da, batch, w4, b4, true).unwrap();

            let [w3, b3, ga3, et3] = g3 else { unreachable!() };
            let da = b.norm[2].backward(&dh3, &t.norms[2], batch, ga3, et3);
            let mut dh2 = b.dense[2].backward(&t.h2, &da, batch, w3, b3, true).unwrap();
            relu_backward(&mut dh2, &t.h2);

            let [w2, b2, ga2, et2] = g2 else { unreachable!() };
            let da = b.norm[1].backward(&dh2, &t.norms[1], batch, ga2, et2);
            let mut dh1 = b.dense[1].backward(&t.h1d, &da, batch, w2, b2, true).unwrap();
            if l2 > F::zero() {
                for (g, &w) in w2.iter_mut().zip(&b.dense[1].weight) {
                    *g += l2 * w;
                }
            }
            if let Some(mask) = &t.mask {
                dh1.iter_mut().zip(mask).for_each(|(d, &m)| *d *= m);
            }
            relu_backward(&mut dh1, &t.h1);

            let [w1, b1, ga1, et1] = g1 else { unreachable!() };
            let da = b.norm[0].backward(&dh1, &t.norms[0], batch, ga1, et1);
            let mut du = b.dense[0].backward(u, &da, batch, w1, b1, true).unwrap();
            for (d, &s) in du.iter_mut().zip(&ds) {
                *d += s;
            }
            carry = Some(du);
        }

        let mut dz0: Vec<F> = match carry {
            Some(c) => c.iter().zip(&dagg).map(|(&a, &b)| a + b).collect(),
            None => dagg,
        };
        relu_backward(&mut dz0, &trace.z0);
        let [wi, bi, gi, ei] = &mut head[..4] else { unreachable!() };
        let da = self.input_norm.backward(&dz0, &trace.input_norm, batch, gi, ei);
        self.input.backward(&trace.x, &da, batch, wi, bi, false);
        Ok(Gradients { tensors: grads })
    }

    /// Fold the batch statistics of `trace` into the running estimates.
    pub fn update_running_stats(&mut self, trace: &ForwardTrace<F>) {
        let m = F::lit(self.config.bn_momentum);
        let caches = trace.norm_caches();
        for (norm, cache) in self.norms_mut().into_iter().zip(caches) {
            norm.update_running(cache, m);
        }
    }

    /// `(ε/2) Σ_l ‖W2_l‖²`.
    pub fn l2_penalty(&self) -> f64 {
        let s: f64 = self
            .blocks
            .iter()
            .flat_map(|b| b.dense[1].weight.iter())
            .map(|w| w.to_f64_lossy().powi(2))
            .sum();
        0.5 * self.config.l2 * s
    }
}

/// Probability clip applied inside the cross-entropy.
pub const BCE_CLIP: f64 = 1e-7;

/// Mean binary cross-entropy over every (sample, device) entry plus the L2
/// penalty of `net`.
pub fn bce_l2_loss<F: Scalar>(probabilities: &[F], labels: &[F], net: &MudNetwork<F>) -> Result<f64> {
    Ok(bce_loss(probabilities, labels)? + net.l2_penalty())
}

/// Mean clipped binary cross-entropy.
pub fn bce_loss<F: Scalar>(probabilities: &[F], labels: &[F]) -> Result<f64> {
    if probabilities.len() != labels.len() {
        return Err(Error::mismatch("label count", probabilities.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let s: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.to_f64_lossy().clamp(BCE_CLIP, 1.0 - BCE_CLIP);
            let y = y.to_f64_lossy();
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(s / labels.len() as f64)
}
