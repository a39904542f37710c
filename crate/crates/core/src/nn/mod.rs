//! The Sat-Unet segmentation network: an encoder/decoder convolutional
//! network with transposed-convolution upsampling, skip concatenation and a
//! sigmoid head emitting one probability channel.
//!
//! Block recipe: every convolution block is batch-norm → 3×3 conv → relu →
//! 3×3 conv → relu → dropout, except the first encoder block, which has no
//! dropout. Encoder widths double per block from `base_filters`; the
//! bottleneck reaches `base_filters · 2^depth`; decoder widths halve. At the
//! stock configuration (416 input, 32 base filters, depth 5) the network has
//! 11 major blocks, a 1024-channel bottleneck, and reports 59 layers under
//! the counting convention below.
//!
//! Layer counting convention: batch-norm, convolution, dropout, max-pool,
//! transposed convolution and skip concatenation each count as one layer;
//! activations and the input do not. Counting the input and the output
//! activation as rows, the way some framework summaries do, adds 2.

pub mod layers;
pub mod train;

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use train::{train, write_train_log, EpochStats, TrainOptions};

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, NormalSource};
use crate::tensor::Tensor;
use layers::{BatchNorm2d, Conv2d, ConvTranspose2d, Dropout, MaxPool2d, Param, Relu, Sigmoid};

/// Network scale and seeding. `input_size` must be divisible by 2^depth;
/// the bottleneck width is `base_filters · 2^depth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnetConfig {
    pub input_size: usize,
    pub base_filters: usize,
    pub depth: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for UnetConfig {
    /// Stock scale: 416-pixel tiles, 32 base filters, depth 5 (1024-channel
    /// bottleneck).
    fn default() -> Self {
        UnetConfig { input_size: 416, base_filters: 32, depth: 5, dropout_rate: 0.2, seed: 0 }
    }
}

impl UnetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        if self.base_filters == 0 {
            return Err(Error::InvalidConfig("base_filters must be at least 1".into()));
        }
        let div = 1usize << self.depth;
        if self.input_size == 0 || !self.input_size.is_multiple_of(div) {
            return Err(Error::InvalidConfig(format!(
                "input_size {} not divisible by 2^depth = {div}",
                self.input_size
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn bottleneck_width(&self) -> usize {
        self.base_filters << self.depth
    }
}

/// BN → conv → relu → conv → relu → optional dropout.
#[derive(Debug, Clone)]
struct ConvBlock {
    bn: BatchNorm2d,
    conv1: Conv2d,
    relu1: Relu,
    conv2: Conv2d,
    relu2: Relu,
    dropout: Option<Dropout>,
}

impl ConvBlock {
    fn new(in_ch: usize, out_ch: usize, dropout_rate: Option<f64>, init: &mut NormalSource) -> Self {
        ConvBlock {
            bn: BatchNorm2d::new(in_ch),
            conv1: Conv2d::new(in_ch, out_ch, 3, init),
            relu1: Relu::new(),
            conv2: Conv2d::new(out_ch, out_ch, 3, init),
            relu2: Relu::new(),
            dropout: dropout_rate.map(Dropout::new),
        }
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        let x = self.bn.infer(x);
        let x = self.relu1.infer(&self.conv1.infer(&x));
        // Dropout is identity at inference.
        self.relu2.infer(&self.conv2.infer(&x))
    }

    fn forward(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Tensor {
        let x = self.bn.forward(x);
        let x = self.relu1.forward(&self.conv1.forward(&x));
        let x = self.relu2.forward(&self.conv2.forward(&x));
        match &mut self.dropout {
            Some(d) => d.forward(&x, rng),
            None => x,
        }
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let grad = match &mut self.dropout {
            Some(d) => d.backward(grad),
            None => grad.clone(),
        };
        let grad = self.conv2.backward(&self.relu2.backward(&grad));
        let grad = self.conv1.backward(&self.relu1.backward(&grad));
        self.bn.backward(&grad)
    }

    fn layer_count(&self) -> usize {
        // bn + 2 convs + optional dropout
        3 + usize::from(self.dropout.is_some())
    }

    fn for_each_param<F: FnMut(&Param)>(&self, f: &mut F) {
        f(&self.bn.gamma);
        f(&self.bn.beta);
        f(&self.conv1.weight);
        f(&self.conv1.bias);
        f(&self.conv2.weight);
        f(&self.conv2.bias);
    }

    fn for_each_param_mut<F: FnMut(&mut Param)>(&mut self, f: &mut F) {
        f(&mut self.bn.gamma);
        f(&mut self.bn.beta);
        f(&mut self.conv1.weight);
        f(&mut self.conv1.bias);
        f(&mut self.conv2.weight);
        f(&mut self.conv2.bias);
    }

    fn for_each_state<F: FnMut(&[f64])>(&self, f: &mut F) {
        f(self.bn.gamma.value.data());
        f(self.bn.beta.value.data());
        f(&self.bn.running_mean);
        f(&self.bn.running_var);
        f(self.conv1.weight.value.data());
        f(self.conv1.bias.value.data());
        f(self.conv2.weight.value.data());
        f(self.conv2.bias.value.data());
    }

    fn for_each_state_mut<F: FnMut(&mut [f64])>(&mut self, f: &mut F) {
        f(self.bn.gamma.value.data_mut());
        f(self.bn.beta.value.data_mut());
        f(&mut self.bn.running_mean);
        f(&mut self.bn.running_var);
        f(self.conv1.weight.value.data_mut());
        f(self.conv1.bias.value.data_mut());
        f(self.conv2.weight.value.data_mut());
        f(self.conv2.bias.value.data_mut());
    }
}

#[derive(Debug, Clone)]
struct EncoderStage {
    block: ConvBlock,
    pool: MaxPool2d,
}

#[derive(Debug, Clone)]
struct DecoderStage {
    up: ConvTranspose2d,
    block: ConvBlock,
    /// Channel count of the skip tensor, for splitting the concat gradient.
    skip_channels: usize,
}

/// The assembled network. Training passes mutate per-layer caches; inference
/// is immutable and shareable.
#[derive(Debug, Clone)]
pub struct SatUnet {
    pub config: UnetConfig,
    encoders: Vec<EncoderStage>,
    bottleneck: ConvBlock,
    decoders: Vec<DecoderStage>,
    head: Conv2d,
    head_act: Sigmoid,
    dropout_rng: ChaCha8Rng,
    /// Skip activations stored by the last training forward.
    skip_grads: Vec<Option<Tensor>>,
    forward_ready: bool,
}

/// Build the network from its configuration; see the module docs for the
/// block recipe.
pub fn build_sat_unet(config: &UnetConfig) -> Result<SatUnet> {
    config.validate()?;
    let mut init = NormalSource::new(derive_seed(config.seed, "init"));
    let f = config.base_filters;
    let d = config.depth;

    let mut encoders = Vec::with_capacity(d);
    for i in 0..d {
        let in_ch = if i == 0 { 3 } else { f << (i - 1) };
        let out_ch = f << i;
        // No dropout in the first down-sampling block.
        let rate = if i == 0 { None } else { Some(config.dropout_rate) };
        encoders.push(EncoderStage {
            block: ConvBlock::new(in_ch, out_ch, rate, &mut init),
            pool: MaxPool2d::new(),
        });
    }

    let bottleneck =
        ConvBlock::new(f << (d - 1), f << d, Some(config.dropout_rate), &mut init);

    let mut decoders = Vec::with_capacity(d);
    for i in 0..d {
        let in_ch = f << (d - i);
        let out_ch = f << (d - i - 1);
        decoders.push(DecoderStage {
            up: ConvTranspose2d::new(in_ch, out_ch, &mut init),
            // Concatenated input: skip (out_ch) + upsampled (out_ch).
            block: ConvBlock::new(2 * out_ch, out_ch, Some(config.dropout_rate), &mut init),
            skip_channels: out_ch,
        });
    }

    let head = Conv2d::new(f, 1, 1, &mut init);

    Ok(SatUnet {
        config: *config,
        encoders,
        bottleneck,
        decoders,
        head,
        head_act: Sigmoid::new(),
        dropout_rng: rng_from_seed(derive_seed(config.seed, "dropout")),
        skip_grads: Vec::new(),
        forward_ready: false,
    })
}

impl SatUnet {
    /// Major blocks: depth down-sampling + 1 intermediate + depth up-sampling.
    pub fn block_count(&self) -> usize {
        2 * self.config.depth + 1
    }

    /// Layers under the documented convention (batch-norm, conv, dropout,
    /// pool, transposed conv, concat).
    pub fn layer_count(&self) -> usize {
        let enc: usize =
            self.encoders.iter().map(|e| e.block.layer_count() + 1).sum(); // + pool
        let dec: usize =
            self.decoders.iter().map(|s| s.block.layer_count() + 2).sum(); // + convT + concat
        enc + self.bottleneck.layer_count() + dec + 1 // + head conv
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let [_, c, h, w] = batch.shape();
        let s = self.config.input_size;
        if c != 3 || h != s || w != s {
            return Err(Error::ShapeMismatch {
                expected: format!("(n, 3, {s}, {s})"),
                got: format!("{:?}", batch.shape()),
            });
        }
        Ok(())
    }

    /// Forward pass. With `training` set, dropout and batch statistics are
    /// active and the pass stores what [`SatUnet::backward`] needs; without
    /// it, inference is deterministic and does not mutate the network.
    pub fn forward(&mut self, batch: &Tensor, training: bool) -> Result<Tensor> {
        if !training {
            return self.infer(batch);
        }
        self.check_input(batch)?;
        let depth = self.config.depth;
        let mut skips: Vec<Tensor> = Vec::with_capacity(depth);
        let mut x = batch.clone();
        for enc in &mut self.encoders {
            let pre_pool = enc.block.forward(&x, &mut self.dropout_rng);
            x = enc.pool.forward(&pre_pool);
            skips.push(pre_pool);
        }
        x = self.bottleneck.forward(&x, &mut self.dropout_rng);
        for (i, dec) in self.decoders.iter_mut().enumerate() {
            let up = dec.up.forward(&x);
            let skip = &skips[depth - 1 - i];
            let cat = Tensor::concat_channels(skip, &up)?;
            x = dec.block.forward(&cat, &mut self.dropout_rng);
        }
        let logits = self.head.forward(&x);
        let out = self.head_act.forward(&logits);
        self.skip_grads = vec![None; depth];
        self.forward_ready = true;
        Ok(out)
    }

    /// Immutable inference: running batch-norm statistics, no dropout.
    pub fn infer(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let depth = self.config.depth;
        let mut skips: Vec<Tensor> = Vec::with_capacity(depth);
        let mut x = batch.clone();
        for enc in &self.encoders {
            let pre_pool = enc.block.infer(&x);
            x = enc.pool.infer(&pre_pool);
            skips.push(pre_pool);
        }
        x = self.bottleneck.infer(&x);
        for (i, dec) in self.decoders.iter().enumerate() {
            let up = dec.up.infer(&x);
            let cat = Tensor::concat_channels(&skips[depth - 1 - i], &up)?;
            x = dec.block.infer(&cat);
        }
        Ok(self.head_act.infer(&self.head.infer(&x)))
    }

    /// Backpropagate `loss_grad` (gradient of the loss w.r.t. the network
    /// output) through the stored training-mode forward pass. Gradients
    /// accumulate on every parameter; call [`SatUnet::zero_grads`] between
    /// batches.
    pub fn backward(&mut self, loss_grad: &Tensor) -> Result<()> {
        if !self.forward_ready {
            return Err(Error::NoForwardPass);
        }
        self.forward_ready = false;
        let depth = self.config.depth;

        let grad = self.head_act.backward(loss_grad);
        let mut grad = self.head.backward(&grad);

        // Decoder stages in reverse; stash each skip gradient for the
        // matching encoder.
        for i in (0..depth).rev() {
            let dec = &mut self.decoders[i];
            let grad_cat = dec.block.backward(&grad);
            let (skip_grad, up_grad) = grad_cat.split_channels(dec.skip_channels);
            self.skip_grads[depth - 1 - i] = Some(skip_grad);
            grad = dec.up.backward(&up_grad);
        }

        grad = self.bottleneck.backward(&grad);

        for i in (0..depth).rev() {
            let enc = &mut self.encoders[i];
            let mut pre_pool_grad = enc.pool.backward(&grad);
            if let Some(skip) = self.skip_grads[i].take() {
                pre_pool_grad.add_assign(&skip)?;
            }
            grad = enc.block.backward(&pre_pool_grad);
        }
        Ok(())
    }

    pub fn for_each_param<F: FnMut(&Param)>(&self, f: &mut F) {
        for enc in &self.encoders {
            enc.block.for_each_param(f);
        }
        self.bottleneck.for_each_param(f);
        for dec in &self.decoders {
            f(&dec.up.weight);
            f(&dec.up.bias);
            dec.block.for_each_param(f);
        }
        f(&self.head.weight);
        f(&self.head.bias);
    }

    pub fn for_each_param_mut<F: FnMut(&mut Param)>(&mut self, f: &mut F) {
        for enc in &mut self.encoders {
            enc.block.for_each_param_mut(f);
        }
        self.bottleneck.for_each_param_mut(f);
        for dec in &mut self.decoders {
            f(&mut dec.up.weight);
            f(&mut dec.up.bias);
            dec.block.for_each_param_mut(f);
        }
        f(&mut self.head.weight);
        f(&mut self.head.bias);
    }

    /// All persisted state (parameters plus batch-norm running statistics)
    /// in declaration order; this is the checkpoint layout.
    pub fn for_each_state<F: FnMut(&[f64])>(&self, f: &mut F) {
        for enc in &self.encoders {
            enc.block.for_each_state(f);
        }
        self.bottleneck.for_each_state(f);
        for dec in &self.decoders {
            f(dec.up.weight.value.data());
            f(dec.up.bias.value.data());
            dec.block.for_each_state(f);
        }
        f(self.head.weight.value.data());
        f(self.head.bias.value.data());
    }

    pub fn for_each_state_mut<F: FnMut(&mut [f64])>(&mut self, f: &mut F) {
        for enc in &mut self.encoders {
            enc.block.for_each_state_mut(f);
        }
        self.bottleneck.for_each_state_mut(f);
        for dec in &mut self.decoders {
            f(dec.up.weight.value.data_mut());
            f(dec.up.bias.value.data_mut());
            dec.block.for_each_state_mut(f);
        }
        f(self.head.weight.value.data_mut());
        f(self.head.bias.value.data_mut());
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_param(&mut |p| n += p.value.len());
        n
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_param(&mut |p| out.extend_from_slice(p.value.data()));
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        self.for_each_param_mut(&mut |p| {
            let n = p.value.len();
            p.value.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        });
        assert_eq!(off, flat.len(), "flat parameter vector length mismatch");
    }

    pub fn grads_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_param(&mut |p| out.extend_from_slice(p.grad.data()));
        out
    }

    pub fn zero_grads(&mut self) {
        self.for_each_param_mut(&mut |p| p.zero_grad());
    }

    pub fn grads_all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_param(&mut |p| ok &= p.grad.all_finite());
        ok
    }
}
