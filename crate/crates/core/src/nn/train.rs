//! Mini-batch SGD training on the hybrid BCE + Dice loss, with a per-epoch
//! loss/Jaccard log. All shuffling flows from the options seed.

use std::path::Path;

use rand::Rng;

use crate::csvio;
use crate::error::{Error, Result};
use crate::loss;
use crate::raster::MaskRaster;
use crate::seed::{derive_seed, rng_from_seed};
use crate::tensor::Tensor;

use super::SatUnet;

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Classical momentum; 0 disables it.
    pub momentum: f64,
    /// Weight of the (1 − Dice) term in the hybrid loss.
    pub dice_weight: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 10,
            batch_size: 4,
            learning_rate: 0.05,
            momentum: 0.0,
            dice_weight: loss::DEFAULT_DICE_WEIGHT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub jaccard: f64,
}

pub const TRAIN_LOG_HEADER: &str = "epoch,loss,jaccard";

/// Train in place on (image, label-mask) pairs. The per-epoch Jaccard is
/// micro-aggregated over the epoch's training batches at threshold 0.5.
pub fn train(
    net: &mut SatUnet,
    dataset: &[(Tensor, MaskRaster)],
    opts: &TrainOptions,
) -> Result<Vec<EpochStats>> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training dataset".into()));
    }
    let s = net.config.input_size;
    let targets: Vec<Tensor> = dataset.iter().map(|(_, m)| m.to_target_tensor()).collect();
    for (i, ((img, _), target)) in dataset.iter().zip(targets.iter()).enumerate() {
        if img.shape() != [1, 3, s, s] || target.shape() != [1, 1, s, s] {
            return Err(Error::ShapeMismatch {
                expected: format!("sample {i}: (1,3,{s},{s}) image with (1,1,{s},{s}) mask"),
                got: format!("{:?} / {:?}", img.shape(), target.shape()),
            });
        }
    }

    let n = dataset.len();
    let batch_size = opts.batch_size.max(1).min(n);
    let mut shuffle_rng = rng_from_seed(derive_seed(opts.seed, "shuffle"));
    let mut velocity = if opts.momentum != 0.0 { vec![0.0; net.param_count()] } else { Vec::new() };

    let mut log = Vec::with_capacity(opts.epochs);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..opts.epochs {
        // Fisher-Yates from the dedicated shuffle stream.
        for i in (1..n).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut loss_sum = 0.0;
        let mut inter = 0usize;
        let mut union = 0usize;

        for (batch_no, chunk) in order.chunks(batch_size).enumerate() {
            let batch = stack(chunk.iter().map(|&i| &dataset[i].0), s, 3);
            let target = stack(chunk.iter().map(|&i| &targets[i]), s, 1);

            net.zero_grads();
            let out = net.forward(&batch, true)?;
            let batch_loss = loss::hybrid_loss_weighted(&out, &target, opts.dice_weight)?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_no, value: batch_loss });
            }
            let up = loss::hybrid_loss_grad_weighted(&out, &target, opts.dice_weight)?;
            net.backward(&up)?;
            if !net.grads_all_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_no, value: batch_loss });
            }
            sgd_step(net, opts, &mut velocity);

            loss_sum += batch_loss * chunk.len() as f64;
            for (&p, &y) in out.data().iter().zip(target.data().iter()) {
                let a = p > 0.5;
                let b = y > 0.5;
                inter += usize::from(a && b);
                union += usize::from(a || b);
            }
        }

        let jaccard = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        log.push(EpochStats { epoch, loss: loss_sum / n as f64, jaccard });
    }
    Ok(log)
}

fn stack<'a>(samples: impl Iterator<Item = &'a Tensor>, s: usize, ch: usize) -> Tensor {
    let samples: Vec<&Tensor> = samples.collect();
    let mut out = Tensor::zeros([samples.len(), ch, s, s]);
    let stride = ch * s * s;
    for (i, t) in samples.iter().enumerate() {
        out.data_mut()[i * stride..(i + 1) * stride].copy_from_slice(t.data());
    }
    out
}

fn sgd_step(net: &mut SatUnet, opts: &TrainOptions, velocity: &mut [f64]) {
    let lr = opts.learning_rate;
    if opts.momentum == 0.0 {
        net.for_each_param_mut(&mut |p| {
            for (v, &g) in p.value.data_mut().iter_mut().zip(p.grad.data().iter()) {
                *v -= lr * g;
            }
        });
    } else {
        let mu = opts.momentum;
        let mut off = 0;
        net.for_each_param_mut(&mut |p| {
            for (v, &g) in p.value.data_mut().iter_mut().zip(p.grad.data().iter()) {
                let vel = &mut velocity[off];
                *vel = mu * *vel + g;
                *v -= lr * *vel;
                off += 1;
            }
        });
    }
}

pub fn write_train_log(path: &Path, log: &[EpochStats], provenance: Option<&str>) -> Result<()> {
    let rows: Vec<String> =
        log.iter().map(|e| format!("{},{},{}", e.epoch, e.loss, e.jaccard)).collect();
    csvio::write_csv(path, provenance, TRAIN_LOG_HEADER, &rows)
}
