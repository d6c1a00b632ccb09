use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    init, pool_embeddings, token_to_pixel_index, DecoderGraph, Encoded, MaskerConfig, MaskerModel,
};
use crate::error::{Error, Result};
use crate::numerics::autodiff::sigmoid;
use crate::numerics::gradcheck::{check_with, relu_margin, GradCheck, FD_EPSILON};
use crate::numerics::{NodeId, Tensor, Value};
use crate::raster::{BinaryMask, ImageRGB8};

#[derive(Clone, Debug)]
pub struct TrainBatch {
    pub images: Vec<ImageRGB8>,
    pub span_embeddings: Vec<Vec<Vec<f32>>>,
    pub truth_masks: Vec<BinaryMask>,
}

impl TrainBatch {
    pub fn validate(&self, config: &MaskerConfig) -> Result<()> {
        let n = self.images.len();
        if n == 0 || self.span_embeddings.len() != n || self.truth_masks.len() != n {
            return Err(Error::arg(format!(
                "batch lengths differ or are empty: {} images, {} span sets, {} masks",
                n,
                self.span_embeddings.len(),
                self.truth_masks.len()
            )));
        }
        let s = config.image_size;
        for (img, mask) in self.images.iter().zip(&self.truth_masks) {
            if img.width() != s || img.height() != s {
                return Err(Error::arg(format!(
                    "training image {}x{} but model expects {s}x{s}",
                    img.width(),
                    img.height()
                )));
            }
            if !mask.same_dims(s, s) {
                return Err(Error::arg("truth mask dims differ from image dims"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Mean binary cross-entropy between the sigmoid heatmap and the truth mask.
    #[default]
    Bce,
    /// One minus the soft (probabilistic) IoU.
    SoftIou,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub steps: usize,
    pub lr: f64,
    pub loss: LossKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean loss over the batch used at each step, before that step's update.
    pub losses: Vec<f64>,
}

/// Loss and its gradient with respect to each pixel logit.
fn loss_and_grad(kind: LossKind, logits: &[f64], truth: &[f64]) -> (f64, Vec<f64>) {
    let n = logits.len() as f64;
    match kind {
        LossKind::Bce => {
            let mut loss = 0.0;
            let grad = logits
                .iter()
                .zip(truth)
                .map(|(&z, &y)| {
                    // softplus(z) - y z, written to stay finite for large |z|
                    loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
                    (sigmoid(z) - y) / n
                })
                .collect();
            (loss / n, grad)
        }
        LossKind::SoftIou => {
            let p: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
            let inter: f64 = p.iter().zip(truth).map(|(p, y)| p * y).sum();
            let union: f64 = p.iter().zip(truth).map(|(p, y)| p + y - p * y).sum();
            let grad = p
                .iter()
                .zip(truth)
                .map(|(&p, &y)| {
                    let d_inter = y;
                    let d_union = 1.0 - y;
                    let dp = -(d_inter * union - inter * d_union) / (union * union);
                    dp * p * (1.0 - p)
                })
                .collect();
            (1.0 - inter / union, grad)
        }
    }
}

/// Per-instance state kept across steps: the frozen features never change.
struct Prepared {
    encoded: Encoded,
    pooled: Vec<f32>,
    truth_tokens: Vec<f64>,
}

fn prepare(model: &MaskerModel, batch: &TrainBatch) -> Result<Vec<Prepared>> {
    batch.validate(&model.config)?;
    let map = token_to_pixel_index(&model.config);
    batch
        .images
        .iter()
        .zip(&batch.span_embeddings)
        .zip(&batch.truth_masks)
        .map(|((img, spans), mask)| {
            let truth_tokens = map
                .iter()
                .map(|&px| if mask.bits()[px] { 1.0 } else { 0.0 })
                .collect();
            Ok(Prepared {
                encoded: model.encoder.encode(&model.config, img)?,
                pooled: pool_embeddings(spans)?,
                truth_tokens,
            })
        })
        .collect()
}

/// Gradients of the mean batch loss for every trainable parameter.
fn batch_gradients(
    model: &MaskerModel,
    dg: &DecoderGraph,
    prepared: &[Prepared],
    kind: LossKind,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut total = 0.0;
    let mut grads: Vec<Vec<f64>> = model
        .trainable_params()
        .iter()
        .map(|(_, t)| vec![0.0; t.len()])
        .collect();
    for inst in prepared {
        let b = dg.bindings(model, &inst.encoded, &inst.pooled)?;
        let eval = dg.graph.eval(&b)?;
        let (loss, seed) = loss_and_grad(kind, &eval.value(dg.logits).data, &inst.truth_tokens);
        total += loss;
        let g = eval.gradients_seeded(dg.logits, &seed)?;
        for (acc, id) in grads.iter_mut().zip(&dg.params) {
            acc.iter_mut().zip(&g[id].data).for_each(|(a, v)| *a += v);
        }
    }
    let k = prepared.len() as f64;
    grads.iter_mut().flatten().for_each(|v| *v /= k);
    Ok((total / k, grads))
}

/// Plain gradient descent on mean BCE, cycling through `batches`.
pub fn train(model: &mut MaskerModel, batches: &[TrainBatch], steps: usize, lr: f64) -> Result<TrainLog> {
    train_with(
        model,
        batches,
        &TrainOptions {
            steps,
            lr,
            loss: LossKind::Bce,
        },
        |_, _| {},
    )
}

/// Like [`train`], with a choice of loss and a per-step callback `(step, loss)`.
pub fn train_with(
    model: &mut MaskerModel,
    batches: &[TrainBatch],
    opts: &TrainOptions,
    mut on_step: impl FnMut(usize, f64),
) -> Result<TrainLog> {
    if opts.steps == 0 {
        return Err(Error::arg("steps must be at least 1"));
    }
    if !(opts.lr > 0.0 && opts.lr.is_finite()) {
        return Err(Error::arg(format!("learning rate {} must be positive", opts.lr)));
    }
    if batches.is_empty() {
        return Err(Error::arg("no training batches"));
    }
    let prepared = batches
        .iter()
        .map(|b| prepare(model, b))
        .collect::<Result<Vec<_>>>()?;
    let dg = DecoderGraph::build(&model.config);
    let mut log = TrainLog::default();
    for step in 0..opts.steps {
        let batch = &prepared[step % prepared.len()];
        let (loss, grads) = batch_gradients(model, &dg, batch, opts.loss)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss {loss} at step {step} (lr {}, previous loss {:?})",
                opts.lr,
                log.losses.last()
            )));
        }
        log.losses.push(loss);
        on_step(step, loss);
        for (param, grad) in model.trainable_params_mut().into_iter().zip(&grads) {
            let data = param
                .data()
                .iter()
                .zip(grad)
                .map(|(&p, &g)| (f64::from(p) - opts.lr * g) as f32)
                .collect();
            *param = Tensor::new(param.dims().to_vec(), data).map_err(|e| {
                Error::NonFinite(format!("parameter update at step {step}: {e}"))
            })?;
        }
    }
    Ok(log)
}

/// Finite-difference check of every trainable-parameter gradient on one
/// random instance of `config`, through the full decoder and loss.
pub fn gradient_check(config: &MaskerConfig, kind: LossKind) -> Result<GradCheck> {
    let model = init(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let dg = DecoderGraph::build(config);
    let s = config.image_size;
    let (bindings, truth) = loop {
        let px = (0..s * s).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let img = ImageRGB8::new(s, s, px)?;
        let encoded = model.encoder.encode(config, &img)?;
        let pooled: Vec<f32> = (0..config.span_embed_dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let truth: Vec<f64> = (0..s * s).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let b = dg.bindings(&model, &encoded, &pooled)?;
        // finite differences straddling a relu kink are meaningless; redraw
        if relu_margin(&dg.graph, &b)? > 10.0 * FD_EPSILON {
            break (b, truth);
        }
    };
    let eval = dg.graph.eval(&bindings)?;
    let (_, seed) = loss_and_grad(kind, &eval.value(dg.logits).data, &truth);
    let analytic: BTreeMap<NodeId, Value> = eval.gradients_seeded(dg.logits, &seed)?;
    check_with(&bindings, &dg.params, &analytic, |b| {
        let e = dg.graph.eval(b)?;
        Ok(loss_and_grad(kind, &e.value(dg.logits).data, &truth).0)
    })
}
