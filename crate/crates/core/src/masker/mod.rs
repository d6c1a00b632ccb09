//! A small text-conditioned mask decoder.
//!
//! A seeded random encoder, frozen at initialization, turns image patches into
//! per-block token activations and a summary (CLS) vector. The trainable
//! decoder walks the encoder blocks in reverse: each block concatenates its
//! running activation with the matching encoder activation and the broadcast
//! CLS vector, mixes them back to the model width, and applies FiLM
//! modulation derived from the projected hate-span embeddings. A linear head
//! emits one logit per pixel of each patch.

mod checkpoint;
pub mod synthetic;
mod train;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attention::{check_tau, Heatmap};
use crate::error::{Error, Result};
use crate::numerics::{Graph, NodeId, Tensor, Value};
use crate::raster::{BinaryMask, ImageRGB8};
use crate::textproc::{normalize_word, HateSpan};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use train::{gradient_check, train, train_with, LossKind, TrainBatch, TrainLog, TrainOptions};

pub const DEFAULT_PREDICT_TAU: f32 = 0.5;
const INIT_SCALE: f32 = 0.1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskerConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub embed_dim: usize,
    pub encoder_blocks: usize,
    pub decoder_blocks: usize,
    pub span_embed_dim: usize,
    pub seed: u64,
}

impl Default for MaskerConfig {
    fn default() -> Self {
        Self {
            image_size: 32,
            patch_size: 4,
            embed_dim: 32,
            encoder_blocks: 2,
            decoder_blocks: 2,
            span_embed_dim: 32,
            seed: 42,
        }
    }
}

impl MaskerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("image_size", self.image_size),
            ("patch_size", self.patch_size),
            ("embed_dim", self.embed_dim),
            ("encoder_blocks", self.encoder_blocks),
            ("span_embed_dim", self.span_embed_dim),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.image_size.is_multiple_of(self.patch_size) {
            return Err(Error::Config(format!(
                "image_size {} is not divisible by patch_size {}",
                self.image_size, self.patch_size
            )));
        }
        if self.decoder_blocks != self.encoder_blocks {
            return Err(Error::Config(format!(
                "decoder_blocks {} must equal encoder_blocks {}",
                self.decoder_blocks, self.encoder_blocks
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn tokens(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn patch_dim(&self) -> usize {
        3 * self.patch_size * self.patch_size
    }

    pub fn patch_pixels(&self) -> usize {
        self.patch_size * self.patch_size
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrozenEncoder {
    /// `[patch_dim, embed_dim]`
    pub patch_proj: Tensor,
    /// One `[embed_dim, embed_dim]` mixer per block.
    pub mixers: Vec<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilmGenerator {
    /// `[embed_dim, embed_dim]`; gamma = 1 + gamma_w * c + gamma_b
    pub gamma_w: Tensor,
    pub gamma_b: Tensor,
    /// `[embed_dim, embed_dim]`; beta = beta_w * c + beta_b
    pub beta_w: Tensor,
    pub beta_b: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderBlock {
    /// `[3 * embed_dim, embed_dim]` over (running, skip, cls) channels.
    pub mix: Tensor,
    pub film: FilmGenerator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskerModel {
    pub config: MaskerConfig,
    pub encoder: FrozenEncoder,
    /// `[embed_dim, span_embed_dim]`
    pub projection: Tensor,
    pub decoder: Vec<DecoderBlock>,
    /// `[embed_dim, patch_pixels]`
    pub head: Tensor,
    /// `[patch_pixels]`
    pub head_bias: Tensor,
}

fn uniform(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> Result<Tensor> {
    let n = dims.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-INIT_SCALE..INIT_SCALE)).collect();
    Tensor::new(dims, data)
}

/// Builds a model with every weight drawn from a seeded uniform(-0.1, 0.1).
pub fn init(config: &MaskerConfig) -> Result<MaskerModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.embed_dim;
    let patch_proj = uniform(&mut rng, vec![config.patch_dim(), d])?;
    let mixers = (0..config.encoder_blocks)
        .map(|_| uniform(&mut rng, vec![d, d]))
        .collect::<Result<_>>()?;
    let projection = uniform(&mut rng, vec![d, config.span_embed_dim])?;
    let decoder = (0..config.decoder_blocks)
        .map(|_| {
            Ok(DecoderBlock {
                mix: uniform(&mut rng, vec![3 * d, d])?,
                film: FilmGenerator {
                    gamma_w: uniform(&mut rng, vec![d, d])?,
                    gamma_b: uniform(&mut rng, vec![d])?,
                    beta_w: uniform(&mut rng, vec![d, d])?,
                    beta_b: uniform(&mut rng, vec![d])?,
                },
            })
        })
        .collect::<Result<_>>()?;
    let head = uniform(&mut rng, vec![d, config.patch_pixels()])?;
    let head_bias = uniform(&mut rng, vec![config.patch_pixels()])?;
    Ok(MaskerModel {
        config: config.clone(),
        encoder: FrozenEncoder { patch_proj, mixers },
        projection,
        decoder,
        head,
        head_bias,
    })
}

impl MaskerModel {
    pub fn frozen_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("encoder.patch_proj".to_string(), &self.encoder.patch_proj)];
        for (i, m) in self.encoder.mixers.iter().enumerate() {
            out.push((format!("encoder.mixer.{i}"), m));
        }
        out
    }

    pub fn trainable_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("projection".to_string(), &self.projection)];
        for (i, b) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{i}.mix"), &b.mix));
            out.push((format!("decoder.{i}.film.gamma_w"), &b.film.gamma_w));
            out.push((format!("decoder.{i}.film.gamma_b"), &b.film.gamma_b));
            out.push((format!("decoder.{i}.film.beta_w"), &b.film.beta_w));
            out.push((format!("decoder.{i}.film.beta_b"), &b.film.beta_b));
        }
        out.push(("head".to_string(), &self.head));
        out.push(("head_bias".to_string(), &self.head_bias));
        out
    }

    /// Trainable parameters in the same order as [`Self::trainable_params`].
    pub(crate) fn trainable_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.projection];
        for b in &mut self.decoder {
            out.push(&mut b.mix);
            out.push(&mut b.film.gamma_w);
            out.push(&mut b.film.gamma_b);
            out.push(&mut b.film.beta_w);
            out.push(&mut b.film.beta_b);
        }
        out.push(&mut self.head);
        out.push(&mut self.head_bias);
        out
    }

    pub fn all_params(&self) -> Vec<(String, &Tensor)> {
        let mut all = self.frozen_params();
        all.extend(self.trainable_params());
        all
    }

    pub fn param_count(&self) -> usize {
        self.all_params().iter().map(|(_, t)| t.len()).sum()
    }

    /// SHA-256 over the frozen encoder's dims and raw f32 bits.
    pub fn encoder_checksum(&self) -> String {
        checksum(self.frozen_params().iter().map(|(_, t)| *t))
    }
}

pub(crate) fn checksum<'a>(tensors: impl Iterator<Item = &'a Tensor>) -> String {
    let mut h = Sha256::new();
    for t in tensors {
        for &d in t.dims() {
            h.update((d as u64).to_le_bytes());
        }
        for v in t.data() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Hashed bag-of-words embedding: each normalized word adds a signed unit to
/// one coordinate; the profile is L2-normalized.
pub fn embed_span(span: &HateSpan, dim: usize) -> Result<Vec<f32>> {
    if span.words.is_empty() {
        return Err(Error::arg("cannot embed an empty span"));
    }
    if dim == 0 {
        return Err(Error::arg("embedding dimension must be positive"));
    }
    let mut profile = vec![0.0f64; dim];
    for w in &span.words {
        let (idx, sign) = word_slot(&normalize_word(w), dim);
        profile[idx] += sign;
    }
    let norm = profile.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        // colliding words cancelled out; use the first word's slot
        let (idx, sign) = word_slot(&normalize_word(&span.words[0]), dim);
        profile[idx] = sign;
        return Ok(profile.iter().map(|&v| v as f32).collect());
    }
    Ok(profile.iter().map(|&v| (v / norm) as f32).collect())
}

/// Coordinate and sign for a word: the first eight SHA-256 bytes pick the
/// coordinate, the low bit of the ninth byte the sign.
pub fn word_slot(word: &str, dim: usize) -> (usize, f64) {
    let digest = Sha256::digest(word.as_bytes());
    let idx = u64::from_le_bytes(digest[..8].try_into().unwrap()) % dim as u64;
    let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
    (idx as usize, sign)
}

/// Element-wise mean of span embeddings, accumulated in index order.
pub fn pool_embeddings(embeddings: &[Vec<f32>]) -> Result<Vec<f32>> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::arg("no span embeddings to project"))?;
    let dim = first.len();
    if let Some(bad) = embeddings.iter().find(|e| e.len() != dim) {
        return Err(Error::arg(format!(
            "span embeddings differ in width: {dim} vs {}",
            bad.len()
        )));
    }
    let mut acc = vec![0.0f64; dim];
    for e in embeddings {
        acc.iter_mut().zip(e).for_each(|(a, &v)| *a += f64::from(v));
    }
    let k = embeddings.len() as f64;
    Ok(acc.iter().map(|&v| (v / k) as f32).collect())
}

fn bind(bindings: &mut BTreeMap<NodeId, Value>, id: NodeId, t: &Tensor) {
    bindings.insert(id, Value::from(t));
}

/// Condition vector: the learnable projection of the mean span embedding.
pub fn project_spans(embeddings: &[Vec<f32>], model: &MaskerModel) -> Result<Tensor> {
    let pooled = pool_embeddings(embeddings)?;
    if pooled.len() != model.config.span_embed_dim {
        return Err(Error::shape(
            "projection",
            format!(
                "span embeddings have width {}, model expects {}",
                pooled.len(),
                model.config.span_embed_dim
            ),
        ));
    }
    let mut g = Graph::new();
    let w = g.leaf("projection");
    let x = g.leaf("pooled");
    let out = g.matmul(w, x);
    let mut b = BTreeMap::new();
    bind(&mut b, w, &model.projection);
    bind(&mut b, x, &Tensor::vector(pooled)?);
    g.eval(&b)?.tensor(out)
}

/// Graph nodes for one block's FiLM generator.
struct FilmNodes {
    gamma_w: NodeId,
    gamma_b: NodeId,
    beta_w: NodeId,
    beta_b: NodeId,
}

impl FilmNodes {
    fn declare(g: &mut Graph, block: usize) -> Self {
        Self {
            gamma_w: g.leaf(format!("decoder.{block}.film.gamma_w")),
            gamma_b: g.leaf(format!("decoder.{block}.film.gamma_b")),
            beta_w: g.leaf(format!("decoder.{block}.film.beta_w")),
            beta_b: g.leaf(format!("decoder.{block}.film.beta_b")),
        }
    }

    /// Returns (gamma, beta) nodes; `ones` is a constant all-ones leaf.
    fn params(&self, g: &mut Graph, condition: NodeId, ones: NodeId) -> (NodeId, NodeId) {
        let gw = g.matmul(self.gamma_w, condition);
        let gw = g.add(gw, self.gamma_b);
        let gamma = g.add(ones, gw);
        let bw = g.matmul(self.beta_w, condition);
        let beta = g.add(bw, self.beta_b);
        (gamma, beta)
    }

    fn bind(&self, b: &mut BTreeMap<NodeId, Value>, film: &FilmGenerator) {
        bind(b, self.gamma_w, &film.gamma_w);
        bind(b, self.gamma_b, &film.gamma_b);
        bind(b, self.beta_w, &film.beta_w);
        bind(b, self.beta_b, &film.beta_b);
    }
}

/// FiLM-modulates `activation` (`[n, embed_dim]` or `[embed_dim]`) with the
/// generator of decoder block `block_index`.
pub fn film(
    activation: &Tensor,
    condition: &Tensor,
    block_index: usize,
    model: &MaskerModel,
) -> Result<Tensor> {
    let block = model.decoder.get(block_index).ok_or_else(|| {
        Error::arg(format!(
            "block {block_index} out of range for {} decoder blocks",
            model.decoder.len()
        ))
    })?;
    let d = model.config.embed_dim;
    let mut g = Graph::new();
    let x = g.leaf("activation");
    let c = g.leaf("condition");
    let ones = g.leaf("ones");
    let nodes = FilmNodes::declare(&mut g, block_index);
    let (gamma, beta) = nodes.params(&mut g, c, ones);
    let out = g.scale_shift(x, gamma, beta);
    let mut b = BTreeMap::new();
    bind(&mut b, x, activation);
    bind(&mut b, c, condition);
    bind(&mut b, ones, &Tensor::full(vec![d], 1.0)?);
    nodes.bind(&mut b, &block.film);
    g.eval(&b)?.tensor(out)
}

/// Patch rows `[tokens, patch_dim]` with channels scaled to `[-1, 1]`;
/// each row is laid out as (patch row, patch column, channel).
pub fn patchify(config: &MaskerConfig, image: &ImageRGB8) -> Result<Tensor> {
    let s = config.image_size;
    if image.width() != s || image.height() != s {
        return Err(Error::arg(format!(
            "image is {}x{}, model expects {s}x{s}",
            image.width(),
            image.height()
        )));
    }
    let (p, grid) = (config.patch_size, config.grid());
    let mut data = Vec::with_capacity(config.tokens() * config.patch_dim());
    for gy in 0..grid {
        for gx in 0..grid {
            for py in 0..p {
                for px in 0..p {
                    let rgb = image.get(gx * p + px, gy * p + py);
                    data.extend(rgb.iter().map(|&c| f32::from(c) / 127.5 - 1.0));
                }
            }
        }
    }
    Tensor::matrix(config.tokens(), config.patch_dim(), data)
}

/// Frozen encoder outputs for one image.
#[derive(Clone, Debug)]
pub struct Encoded {
    /// Input activation of each encoder block, `[tokens, embed_dim]`.
    pub skips: Vec<Value>,
    /// Final encoder activation.
    pub top: Value,
    /// Mean over tokens of `top`, repeated on every row.
    pub cls_rows: Value,
}

impl FrozenEncoder {
    pub fn encode(&self, config: &MaskerConfig, image: &ImageRGB8) -> Result<Encoded> {
        let patches = patchify(config, image)?;
        let mut g = Graph::new();
        let x = g.leaf("patches");
        let wp = g.leaf("encoder.patch_proj");
        let mut act = g.matmul(x, wp);
        let mut acts = vec![act];
        let mut mixers = Vec::new();
        for i in 0..self.mixers.len() {
            let w = g.leaf(format!("encoder.mixer.{i}"));
            mixers.push(w);
            let mixed = g.matmul(act, w);
            let r = g.relu(mixed);
            act = g.add(act, r);
            acts.push(act);
        }
        let mut b = BTreeMap::new();
        bind(&mut b, x, &patches);
        bind(&mut b, wp, &self.patch_proj);
        for (id, t) in mixers.iter().zip(&self.mixers) {
            bind(&mut b, *id, t);
        }
        let eval = g.eval(&b)?;
        let top = eval.value(act).clone();
        let (n, d) = (config.tokens(), config.embed_dim);
        let mut cls = vec![0.0f64; d];
        for row in top.data.chunks_exact(d) {
            cls.iter_mut().zip(row).for_each(|(c, v)| *c += v);
        }
        cls.iter_mut().for_each(|c| *c /= n as f64);
        let cls_rows = Value::new(vec![n, d], cls.repeat(n))?;
        let skips = acts[..self.mixers.len()]
            .iter()
            .map(|&id| eval.value(id).clone())
            .collect();
        Ok(Encoded {
            skips,
            top,
            cls_rows,
        })
    }
}

/// The decoder as a graph. Leaves are split into per-instance constants and
/// trainable parameters, in [`MaskerModel::trainable_params`] order.
pub(crate) struct DecoderGraph {
    pub graph: Graph,
    top: NodeId,
    skips: Vec<NodeId>,
    cls_rows: NodeId,
    pooled: NodeId,
    ones: NodeId,
    ones_head: NodeId,
    pub params: Vec<NodeId>,
    pub logits: NodeId,
}

impl DecoderGraph {
    pub fn build(config: &MaskerConfig) -> Self {
        let blocks = config.decoder_blocks;
        let mut g = Graph::new();
        let top = g.leaf("encoder.top");
        let skips: Vec<NodeId> = (0..blocks).map(|i| g.leaf(format!("encoder.skip.{i}"))).collect();
        let cls_rows = g.leaf("encoder.cls");
        let pooled = g.leaf("spans.pooled");
        let ones = g.leaf("ones");
        let ones_head = g.leaf("ones.head");

        let projection = g.leaf("projection");
        let mut params = vec![projection];
        let condition = g.matmul(projection, pooled);

        let mut act = top;
        for j in 0..blocks {
            let mix = g.leaf(format!("decoder.{j}.mix"));
            let film = FilmNodes::declare(&mut g, j);
            params.extend([mix, film.gamma_w, film.gamma_b, film.beta_w, film.beta_b]);
            // deepest encoder activation pairs with the first decoder block
            let skip = skips[blocks - 1 - j];
            let joined = g.concat(&[act, skip, cls_rows]);
            let mixed = g.matmul(joined, mix);
            let (gamma, beta) = film.params(&mut g, condition, ones);
            let modulated = g.scale_shift(mixed, gamma, beta);
            let r = g.relu(modulated);
            act = g.add(act, r);
        }
        let head = g.leaf("head");
        let head_bias = g.leaf("head_bias");
        params.extend([head, head_bias]);
        let projected = g.matmul(act, head);
        let logits = g.scale_shift(projected, ones_head, head_bias);
        Self {
            graph: g,
            top,
            skips,
            cls_rows,
            pooled,
            ones,
            ones_head,
            params,
            logits,
        }
    }

    pub fn bindings(
        &self,
        model: &MaskerModel,
        encoded: &Encoded,
        pooled: &[f32],
    ) -> Result<BTreeMap<NodeId, Value>> {
        let cfg = &model.config;
        if pooled.len() != cfg.span_embed_dim {
            return Err(Error::shape(
                "spans.pooled",
                format!("width {} vs span_embed_dim {}", pooled.len(), cfg.span_embed_dim),
            ));
        }
        let mut b = BTreeMap::new();
        b.insert(self.top, encoded.top.clone());
        for (id, v) in self.skips.iter().zip(&encoded.skips) {
            b.insert(*id, v.clone());
        }
        b.insert(self.cls_rows, encoded.cls_rows.clone());
        b.insert(
            self.pooled,
            Value::new(vec![pooled.len()], pooled.iter().map(|&v| f64::from(v)).collect())?,
        );
        b.insert(self.ones, Value::new(vec![cfg.embed_dim], vec![1.0; cfg.embed_dim])?);
        b.insert(
            self.ones_head,
            Value::new(vec![cfg.patch_pixels()], vec![1.0; cfg.patch_pixels()])?,
        );
        for (id, (_, t)) in self.params.iter().zip(model.trainable_params()) {
            bind(&mut b, *id, t);
        }
        Ok(b)
    }
}

/// Maps token-major logits `[tokens, patch_pixels]` to row-major pixel order.
pub(crate) fn token_to_pixel_index(config: &MaskerConfig) -> Vec<usize> {
    let (p, grid, s) = (config.patch_size, config.grid(), config.image_size);
    let mut map = vec![0; s * s];
    for gy in 0..grid {
        for gx in 0..grid {
            for py in 0..p {
                for px in 0..p {
                    let tok = (gy * grid + gx) * p * p + py * p + px;
                    map[tok] = (gy * p + py) * s + gx * p + px;
                }
            }
        }
    }
    map
}

/// Per-pixel logits in row-major image order.
pub fn logits(model: &MaskerModel, image: &ImageRGB8, embeddings: &[Vec<f32>]) -> Result<Vec<f64>> {
    let encoded = model.encoder.encode(&model.config, image)?;
    let pooled = pool_embeddings(embeddings)?;
    let dg = DecoderGraph::build(&model.config);
    let eval = dg.graph.eval(&dg.bindings(model, &encoded, &pooled)?)?;
    let tok = &eval.value(dg.logits).data;
    let map = token_to_pixel_index(&model.config);
    let mut out = vec![0.0; tok.len()];
    for (t, &px) in map.iter().enumerate() {
        out[px] = tok[t];
    }
    Ok(out)
}

/// Largest f32 below 1; heatmap values are capped here so `tau = 1` never fires.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

pub fn predict_embedded(
    model: &MaskerModel,
    image: &ImageRGB8,
    embeddings: &[Vec<f32>],
    tau: f32,
) -> Result<(BinaryMask, Heatmap)> {
    check_tau(tau)?;
    let z = logits(model, image, embeddings)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("masker logits".into()));
    }
    let s = model.config.image_size;
    let probs: Vec<f32> = z
        .iter()
        .map(|&v| (crate::numerics::autodiff::sigmoid(v) as f32).min(BELOW_ONE))
        .collect();
    let bits = probs.iter().map(|&p| p >= tau).collect();
    let heat = Heatmap::from_tensor(Tensor::matrix(s, s, probs)?)?;
    Ok((BinaryMask::new(s, s, bits)?, heat))
}

/// Predicts the hateful-region mask for `image` conditioned on `spans`.
pub fn predict(
    model: &MaskerModel,
    image: &ImageRGB8,
    spans: &[HateSpan],
    tau: f32,
) -> Result<(BinaryMask, Heatmap)> {
    let embeddings = spans
        .iter()
        .map(|s| embed_span(s, model.config.span_embed_dim))
        .collect::<Result<Vec<_>>>()?;
    predict_embedded(model, image, &embeddings, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(words: &[&str]) -> HateSpan {
        HateSpan {
            start: 0,
            end: words.len(),
            words: words.iter().map(|w| w.to_string()).collect(),
        }
    }

    #[test]
    fn config_validation() {
        let mut c = MaskerConfig::default();
        assert!(c.validate().is_ok());
        c.patch_size = 5;
        assert!(matches!(init(&c), Err(Error::Config(_))));
        let c = MaskerConfig {
            decoder_blocks: 3,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn same_seed_same_model() {
        let c = MaskerConfig {
            seed: 7,
            ..Default::default()
        };
        let a = init(&c).unwrap();
        let b = init(&c).unwrap();
        for ((_, x), (_, y)) in a.all_params().iter().zip(b.all_params()) {
            assert!(x.bit_eq(y));
        }
        let other = init(&MaskerConfig { seed: 8, ..c }).unwrap();
        assert_ne!(a.projection, other.projection);
        assert_ne!(a.encoder_checksum(), other.encoder_checksum());
    }

    #[test]
    fn weights_in_init_range() {
        let m = init(&MaskerConfig::default()).unwrap();
        for (_, t) in m.all_params() {
            assert!(t.data().iter().all(|v| (-0.1..0.1).contains(v)));
        }
    }

    #[test]
    fn embedding_is_unit_and_deterministic() {
        let s = span(&["you", "Filthy", "rats!"]);
        let a = embed_span(&s, 32).unwrap();
        assert_eq!(a, embed_span(&s, 32).unwrap());
        let norm: f32 = a.iter().map(|v| v * v).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert!(embed_span(&span(&[]), 32).is_err());
    }

    #[test]
    fn pooling_rejects_bad_input() {
        assert!(pool_embeddings(&[]).is_err());
        assert!(pool_embeddings(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn film_rejects_bad_block_and_width() {
        let m = init(&MaskerConfig::default()).unwrap();
        let act = Tensor::zeros(vec![4, 32]).unwrap();
        let c = Tensor::zeros(vec![32]).unwrap();
        assert!(film(&act, &c, 2, &m).is_err());
        let narrow = Tensor::zeros(vec![4, 8]).unwrap();
        assert!(matches!(film(&narrow, &c, 0, &m), Err(Error::Shape { .. })));
    }

    #[test]
    fn wrong_image_size_rejected() {
        let m = init(&MaskerConfig::default()).unwrap();
        let img = ImageRGB8::filled(16, 16, [0, 0, 0]).unwrap();
        assert!(matches!(
            predict(&m, &img, &[span(&["x"])], 0.5),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn pixel_index_is_a_permutation() {
        let c = MaskerConfig {
            image_size: 8,
            patch_size: 2,
            ..Default::default()
        };
        let mut map = token_to_pixel_index(&c);
        map.sort_unstable();
        assert_eq!(map, (0..64).collect::<Vec<_>>());
    }
}
