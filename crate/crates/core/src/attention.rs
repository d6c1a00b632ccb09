//! Cross-attention stacks to normalized heatmaps and binary masks.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bilinear_resize, tensor_read, Tensor};
use crate::raster::BinaryMask;

pub const DEFAULT_TAU: f32 = 0.4;

/// Per-token attention maps with dims `[tokens, layers, heads, timesteps, h, w]`.
#[derive(Clone, Debug)]
pub struct AttentionStack {
    maps: Tensor,
    tokens: Vec<String>,
    image_h: usize,
    image_w: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackMeta {
    pub tokens: Vec<String>,
    pub image_h: usize,
    pub image_w: usize,
}

impl AttentionStack {
    pub fn new(maps: Tensor, meta: StackMeta) -> Result<Self> {
        if maps.rank() != 6 {
            return Err(Error::Format(format!(
                "attention stack must be rank 6, got dims {:?}",
                maps.dims()
            )));
        }
        if maps.dims()[0] != meta.tokens.len() {
            return Err(Error::Metadata(format!(
                "metadata lists {} tokens, tensor has {}",
                meta.tokens.len(),
                maps.dims()[0]
            )));
        }
        if meta.image_h == 0 || meta.image_w == 0 {
            return Err(Error::Metadata("image dims must be positive".into()));
        }
        if let Some(v) = maps.data().iter().find(|&&v| v < 0.0) {
            return Err(Error::Domain(format!("negative attention value {v}")));
        }
        Ok(Self {
            maps,
            tokens: meta.tokens,
            image_h: meta.image_h,
            image_w: meta.image_w,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.image_h, self.image_w)
    }

    pub fn maps(&self) -> &Tensor {
        &self.maps
    }
}

pub fn load_stack(tensor_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<AttentionStack> {
    let maps = tensor_read(tensor_path)?;
    let meta_path = meta_path.as_ref();
    let raw = fs::read_to_string(meta_path).map_err(|source| Error::Read {
        path: meta_path.to_path_buf(),
        source,
    })?;
    let meta: StackMeta = serde_json::from_str(&raw)
        .map_err(|e| Error::Metadata(format!("{}: {e}", meta_path.display())))?;
    AttentionStack::new(maps, meta)
}

/// Per-pixel hate-attention intensity in `[0, 1]`, dims `[H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap(Tensor);

impl Heatmap {
    pub fn from_tensor(t: Tensor) -> Result<Self> {
        if t.rank() != 2 {
            return Err(Error::arg(format!("heatmap must be rank 2, got {:?}", t.dims())));
        }
        if let Some(v) = t.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("heatmap value {v} outside [0,1]")));
        }
        Ok(Self(t))
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Ok(Self(Tensor::zeros(vec![height, width])?))
    }

    pub fn height(&self) -> usize {
        self.0.dims()[0]
    }

    pub fn width(&self) -> usize {
        self.0.dims()[1]
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.0.at2(y, x)
    }

    pub fn values(&self) -> &[f32] {
        self.0.data()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// Gray levels `round(255 * v)`, halves rounded away from zero.
    pub fn gray_levels(&self) -> Vec<u8> {
        self.0.data().iter().map(|&v| (v * 255.0).round() as u8).collect()
    }
}

/// Sums the resized maps of every selected token over all layers, heads and
/// timesteps, then min-max normalizes. A flat sum gives the all-zero map.
pub fn aggregate(stack: &AttentionStack, selected: &[usize]) -> Result<Heatmap> {
    let selected: BTreeSet<usize> = selected.iter().copied().collect();
    if selected.is_empty() {
        return Err(Error::arg("no tokens selected"));
    }
    let dims = stack.maps.dims();
    if let Some(&bad) = selected.iter().find(|&&t| t >= dims[0]) {
        return Err(Error::arg(format!(
            "token index {bad} out of range for {} tokens",
            dims[0]
        )));
    }
    let (out_h, out_w) = (stack.image_h, stack.image_w);
    let tokens: Vec<usize> = selected.into_iter().collect();

    let per_token = |t: usize| -> Result<Vec<f64>> { token_sum(stack, t) };
    #[cfg(feature = "parallel")]
    let partials: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        tokens.par_iter().map(|&t| per_token(t)).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Vec<f64>> = tokens.iter().map(|&t| per_token(t)).collect::<Result<_>>()?;

    // token partials are reduced in ascending token order
    let mut sum = vec![0.0f64; out_h * out_w];
    for p in &partials {
        sum.iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    normalize(sum, out_h, out_w)
}

fn token_sum(stack: &AttentionStack, token: usize) -> Result<Vec<f64>> {
    let dims = stack.maps.dims();
    let (h, w) = (dims[4], dims[5]);
    let per_token: usize = dims[1..].iter().product();
    let maps_per_token = dims[1] * dims[2] * dims[3];
    let base = token * per_token;
    let data = stack.maps.data();
    let mut acc = vec![0.0f64; stack.image_h * stack.image_w];
    for m in 0..maps_per_token {
        let start = base + m * h * w;
        let map = Tensor::matrix(h, w, data[start..start + h * w].to_vec())?;
        let resized = bilinear_resize(&map, stack.image_h, stack.image_w)?;
        acc.iter_mut()
            .zip(resized.data())
            .for_each(|(a, &v)| *a += f64::from(v));
    }
    Ok(acc)
}

fn normalize(sum: Vec<f64>, h: usize, w: usize) -> Result<Heatmap> {
    let lo = sum.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Heatmap::zeros(h, w);
    }
    let span = hi - lo;
    let data = sum.iter().map(|&v| ((v - lo) / span) as f32).collect();
    Heatmap::from_tensor(Tensor::matrix(h, w, data)?)
}

pub fn binarize(h: &Heatmap, tau: f32) -> Result<BinaryMask> {
    check_tau(tau)?;
    let bits = h.values().iter().map(|&v| v >= tau).collect();
    BinaryMask::new(h.width(), h.height(), bits)
}

pub(crate) fn check_tau(tau: f32) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("threshold {tau} outside (0, 1]")))
    }
}

pub fn heatmap_gray_image(h: &Heatmap) -> GrayImage {
    let levels = h.gray_levels();
    GrayImage::from_fn(h.width() as u32, h.height() as u32, |x, y| {
        Luma([levels[y as usize * h.width() + x as usize]])
    })
}

pub fn export_gray(h: &Heatmap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    heatmap_gray_image(h)
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(source) => Error::Write {
                path: path.to_path_buf(),
                source,
            },
            other => Error::Image(other.to_string()),
        })
}
