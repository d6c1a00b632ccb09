//! Two-step anonymizing blur: black out the masked pixels, then replace each
//! target pixel with the mean color of a box around it.

use crate::attention::{binarize, check_tau, Heatmap};
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ImageRGB8};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RedactionParams {
    /// Heatmap level at or above which a pixel is blacked out.
    pub tau_black: f32,
    /// Heatmap level at or above which a pixel is box-averaged.
    pub tau_avg: f32,
    /// Half-width of the averaging box.
    pub box_radius: usize,
}

impl Default for RedactionParams {
    fn default() -> Self {
        Self {
            tau_black: 0.4,
            tau_avg: 0.4,
            box_radius: 7,
        }
    }
}

impl RedactionParams {
    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau_black)?;
        check_tau(self.tau_avg)?;
        if self.tau_avg < self.tau_black {
            return Err(Error::arg(format!(
                "tau_avg {} must be >= tau_black {}",
                self.tau_avg, self.tau_black
            )));
        }
        if self.box_radius == 0 {
            return Err(Error::arg("box_radius must be at least 1"));
        }
        Ok(())
    }
}

fn check_dims(img: &ImageRGB8, mask: &BinaryMask) -> Result<()> {
    if mask.same_dims(img.width(), img.height()) {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "mask {}x{} does not match image {}x{}",
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )))
    }
}

pub fn blackout(img: &ImageRGB8, mask: &BinaryMask) -> Result<ImageRGB8> {
    check_dims(img, mask)?;
    let mut out = img.clone();
    for (px, &on) in out.pixels_mut().iter_mut().zip(mask.bits()) {
        if on {
            *px = [0, 0, 0];
        }
    }
    Ok(out)
}

/// Replaces every target pixel with the per-channel mean of `base` over the
/// clipped box `[p - r, p + r]^2`. All reads come from `base`.
pub fn box_average_fill(base: &ImageRGB8, targets: &BinaryMask, box_radius: usize) -> Result<ImageRGB8> {
    check_dims(base, targets)?;
    if box_radius == 0 {
        return Err(Error::arg("box_radius must be at least 1"));
    }
    let table = SummedArea::new(base);
    let (w, h) = (base.width(), base.height());
    let mut out = base.clone();

    let fill_row = |y: usize, row: &mut [[u8; 3]]| {
        let y0 = y.saturating_sub(box_radius);
        let y1 = (y + box_radius).min(h - 1);
        for (x, px) in row.iter_mut().enumerate() {
            if !targets.get(x, y) {
                continue;
            }
            let x0 = x.saturating_sub(box_radius);
            let x1 = (x + box_radius).min(w - 1);
            let count = ((x1 - x0 + 1) * (y1 - y0 + 1)) as u64;
            let sums = table.rect(x0, y0, x1, y1);
            *px = sums.map(|s| round_div(s, count));
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.pixels_mut()
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| fill_row(y, row));
    }
    #[cfg(not(feature = "parallel"))]
    out.pixels_mut()
        .chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| fill_row(y, row));

    Ok(out)
}

/// `sum / count` rounded half away from zero (both nonnegative).
fn round_div(sum: u64, count: u64) -> u8 {
    ((2 * sum + count) / (2 * count)) as u8
}

/// Per-channel summed-area table with a zero border row and column.
struct SummedArea {
    stride: usize,
    sums: Vec<[u64; 3]>,
}

impl SummedArea {
    fn new(img: &ImageRGB8) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut sums = vec![[0u64; 3]; stride * (h + 1)];
        for y in 0..h {
            let mut row = [0u64; 3];
            for x in 0..w {
                let px = img.get(x, y);
                for c in 0..3 {
                    row[c] += u64::from(px[c]);
                    sums[(y + 1) * stride + x + 1][c] = sums[y * stride + x + 1][c] + row[c];
                }
            }
        }
        Self { stride, sums }
    }

    /// Inclusive rectangle sum.
    fn rect(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> [u64; 3] {
        let s = self.stride;
        let at = |x: usize, y: usize| self.sums[y * s + x];
        let (a, b, c, d) = (at(x1 + 1, y1 + 1), at(x0, y1 + 1), at(x1 + 1, y0), at(x0, y0));
        [0, 1, 2].map(|i| a[i] + d[i] - b[i] - c[i])
    }
}

/// Returns the anonymized image and the blackout mask.
pub fn anonymize(img: &ImageRGB8, h: &Heatmap, params: &RedactionParams) -> Result<(ImageRGB8, BinaryMask)> {
    params.validate()?;
    if h.width() != img.width() || h.height() != img.height() {
        return Err(Error::arg(format!(
            "heatmap {}x{} does not match image {}x{}",
            h.width(),
            h.height(),
            img.width(),
            img.height()
        )));
    }
    let blacked = binarize(h, params.tau_black)?;
    let averaged = binarize(h, params.tau_avg)?;
    let dark = blackout(img, &blacked)?;
    let out = box_average_fill(&dark, &averaged, params.box_radius)?;
    Ok((out, blacked))
}

/// Pixels where any channel differs by more than `per_channel_tol`.
pub fn recover_mask(original: &ImageRGB8, blurred: &ImageRGB8, per_channel_tol: u8) -> Result<BinaryMask> {
    if original.width() != blurred.width() || original.height() != blurred.height() {
        return Err(Error::arg(format!(
            "image dims differ: {}x{} vs {}x{}",
            original.width(),
            original.height(),
            blurred.width(),
            blurred.height()
        )));
    }
    let bits = original
        .pixels()
        .iter()
        .zip(blurred.pixels())
        .map(|(a, b)| (0..3).any(|c| a[c].abs_diff(b[c]) > per_channel_tol))
        .collect();
    BinaryMask::new(original.width(), original.height(), bits)
}
