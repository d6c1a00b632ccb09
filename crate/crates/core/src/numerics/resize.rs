use super::Tensor;
use crate::error::{Error, Result};

/// Corner-aligned bilinear resize of a rank-2 map: output corners sample
/// input corners exactly. A length-1 output axis samples index 0.
pub fn bilinear_resize(src: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if src.rank() != 2 {
        return Err(Error::arg(format!(
            "bilinear_resize expects rank 2, got {:?}",
            src.dims()
        )));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::arg(format!(
            "resize target must be at least 1x1, got {out_h}x{out_w}"
        )));
    }
    let (in_h, in_w) = (src.dims()[0], src.dims()[1]);
    if in_h == out_h && in_w == out_w {
        return Ok(src.clone());
    }
    let rows = axis_samples(in_h, out_h);
    let cols = axis_samples(in_w, out_w);
    let data = src.data();
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, ty) in &rows {
        for &(x0, x1, tx) in &cols {
            let a = data[y0 * in_w + x0];
            let b = data[y0 * in_w + x1];
            let c = data[y1 * in_w + x0];
            let d = data[y1 * in_w + x1];
            let top = lerp(a, b, tx);
            let bottom = lerp(c, d, tx);
            let v = lerp(top, bottom, ty);
            let lo = a.min(b).min(c).min(d);
            let hi = a.max(b).max(c).max(d);
            out.push(v.clamp(lo, hi));
        }
    }
    Tensor::matrix(out_h, out_w, out)
}

fn lerp(a: f32, b: f32, t: f32) -> f32 {
    // exact when a == b, so constant maps stay constant
    a + (b - a) * t
}

fn axis_samples(n_in: usize, n_out: usize) -> Vec<(usize, usize, f32)> {
    (0..n_out)
        .map(|i| {
            if n_out == 1 || n_in == 1 {
                return (0, 0, 0.0);
            }
            let pos = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
            let lo = (pos.floor() as usize).min(n_in - 1);
            let hi = (lo + 1).min(n_in - 1);
            (lo, hi, (pos - lo as f64) as f32)
        })
        .collect()
}
