//! Brute-force reference implementations used as test oracles. None of these
//! call into the code paths they check.
#![allow(dead_code, clippy::type_complexity)]

use std::collections::BTreeMap;

use dehate_core::numerics::{Graph, NodeId, OpKind, Value};
use dehate_core::raster::{BinaryMask, ImageRGB8};
use rand::Rng;

/// Per-pixel two-step blur: black out pixels with heat >= tau_black, then for
/// each pixel with heat >= tau_avg average the blacked-out copy over its
/// clipped box, rounding halves up.
pub fn blur(
    img: &ImageRGB8,
    heat: &[f32],
    tau_black: f32,
    tau_avg: f32,
    radius: usize,
) -> (ImageRGB8, BinaryMask) {
    let (w, h) = (img.width(), img.height());
    let mut dark = img.clone();
    let mut mask = BinaryMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if heat[y * w + x] >= tau_black {
                dark.set(x, y, [0, 0, 0]);
                mask.set(x, y, true);
            }
        }
    }
    let mut out = dark.clone();
    for y in 0..h {
        for x in 0..w {
            if heat[y * w + x] < tau_avg {
                continue;
            }
            let mut sums = [0.0f64; 3];
            let mut count = 0.0;
            for yy in y as i64 - radius as i64..=y as i64 + radius as i64 {
                for xx in x as i64 - radius as i64..=x as i64 + radius as i64 {
                    if yy < 0 || xx < 0 || yy >= h as i64 || xx >= w as i64 {
                        continue;
                    }
                    let p = dark.get(xx as usize, yy as usize);
                    for c in 0..3 {
                        sums[c] += f64::from(p[c]);
                    }
                    count += 1.0;
                }
            }
            out.set(x, y, sums.map(|s| (s / count).round() as u8));
        }
    }
    (out, mask)
}

fn is_subsequence<T: PartialEq>(needle: &[&T], hay: &[T]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == *n))
}

/// Exhaustive LCS alignment: among all largest index subsets of `a` that form
/// a subsequence of `b`, the lexicographically smallest. Exponential; keep
/// `a` short.
pub fn lcs_matched_exhaustive<T: PartialEq>(a: &[T], b: &[T]) -> Vec<bool> {
    assert!(a.len() <= 14, "exhaustive oracle is exponential");
    let n = a.len();
    let mut best: Option<Vec<usize>> = None;
    for bits in 0u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| bits & (1 << i) != 0).collect();
        let items: Vec<&T> = idx.iter().map(|&i| &a[i]).collect();
        if !is_subsequence(&items, b) {
            continue;
        }
        best = match best {
            None => Some(idx),
            Some(cur) if idx.len() > cur.len() || (idx.len() == cur.len() && idx < cur) => {
                Some(idx)
            }
            keep => keep,
        };
    }
    let mut matched = vec![false; n];
    for i in best.unwrap_or_default() {
        matched[i] = true;
    }
    matched
}

/// Textbook prefix-table LCS length.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

/// Maximal runs of `false` as `(start, end)` pairs.
pub fn unmatched_runs(matched: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in matched.iter().chain(std::iter::once(&true)).enumerate() {
        match (m, start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Exhaustive prompt selection: of all `budget`-sized word subsets, the one
/// whose sorted (not-in-span, distance-to-span, position) keys are
/// lexicographically smallest.
pub fn prompt_selection_exhaustive(n: usize, spans: &[(usize, usize)], budget: usize) -> Vec<usize> {
    let key = |i: usize| {
        let inside = spans.iter().any(|&(s, e)| s <= i && i < e);
        let dist = spans
            .iter()
            .map(|&(s, e)| {
                (s as i64 - i as i64)
                    .abs()
                    .min((i as i64 - (e as i64 - 1)).abs())
            })
            .min()
            .unwrap_or(i64::MAX);
        (!inside, if inside { 0 } else { dist }, i)
    };
    let k = budget.min(n);
    let mut best: Option<(Vec<(bool, i64, usize)>, Vec<usize>)> = None;
    for bits in 0u32..(1 << n) {
        if bits.count_ones() as usize != k {
            continue;
        }
        let idx: Vec<usize> = (0..n).filter(|i| bits & (1 << i) != 0).collect();
        let mut keys: Vec<_> = idx.iter().map(|&i| key(i)).collect();
        keys.sort();
        if best.as_ref().is_none_or(|(bk, _)| keys < *bk) {
            best = Some((keys, idx));
        }
    }
    best.map(|(_, idx)| idx).unwrap_or_default()
}

/// Scalar-by-scalar interpreter for a graph, indexing every element explicitly.
pub fn interpret(g: &Graph, bindings: &BTreeMap<NodeId, Value>) -> Vec<Value> {
    let mut vals: Vec<Value> = Vec::new();
    for id in g.node_ids() {
        let v = match g.kind(id) {
            None => bindings[&id].clone(),
            Some(kind) => {
                let args: Vec<&Value> = g.inputs(id).iter().map(|a| &vals[a.index()]).collect();
                interpret_op(kind, &args)
            }
        };
        vals.push(v);
    }
    vals
}

fn at2(v: &Value, r: usize, c: usize) -> f64 {
    v.data[r * v.dims[1] + c]
}

fn interpret_op(kind: OpKind, a: &[&Value]) -> Value {
    let same = |f: &dyn Fn(f64, f64) -> f64| Value {
        dims: a[0].dims.clone(),
        data: (0..a[0].data.len()).map(|i| f(a[0].data[i], a[1].data[i])).collect(),
    };
    let unary = |f: &dyn Fn(f64) -> f64| Value {
        dims: a[0].dims.clone(),
        data: (0..a[0].data.len()).map(|i| f(a[0].data[i])).collect(),
    };
    match kind {
        OpKind::Add => same(&|x, y| x + y),
        OpKind::Multiply => same(&|x, y| x * y),
        OpKind::Sigmoid => unary(&|x| 1.0 / (1.0 + (-x).exp())),
        OpKind::Relu => unary(&|x| if x > 0.0 { x } else { 0.0 }),
        OpKind::Mean => Value {
            dims: vec![1],
            data: vec![a[0].data.iter().sum::<f64>() / a[0].data.len() as f64],
        },
        OpKind::MatMul => {
            let (m, k) = (a[0].dims[0], a[0].dims[1]);
            if a[1].dims.len() == 1 {
                let data = (0..m)
                    .map(|r| (0..k).map(|p| at2(a[0], r, p) * a[1].data[p]).sum())
                    .collect();
                Value { dims: vec![m], data }
            } else {
                let n = a[1].dims[1];
                let mut data = Vec::new();
                for r in 0..m {
                    for c in 0..n {
                        data.push((0..k).map(|p| at2(a[0], r, p) * at2(a[1], p, c)).sum());
                    }
                }
                Value { dims: vec![m, n], data }
            }
        }
        OpKind::ScaleShift => {
            let c = *a[0].dims.last().unwrap();
            let data = (0..a[0].data.len())
                .map(|i| a[0].data[i] * a[1].data[i % c] + a[2].data[i % c])
                .collect();
            Value { dims: a[0].dims.clone(), data }
        }
        OpKind::Concat => {
            let rows = if a[0].dims.len() == 2 { a[0].dims[0] } else { 1 };
            let mut data = Vec::new();
            for r in 0..rows {
                for part in a {
                    let w = *part.dims.last().unwrap();
                    for c in 0..w {
                        data.push(part.data[r * w + c]);
                    }
                }
            }
            let total: usize = a.iter().map(|p| *p.dims.last().unwrap()).sum();
            let dims = if a[0].dims.len() == 2 { vec![rows, total] } else { vec![total] };
            Value { dims, data }
        }
    }
}

/// Corner-aligned bilinear sample of `src` (`h x w`, row-major) for output
/// pixel `(oy, ox)` of an `oh x ow` target.
pub fn bilinear_sample(src: &[f32], h: usize, w: usize, oh: usize, ow: usize, oy: usize, ox: usize) -> f64 {
    let coord = |o: usize, n_out: usize, n_in: usize| {
        if n_out == 1 || n_in == 1 {
            0.0
        } else {
            o as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
        }
    };
    let (fy, fx) = (coord(oy, oh, h), coord(ox, ow, w));
    let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (ty, tx) = (fy - y0 as f64, fx - x0 as f64);
    let v = |y: usize, x: usize| f64::from(src[y * w + x]);
    let top = v(y0, x0) * (1.0 - tx) + v(y0, x1) * tx;
    let bottom = v(y1, x0) * (1.0 - tx) + v(y1, x1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Sum over selected tokens and all (layer, head, step) maps, then min-max.
pub fn aggregate_per_pixel(dims: &[usize], data: &[f32], tokens: &[usize], oh: usize, ow: usize) -> Vec<f64> {
    let (h, w) = (dims[4], dims[5]);
    let maps = dims[1] * dims[2] * dims[3];
    let mut sum = vec![0.0; oh * ow];
    for oy in 0..oh {
        for ox in 0..ow {
            for &t in tokens {
                for m in 0..maps {
                    let start = (t * maps + m) * h * w;
                    sum[oy * ow + ox] += bilinear_sample(&data[start..start + h * w], h, w, oh, ow, oy, ox);
                }
            }
        }
    }
    let lo = sum.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sum.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0.0; oh * ow];
    }
    sum.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

pub fn count_iou(pred: &[bool], truth: &[bool]) -> f64 {
    let inter = pred.iter().zip(truth).filter(|(p, t)| **p && **t).count();
    let union = pred.iter().zip(truth).filter(|(p, t)| **p || **t).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn random_image<R: Rng>(rng: &mut R, w: usize, h: usize) -> ImageRGB8 {
    let px = (0..w * h).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    ImageRGB8::new(w, h, px).unwrap()
}
