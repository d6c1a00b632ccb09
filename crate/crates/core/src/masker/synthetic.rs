//! Colored-rectangle fixtures: each image holds a target rectangle and a
//! distractor of another color; the span names the target's color.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{embed_span, MaskerConfig, TrainBatch};
use crate::error::Result;
use crate::raster::{BinaryMask, ImageRGB8};
use crate::textproc::HateSpan;

pub const PALETTE: [(&str, [u8; 3]); 4] = [
    ("red", [220, 40, 40]),
    ("green", [40, 200, 60]),
    ("blue", [40, 70, 220]),
    ("yellow", [230, 210, 40]),
];

#[derive(Clone, Debug)]
pub struct Instance {
    pub id: String,
    pub image: ImageRGB8,
    pub spans: Vec<HateSpan>,
    pub mask: BinaryMask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Rect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl Rect {
    fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    fn overlaps(&self, o: &Rect) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }
}

/// Rectangle corners and sizes snap to multiples of `step`.
fn random_rect(rng: &mut ChaCha8Rng, size: usize, step: usize) -> Rect {
    let cells = size / step;
    let lo = (cells / 4).max(1);
    let hi = (cells / 2).max(lo + 1);
    let w = rng.gen_range(lo..hi) * step;
    let h = rng.gen_range(lo..hi) * step;
    let x = rng.gen_range(0..=(size - w) / step) * step;
    let y = rng.gen_range(0..=(size - h) / step) * step;
    Rect { x, y, w, h }
}

pub fn rectangles(config: &MaskerConfig, count: usize, seed: u64) -> Result<Vec<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = config.image_size;
    let step = config.patch_size;
    (0..count)
        .map(|i| {
            let target_color = i % PALETTE.len();
            let other_color = (target_color + 1 + rng.gen_range(0..PALETTE.len() - 1)) % PALETTE.len();
            let target = random_rect(&mut rng, s, step);
            let distractor = loop {
                let r = random_rect(&mut rng, s, step);
                if !r.overlaps(&target) {
                    break r;
                }
            };
            let mut pixels = Vec::with_capacity(s * s);
            let mut bits = Vec::with_capacity(s * s);
            for y in 0..s {
                for x in 0..s {
                    let noise: u8 = rng.gen_range(100..140);
                    let px = if target.contains(x, y) {
                        PALETTE[target_color].1
                    } else if distractor.contains(x, y) {
                        PALETTE[other_color].1
                    } else {
                        [noise; 3]
                    };
                    pixels.push(px);
                    bits.push(target.contains(x, y));
                }
            }
            let name = PALETTE[target_color].0;
            Ok(Instance {
                id: format!("rect{i:03}"),
                image: ImageRGB8::new(s, s, pixels)?,
                spans: vec![HateSpan {
                    start: 0,
                    end: 1,
                    words: vec![name.to_string()],
                }],
                mask: BinaryMask::new(s, s, bits)?,
            })
        })
        .collect()
}

pub fn to_batch(instances: &[Instance], span_embed_dim: usize) -> Result<TrainBatch> {
    let span_embeddings = instances
        .iter()
        .map(|inst| {
            inst.spans
                .iter()
                .map(|s| embed_span(s, span_embed_dim))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(TrainBatch {
        images: instances.iter().map(|i| i.image.clone()).collect(),
        span_embeddings,
        truth_masks: instances.iter().map(|i| i.mask.clone()).collect(),
    })
}
