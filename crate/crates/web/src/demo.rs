//! Plain-Rust demo logic behind the browser bindings, testable natively.

use dehate_core::attention::{aggregate, binarize, AttentionStack, Heatmap, StackMeta};
use dehate_core::numerics::Tensor;
use dehate_core::redact::{anonymize, RedactionParams};
use dehate_core::textproc::{build_prompt, extract_spans, words, HateSpan};
use dehate_core::{BinaryMask, ImageRGB8};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const SIZE: usize = 64;
/// Attention maps are coarser than the image and get upsampled.
const MAP: usize = 16;
const LAYERS: usize = 2;
const HEADS: usize = 2;
const STEPS: usize = 3;

pub const CAPTION: [&str; 9] = ["photo", "of", "a", "red", "car", "and", "a", "blue", "door"];

#[derive(Clone, Copy, Debug)]
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

    /// Center and half-extent in attention-map cells.
    fn in_cells(&self) -> (f32, f32, f32, f32) {
        let k = MAP as f32 / SIZE as f32;
        (
            (self.x as f32 + self.w as f32 / 2.0) * k,
            (self.y as f32 + self.h as f32 / 2.0) * k,
            self.w as f32 * k / 2.0,
            self.h as f32 * k / 2.0,
        )
    }
}

/// A generated image with two colored objects and a matching attention stack.
pub struct Scene {
    image: ImageRGB8,
    stack: AttentionStack,
}

fn random_rect(rng: &mut ChaCha8Rng) -> Rect {
    let w = rng.gen_range(14..26);
    let h = rng.gen_range(14..26);
    Rect {
        x: rng.gen_range(2..SIZE - w - 2),
        y: rng.gen_range(2..SIZE - h - 2),
        w,
        h,
    }
}

fn overlaps(a: &Rect, b: &Rect) -> bool {
    a.x < b.x + b.w + 2 && b.x < a.x + a.w + 2 && a.y < b.y + b.h + 2 && b.y < a.y + a.h + 2
}

impl Scene {
    pub fn generate(seed: u64) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let red = random_rect(&mut rng);
        let blue = loop {
            let r = random_rect(&mut rng);
            if !overlaps(&r, &red) {
                break r;
            }
        };
        let mut pixels = Vec::with_capacity(SIZE * SIZE);
        for y in 0..SIZE {
            for x in 0..SIZE {
                let n: u8 = rng.gen_range(0..30);
                pixels.push(if red.contains(x, y) {
                    [200 + n / 2, 30 + n, 40]
                } else if blue.contains(x, y) {
                    [40, 60 + n, 200 + n / 2]
                } else {
                    let base = 90 + (y as u8) + n;
                    [base, base, base.saturating_add(15)]
                });
            }
        }
        let image = ImageRGB8::new(SIZE, SIZE, pixels).expect("scene dims are consistent");

        let mut data = Vec::with_capacity(CAPTION.len() * LAYERS * HEADS * STEPS * MAP * MAP);
        for word in CAPTION {
            let focus = match word {
                "red" | "car" => Some(red),
                "blue" | "door" => Some(blue),
                _ => None,
            };
            for _ in 0..LAYERS * HEADS * STEPS {
                let jitter_x = rng.gen_range(-1.0f32..1.0);
                let jitter_y = rng.gen_range(-1.0f32..1.0);
                for cy in 0..MAP {
                    for cx in 0..MAP {
                        let noise = rng.gen_range(0.0f32..0.15);
                        let v = match focus {
                            Some(r) => {
                                let (mx, my, hx, hy) = r.in_cells();
                                let dx = (cx as f32 + 0.5 - mx - jitter_x) / hx;
                                let dy = (cy as f32 + 0.5 - my - jitter_y) / hy;
                                (-(dx * dx + dy * dy)).exp() + noise
                            }
                            None => 0.2 + noise,
                        };
                        data.push(v);
                    }
                }
            }
        }
        let maps = Tensor::new(vec![CAPTION.len(), LAYERS, HEADS, STEPS, MAP, MAP], data)
            .expect("stack dims are consistent");
        let meta = StackMeta {
            tokens: CAPTION.iter().map(|t| t.to_string()).collect(),
            image_h: SIZE,
            image_w: SIZE,
        };
        let stack = AttentionStack::new(maps, meta).expect("generated stack is valid");
        Scene { image, stack }
    }

    pub fn image(&self) -> &ImageRGB8 {
        &self.image
    }

    pub fn tokens(&self) -> &[String] {
        self.stack.tokens()
    }

    pub fn heatmap(&self, selected: &[usize]) -> Result<Heatmap, String> {
        if selected.is_empty() {
            return Err("select at least one token".into());
        }
        aggregate(&self.stack, selected).map_err(|e| e.to_string())
    }

    pub fn mask(&self, selected: &[usize], tau: f32) -> Result<BinaryMask, String> {
        binarize(&self.heatmap(selected)?, tau).map_err(|e| e.to_string())
    }

    pub fn blur(&self, selected: &[usize], params: &RedactionParams) -> Result<(ImageRGB8, BinaryMask), String> {
        params.validate().map_err(|e| e.to_string())?;
        anonymize(&self.image, &self.heatmap(selected)?, params).map_err(|e| e.to_string())
    }
}

/// Piecewise-linear black, red, yellow, white ramp.
pub fn heat_color(v: f32) -> [u8; 3] {
    let t = v.clamp(0.0, 1.0) * 3.0;
    let ramp = |x: f32| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
    [ramp(t), ramp(t - 1.0), ramp(t - 2.0)]
}

pub fn heat_rgba(h: &Heatmap) -> Vec<u8> {
    h.values()
        .iter()
        .flat_map(|&v| {
            let [r, g, b] = heat_color(v);
            [r, g, b, 255]
        })
        .collect()
}

/// Image with masked pixels tinted red and the rest dimmed.
pub fn mask_overlay_rgba(img: &ImageRGB8, mask: &BinaryMask) -> Vec<u8> {
    img.pixels()
        .iter()
        .zip(mask.bits())
        .flat_map(|(p, &on)| {
            let c = if on {
                [255, p[1] / 3, p[2] / 3]
            } else {
                [p[0] / 3, p[1] / 3, p[2] / 3]
            };
            [c[0], c[1], c[2], 255]
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct PromptReport {
    pub spans: Vec<HateSpan>,
    pub prompt: String,
    pub inserted_segment: String,
    pub truncated: bool,
}

/// Spans of `hateful` against `normalized` (none when `normalized` is
/// blank) and the generation prompt under `budget` words.
pub fn prompt(hateful: &str, normalized: &str, budget: usize) -> Result<PromptReport, String> {
    if words(hateful).is_empty() {
        return Err("enter some text".into());
    }
    let spans = if words(normalized).is_empty() {
        Vec::new()
    } else {
        extract_spans(hateful, normalized).map_err(|e| e.to_string())?
    };
    let p = build_prompt(hateful, &spans, budget).map_err(|e| e.to_string())?;
    Ok(PromptReport {
        spans,
        prompt: p.full_text,
        inserted_segment: p.inserted_segment,
        truncated: p.truncated,
    })
}
