//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Images cross the boundary as flat RGBA bytes of `SIZE x SIZE` pixels.

use dehate_core::redact::RedactionParams;
use wasm_bindgen::prelude::*;

pub mod demo;

use demo::{heat_rgba, mask_overlay_rgba, Scene};

fn indices(selected: &[u32]) -> Vec<usize> {
    selected.iter().map(|&i| i as usize).collect()
}

#[wasm_bindgen]
pub struct DemoScene {
    scene: Scene,
}

#[wasm_bindgen]
impl DemoScene {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> DemoScene {
        DemoScene {
            scene: Scene::generate(u64::from(seed)),
        }
    }

    pub fn size(&self) -> u32 {
        demo::SIZE as u32
    }

    /// Caption tokens as a JSON array.
    pub fn tokens(&self) -> String {
        serde_json::to_string(self.scene.tokens()).unwrap_or_default()
    }

    pub fn image_rgba(&self) -> Vec<u8> {
        self.scene.image().to_rgba()
    }

    pub fn heatmap_rgba(&self, selected: &[u32]) -> Result<Vec<u8>, JsError> {
        let h = self.scene.heatmap(&indices(selected)).map_err(|e| JsError::new(&e))?;
        Ok(heat_rgba(&h))
    }

    pub fn mask_rgba(&self, selected: &[u32], tau: f32) -> Result<Vec<u8>, JsError> {
        let m = self.scene.mask(&indices(selected), tau).map_err(|e| JsError::new(&e))?;
        Ok(mask_overlay_rgba(self.scene.image(), &m))
    }

    pub fn blur_rgba(&self, selected: &[u32], tau_black: f32, tau_avg: f32, radius: u32) -> Result<Vec<u8>, JsError> {
        let params = RedactionParams {
            tau_black,
            tau_avg,
            box_radius: radius as usize,
        };
        let (img, _) = self
            .scene
            .blur(&indices(selected), &params)
            .map_err(|e| JsError::new(&e))?;
        Ok(img.to_rgba())
    }
}

/// Hate spans and the generation prompt, as JSON.
#[wasm_bindgen]
pub fn prompt_json(hateful: &str, normalized: &str, budget: u32) -> Result<String, JsError> {
    let report = demo::prompt(hateful, normalized, budget as usize).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&report).map_err(|e| JsError::new(&e.to_string()))
}
