//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations: render a word and show its 32×32 patch grid, build an
//! aligned source/target training pair, and probe how far a change to one
//! input patch travels through the recurrent and baseline generators.

pub mod demo;

use wasm_bindgen::prelude::*;

/// Grayscale raster handed to the page.
#[wasm_bindgen]
pub struct Image(demo::Gray);

#[wasm_bindgen]
impl Image {
    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    /// RGBA bytes ready for `ImageData`.
    pub fn rgba(&self) -> Vec<u8> {
        self.0.pixels.iter().flat_map(|&v| [v, v, v, 255]).collect()
    }
}

#[wasm_bindgen]
pub struct Rendered(demo::Rendered);

#[wasm_bindgen]
impl Rendered {
    pub fn image(&self) -> Image {
        Image(self.0.image.clone())
    }

    pub fn patches(&self) -> usize {
        self.0.patches
    }

    pub fn pad_columns(&self) -> usize {
        self.0.pad_columns
    }
}

#[wasm_bindgen]
pub struct Pair(demo::Pair);

#[wasm_bindgen]
impl Pair {
    pub fn source(&self) -> Image {
        Image(self.0.source.clone())
    }

    pub fn target(&self) -> Image {
        Image(self.0.target.clone())
    }

    pub fn l1(&self) -> f64 {
        self.0.l1
    }

    pub fn psnr(&self) -> f64 {
        self.0.psnr
    }

    pub fn seam_source(&self) -> Option<f64> {
        self.0.seam_source
    }

    pub fn seam_target(&self) -> Option<f64> {
        self.0.seam_target
    }
}

#[wasm_bindgen]
pub struct Probe(demo::Probe);

#[wasm_bindgen]
impl Probe {
    pub fn changes(&self) -> Vec<f64> {
        self.0.changes.clone()
    }

    pub fn output(&self) -> Image {
        Image(self.0.output.clone())
    }
}

#[wasm_bindgen(js_name = fontNames)]
pub fn font_names() -> Vec<String> {
    demo::font_names()
}

#[wasm_bindgen]
pub fn render(text: &str, font: usize) -> Result<Rendered, JsError> {
    demo::render(text, font).map(Rendered).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn pair(text: &str, source_font: usize, target_font: usize) -> Result<Pair, JsError> {
    demo::pair(text, source_font, target_font)
        .map(Pair)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = contextProbe)]
pub fn context_probe(text: &str, patch: usize, recurrent: bool) -> Result<Probe, JsError> {
    demo::context_probe(text, patch, recurrent)
        .map(Probe)
        .map_err(|e| JsError::new(&e))
}
