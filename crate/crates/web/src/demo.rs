//! The demo operations as plain Rust, so they can be tested natively.

use fontgan::dataset::{
    align_ground_truth, default_catalog, resize_to_height, FontSpec, PatchSequence, WordImage, PATCH,
};
use fontgan::eval::{l1_and_psnr, seam_score};
use fontgan::models::{Mode, ModelConfig, ModelKind, Models};

/// Seed of the untrained probe models.
pub const PROBE_SEED: u64 = 0;

/// An 8-bit grayscale raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl From<&WordImage> for Gray {
    fn from(img: &WordImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            pixels: img
                .pixels()
                .iter()
                .map(|v| ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8)
                .collect(),
        }
    }
}

pub fn font_names() -> Vec<String> {
    default_catalog().into_iter().map(|f| f.name).collect()
}

fn font(id: usize) -> Result<FontSpec, String> {
    let catalog = default_catalog();
    let n = catalog.len();
    catalog
        .into_iter()
        .nth(id)
        .ok_or_else(|| format!("font {id} is not in the catalog of {n} fonts"))
}

fn word_image(text: &str, font_id: usize) -> Result<WordImage, String> {
    let img = font(font_id)?
        .render_word(&text.trim().to_ascii_uppercase())
        .map_err(|e| e.to_string())?;
    Ok(resize_to_height(&img, PATCH))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    /// Height-32 word image.
    pub image: Gray,
    pub patches: usize,
    /// Background columns added to fill the last patch.
    pub pad_columns: usize,
}

/// Render a word, normalise it to height 32 and cut it into patches.
pub fn render(text: &str, font_id: usize) -> Result<Rendered, String> {
    let img = word_image(text, font_id)?;
    let seq = PatchSequence::extract(&img).map_err(|e| e.to_string())?;
    Ok(Rendered {
        image: Gray::from(&img),
        patches: seq.count(),
        pad_columns: seq.pad_columns(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub source: Gray,
    /// Target-font render resampled to the source size.
    pub target: Gray,
    pub l1: f64,
    pub psnr: f64,
    /// Boundary/interior ratios; absent for single-patch words.
    pub seam_source: Option<f64>,
    pub seam_target: Option<f64>,
}

/// A training pair: the source render and the aligned target render.
pub fn pair(text: &str, source_font: usize, target_font: usize) -> Result<Pair, String> {
    let source = word_image(text, source_font)?;
    let target = align_ground_truth(&source, &word_image(text, target_font)?);
    let (l1, psnr) = l1_and_psnr(&source, &target).map_err(|e| e.to_string())?;
    let seam = |img: &WordImage| seam_score(img, PATCH).ok().map(|s| s.ratio);
    Ok(Pair {
        l1,
        psnr,
        seam_source: seam(&source),
        seam_target: seam(&target),
        source: Gray::from(&source),
        target: Gray::from(&target),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    /// Largest absolute change of each output patch.
    pub changes: Vec<f64>,
    /// Output for the unperturbed word.
    pub output: Gray,
}

/// Invert one input patch and measure how much every output patch moves,
/// using an untrained narrow model with running statistics.
pub fn context_probe(text: &str, patch: usize, recurrent: bool) -> Result<Probe, String> {
    let catalog_size = default_catalog().len();
    let kind = if recurrent {
        ModelKind::Recurrent
    } else {
        ModelKind::Baseline
    };
    let models = Models::init(ModelConfig::tiny(catalog_size), kind, PROBE_SEED).map_err(|e| e.to_string())?;
    let seq = PatchSequence::extract(&word_image(text, 0)?).map_err(|e| e.to_string())?;
    if patch >= seq.count() {
        return Err(format!(
            "patch {patch} is out of range: the word has {} patches",
            seq.count()
        ));
    }
    let mut values = seq.values().to_vec();
    let span = patch * PATCH * PATCH..(patch + 1) * PATCH * PATCH;
    for v in &mut values[span] {
        *v = -*v;
    }
    let perturbed = PatchSequence::from_values(values, seq.original_width()).map_err(|e| e.to_string())?;
    let target = 1;
    let a = models.translate(&seq, target, Mode::Infer).map_err(|e| e.to_string())?;
    let b = models
        .translate(&perturbed, target, Mode::Infer)
        .map_err(|e| e.to_string())?;
    let changes = (0..a.count())
        .map(|i| {
            a.patch(i)
                .iter()
                .zip(b.patch(i))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let output = a.assemble().map_err(|e| e.to_string())?;
    Ok(Probe {
        changes,
        output: Gray::from(&output),
    })
}
