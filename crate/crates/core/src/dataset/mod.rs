//! Synthetic multi-font word images and the patch geometry pipeline.
//!
//! Fonts are procedural: every A–Z glyph starts from a built-in stroke
//! skeleton and is restyled by dilation, outline, serif and shear transforms.
//! Word images are normalised to height 32, cut into 32×32 patches, and
//! target-font renders are resampled to the source image's exact size so both
//! sides of a training pair have the same patch count.

mod corpus;
mod font;
mod geometry;
pub mod glyphs;

use std::fmt;
use std::path::PathBuf;

pub use corpus::{
    bucket_batches, build_samples, default_vocabulary, generate_dataset, load_png, load_samples, save_png,
    DatasetConfig, GenerateSummary, Manifest, ManifestRow, WordSample, MANIFEST_VERSION,
};
pub use font::{default_catalog, make_procedural_font, FontSpec, FontStyle, GAP, MARGIN, MAX_DILATION, MAX_SHEAR};
pub use geometry::{
    align_ground_truth, resample, resize_to_height, resized_width, round_half_away, PatchSequence, PATCH,
};

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug)]
pub enum DatasetError {
    EmptyWord,
    UnsupportedCharacter { word: String, ch: char },
    StyleOutOfRange { field: &'static str, value: String },
    PixelLength { expected: usize, got: usize },
    BadHeight { expected: usize, got: usize },
    EmptySequence,
    TooFewFonts { got: usize },
    UnknownFont { id: usize, fonts: usize },
    EmptyVocabulary,
    Io { path: PathBuf, source: std::io::Error },
    Image { path: PathBuf, detail: String },
    Manifest { path: PathBuf, detail: String },
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyWord => write!(f, "word is empty"),
            Self::UnsupportedCharacter { word, ch } => {
                write!(
                    f,
                    "unsupported character {ch:?} in word {word:?} (only A-Z are available)"
                )
            }
            Self::StyleOutOfRange { field, value } => write!(f, "font style `{field}` out of range: {value}"),
            Self::PixelLength { expected, got } => write!(f, "expected {expected} pixels, got {got}"),
            Self::BadHeight { expected, got } => write!(f, "image height must be {expected}, got {got}"),
            Self::EmptySequence => write!(f, "patch sequence is empty"),
            Self::TooFewFonts { got } => write!(f, "a catalog needs at least 2 fonts, got {got}"),
            Self::UnknownFont { id, fonts } => write!(f, "font id {id} is not in a catalog of {fonts} fonts"),
            Self::EmptyVocabulary => write!(f, "vocabulary is empty"),
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Self::Image { path, detail } => write!(f, "{}: {detail}", path.display()),
            Self::Manifest { path, detail } => write!(f, "{}: {detail}", path.display()),
        }
    }
}

impl std::error::Error for DatasetError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// Ink value.
pub const INK: f64 = -1.0;
/// Background value.
pub const PAPER: f64 = 1.0;

/// Single-channel image, row-major, values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WordImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl WordImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width || height == 0 || width == 0 {
            return Err(DatasetError::PixelLength {
                expected: height * width,
                got: pixels.len(),
            });
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self::new(height, width, vec![value; height * width]).expect("extents must be positive")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&v| v < 0.0).count()
    }
}
