use crate::tensor::Tensor;

use super::{DatasetError, Result, WordImage, PAPER};

/// Patch side and normalised image height.
pub const PATCH: usize = 32;

pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// `round_half_away(width * target / height)`, at least 1, in exact integer
/// arithmetic.
pub fn resized_width(width: usize, height: usize, target: usize) -> usize {
    ((2 * width * target + height) / (2 * height)).max(1)
}

fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let pos = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Bilinear resampling with half-pixel centres. Same-size resampling is the
/// identity, and every output is a convex combination of inputs.
pub fn resample(img: &WordImage, height: usize, width: usize) -> WordImage {
    if (height, width) == (img.height(), img.width()) {
        return img.clone();
    }
    let rows = axis_taps(img.height(), height);
    let cols = axis_taps(img.width(), width);
    let mut out = Vec::with_capacity(height * width);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let top = img.get(y0, x0) * (1.0 - fx) + img.get(y0, x1) * fx;
            let bottom = img.get(y1, x0) * (1.0 - fx) + img.get(y1, x1) * fx;
            out.push((top * (1.0 - fy) + bottom * fy).clamp(-1.0, 1.0));
        }
    }
    WordImage::new(height, width, out).expect("dimensions are positive")
}

/// Scale to `target` rows keeping the aspect ratio.
pub fn resize_to_height(img: &WordImage, target: usize) -> WordImage {
    let width = resized_width(img.width(), img.height(), target);
    resample(img, target, width)
}

/// Resample a target-font render to exactly the source image's size.
pub fn align_ground_truth(source: &WordImage, target: &WordImage) -> WordImage {
    resample(target, source.height(), source.width())
}

/// A height-32 image cut into 32×32 tiles, the last one padded on the right
/// with background.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSequence {
    /// `count` tiles of `PATCH * PATCH` values each, row-major per tile.
    values: Vec<f64>,
    count: usize,
    original_width: usize,
}

impl PatchSequence {
    pub fn extract(img: &WordImage) -> Result<Self> {
        if img.height() != PATCH {
            return Err(DatasetError::BadHeight {
                expected: PATCH,
                got: img.height(),
            });
        }
        let count = img.width().div_ceil(PATCH);
        let mut values = vec![PAPER; count * PATCH * PATCH];
        for p in 0..count {
            for y in 0..PATCH {
                for x in 0..PATCH {
                    let col = p * PATCH + x;
                    if col < img.width() {
                        values[(p * PATCH + y) * PATCH + x] = img.get(y, col);
                    }
                }
            }
        }
        Ok(Self {
            values,
            count,
            original_width: img.width(),
        })
    }

    /// Rebuild from flat tile values (e.g. a generator output).
    pub fn from_values(values: Vec<f64>, original_width: usize) -> Result<Self> {
        let count = original_width.div_ceil(PATCH);
        if count == 0 {
            return Err(DatasetError::EmptySequence);
        }
        if values.len() != count * PATCH * PATCH {
            return Err(DatasetError::PixelLength {
                expected: count * PATCH * PATCH,
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            count,
            original_width,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn original_width(&self) -> usize {
        self.original_width
    }

    pub fn pad_columns(&self) -> usize {
        self.count * PATCH - self.original_width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn patch(&self, i: usize) -> &[f64] {
        &self.values[i * PATCH * PATCH..(i + 1) * PATCH * PATCH]
    }

    /// `(count, 1, 32, 32)`.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new([self.count, 1, PATCH, PATCH], self.values.clone()).expect("patch count is positive")
    }

    /// Concatenate the tiles along the width and crop to the original width.
    pub fn assemble(&self) -> Result<WordImage> {
        if self.count == 0 {
            return Err(DatasetError::EmptySequence);
        }
        let w = self.original_width;
        let mut out = Vec::with_capacity(PATCH * w);
        for y in 0..PATCH {
            for col in 0..w {
                let (p, x) = (col / PATCH, col % PATCH);
                out.push(self.values[(p * PATCH + y) * PATCH + x]);
            }
        }
        WordImage::new(PATCH, w, out)
    }
}
