use serde::Serialize;

use super::{EvalError, Result};
use crate::dataset::{PatchSequence, WordImage};
use crate::models::Critic;
use crate::tensor::Tape;

/// Peak-to-peak range of pixel values.
pub const PSNR_PEAK: f64 = 2.0;
/// Added to the interior term of the seam ratio.
pub const SEAM_EPSILON: f64 = 1e-6;

fn same_size(a: &WordImage, b: &WordImage) -> Result<()> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(EvalError::DimensionMismatch {
            left: (a.height(), a.width()),
            right: (b.height(), b.width()),
        });
    }
    Ok(())
}

/// Mean absolute difference and PSNR in dB (peak 2). Identical images give
/// `f64::INFINITY`.
pub fn l1_and_psnr(a: &WordImage, b: &WordImage) -> Result<(f64, f64)> {
    same_size(a, b)?;
    let n = a.pixels().len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (x, y) in a.pixels().iter().zip(b.pixels()) {
        let d = x - y;
        abs += d.abs();
        sq += d * d;
    }
    let mse = sq / n;
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PSNR_PEAK * PSNR_PEAK / mse).log10()
    };
    Ok((abs / n, psnr))
}

/// Adjacent-column statistics at patch boundaries versus everywhere else.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeamScore {
    /// Mean over boundaries `b` of the row-mean `|img[:, b] - img[:, b-1]|`.
    pub boundary: f64,
    /// The same statistic over all other adjacent column pairs.
    pub interior: f64,
    /// `boundary - interior`.
    pub raw: f64,
    /// `boundary / (interior + 1e-6)`.
    pub ratio: f64,
}

fn column_step(img: &WordImage, x: usize) -> f64 {
    (0..img.height())
        .map(|y| (img.get(y, x) - img.get(y, x - 1)).abs())
        .sum::<f64>()
        / img.height() as f64
}

/// Seam statistics for an image made of `patch_width`-wide tiles. Needs at
/// least one interior boundary.
pub fn seam_score(img: &WordImage, patch_width: usize) -> Result<SeamScore> {
    if patch_width == 0 || img.width() <= patch_width {
        return Err(EvalError::NoBoundary { width: img.width() });
    }
    let (mut boundary, mut nb) = (0.0, 0usize);
    let (mut interior, mut ni) = (0.0, 0usize);
    for x in 1..img.width() {
        let d = column_step(img, x);
        if x % patch_width == 0 {
            boundary += d;
            nb += 1;
        } else {
            interior += d;
            ni += 1;
        }
    }
    let boundary = boundary / nb as f64;
    let interior = if ni == 0 { 0.0 } else { interior / ni as f64 };
    Ok(SeamScore {
        boundary,
        interior,
        raw: boundary - interior,
        ratio: boundary / (interior + SEAM_EPSILON),
    })
}

/// Per-word font prediction: argmax of the per-patch logits averaged over
/// the word.
pub fn predict_fonts(critic: &Critic, words: &[&PatchSequence]) -> Result<Vec<usize>> {
    let k = critic.fonts();
    words
        .iter()
        .map(|seq| {
            let tape = Tape::new();
            let feats = critic.features(&tape, tape.constant(&seq.to_tensor()))?;
            let logits = critic.classify(&tape, feats)?.value();
            let mut mean = vec![0.0; k];
            for row in logits.values().chunks(k) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v / seq.count() as f64;
                }
            }
            Ok(mean
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (i, &v)| if v > best.1 { (i, v) } else { best },
                )
                .0)
        })
        .collect()
}

/// Fraction of words whose predicted font equals the intended one.
pub fn classifier_accuracy(critic: &Critic, words: &[(&PatchSequence, usize)]) -> Result<f64> {
    if words.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    if let Some(&(_, bad)) = words.iter().find(|(_, label)| *label >= critic.fonts()) {
        return Err(EvalError::FontCount {
            expected: bad + 1,
            found: critic.fonts(),
        });
    }
    let seqs: Vec<&PatchSequence> = words.iter().map(|(s, _)| *s).collect();
    let predicted = predict_fonts(critic, &seqs)?;
    let hits = predicted
        .iter()
        .zip(words)
        .filter(|(p, (_, label))| *p == label)
        .count();
    Ok(hits as f64 / words.len() as f64)
}
