use std::fs;
use std::path::Path;

use serde::{Serialize, Serializer};

use super::metrics::{classifier_accuracy, l1_and_psnr, seam_score};
use super::{EvalError, Result};
use crate::config::to_pretty_json;
use crate::dataset::{save_png, PatchSequence, WordImage, WordSample, PATCH};
use crate::models::{Mode, Models};

pub const REPORT_FILE: &str = "report.json";
pub const PAIRED_FILE: &str = "paired.csv";
pub const GRID_FILE: &str = "grid.png";
/// Space between grid cells, in pixels.
pub const GRID_GAP: usize = 4;
/// Value of the space between grid cells (mid gray).
pub const GRID_GAP_VALUE: f64 = 0.0;

/// Infinity is written as the string `"inf"`; JSON has no literal for it.
fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn csv_value(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        v.to_string()
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_value).unwrap_or_default()
}

/// Metrics of one generated word against its ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleMetrics {
    pub l1: f64,
    #[serde(serialize_with = "finite_or_inf")]
    pub psnr: f64,
    /// Absent for single-patch words.
    pub seam_raw: Option<f64>,
    pub seam_ratio: Option<f64>,
}

/// Recurrent minus baseline; equal values (including two infinities) give 0.
fn delta(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedRow {
    pub word: String,
    pub target_font: usize,
    pub recurrent: SampleMetrics,
    pub baseline: SampleMetrics,
    pub l1_delta: f64,
    pub psnr_delta: f64,
    pub seam_ratio_delta: Option<f64>,
}

/// Population mean and standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanStd {
    #[serde(serialize_with = "finite_or_inf")]
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                std: 0.0,
                count: 0,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if mean.is_finite() {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, count: n }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub l1: MeanStd,
    pub psnr: MeanStd,
    /// Over words with at least one patch boundary.
    pub seam_raw: MeanStd,
    pub seam_ratio: MeanStd,
    /// Per-word font accuracy of the recurrent checkpoint's classifier on
    /// this model's outputs.
    pub classifier_accuracy: f64,
}

impl Aggregate {
    /// Recompute the metric aggregates from rows; `accuracy` is carried over.
    pub fn from_rows<'a>(rows: impl Iterator<Item = &'a SampleMetrics> + Clone, accuracy: f64) -> Self {
        Self {
            l1: MeanStd::of(rows.clone().map(|m| m.l1)),
            psnr: MeanStd::of(rows.clone().map(|m| m.psnr)),
            seam_raw: MeanStd::of(rows.clone().filter_map(|m| m.seam_raw)),
            seam_ratio: MeanStd::of(rows.filter_map(|m| m.seam_ratio)),
            classifier_accuracy: accuracy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub fonts: usize,
    pub samples: usize,
    pub recurrent: Aggregate,
    pub baseline: Aggregate,
    pub rows: Vec<PairedRow>,
}

impl EvalReport {
    pub fn paired_csv(&self) -> String {
        let mut out = String::from(
            "word,target_font,l1_recurrent,l1_baseline,l1_delta,psnr_recurrent,psnr_baseline,psnr_delta,\
             seam_ratio_recurrent,seam_ratio_baseline,seam_ratio_delta\n",
        );
        for r in &self.rows {
            let fields = [
                r.word.clone(),
                r.target_font.to_string(),
                csv_value(r.recurrent.l1),
                csv_value(r.baseline.l1),
                csv_value(r.l1_delta),
                csv_value(r.recurrent.psnr),
                csv_value(r.baseline.psnr),
                csv_value(r.psnr_delta),
                csv_opt(r.recurrent.seam_ratio),
                csv_opt(r.baseline.seam_ratio),
                csv_opt(r.seam_ratio_delta),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

fn metrics(generated: &WordImage, truth: &WordImage) -> Result<SampleMetrics> {
    let (l1, psnr) = l1_and_psnr(generated, truth)?;
    let seam = (generated.width() > PATCH)
        .then(|| seam_score(generated, PATCH))
        .transpose()?;
    Ok(SampleMetrics {
        l1,
        psnr,
        seam_raw: seam.map(|s| s.raw),
        seam_ratio: seam.map(|s| s.ratio),
    })
}

/// Every model output for a sample set, in sample order.
pub struct Translations {
    pub recurrent: Vec<PatchSequence>,
    pub baseline: Vec<PatchSequence>,
}

/// Run both models on identical inputs (running statistics) and score them.
pub fn evaluate(recurrent: &Models, baseline: &Models, samples: &[WordSample]) -> Result<(EvalReport, Translations)> {
    if samples.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    let k = recurrent.fonts();
    if baseline.fonts() != k {
        return Err(EvalError::FontCount {
            expected: k,
            found: baseline.fonts(),
        });
    }
    if let Some(s) = samples.iter().find(|s| s.target_font >= k) {
        return Err(EvalError::FontCount {
            expected: s.target_font + 1,
            found: k,
        });
    }
    let mut out = Translations {
        recurrent: Vec::with_capacity(samples.len()),
        baseline: Vec::with_capacity(samples.len()),
    };
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let truth = s.target.assemble()?;
        let r = recurrent.translate(&s.source, s.target_font, Mode::Infer)?;
        let b = baseline.translate(&s.source, s.target_font, Mode::Infer)?;
        let mr = metrics(&r.assemble()?, &truth)?;
        let mb = metrics(&b.assemble()?, &truth)?;
        rows.push(PairedRow {
            word: s.word.clone(),
            target_font: s.target_font,
            recurrent: mr,
            baseline: mb,
            l1_delta: delta(mr.l1, mb.l1),
            psnr_delta: delta(mr.psnr, mb.psnr),
            seam_ratio_delta: mr.seam_ratio.zip(mb.seam_ratio).map(|(a, b)| delta(a, b)),
        });
        out.recurrent.push(r);
        out.baseline.push(b);
    }
    // One judge for both: the recurrent checkpoint's classifier.
    let judge = &recurrent.critic;
    fn labelled<'a>(gen: &'a [PatchSequence], samples: &[WordSample]) -> Vec<(&'a PatchSequence, usize)> {
        gen.iter().zip(samples).map(|(g, s)| (g, s.target_font)).collect()
    }
    let acc_r = classifier_accuracy(judge, &labelled(&out.recurrent, samples))?;
    let acc_b = classifier_accuracy(judge, &labelled(&out.baseline, samples))?;
    let report = EvalReport {
        fonts: k,
        samples: samples.len(),
        recurrent: Aggregate::from_rows(rows.iter().map(|r| &r.recurrent), acc_r),
        baseline: Aggregate::from_rows(rows.iter().map(|r| &r.baseline), acc_b),
        rows,
    };
    Ok((report, out))
}

/// Rows: ground truth, baseline, recurrent. Columns: the target fonts of the
/// first word in the sample set, each as wide as that word.
pub fn render_grid(samples: &[WordSample], tr: &Translations) -> Result<WordImage> {
    let first = samples.first().ok_or(EvalError::EmptySamples)?;
    let columns: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].word == first.word).collect();
    let widths: Vec<usize> = columns.iter().map(|&i| samples[i].target.original_width()).collect();
    let width = widths.iter().sum::<usize>() + GRID_GAP * (columns.len() - 1);
    let height = 3 * PATCH + 2 * GRID_GAP;
    let mut grid = WordImage::filled(height, width, GRID_GAP_VALUE);
    let mut x0 = 0;
    for (&i, &w) in columns.iter().zip(&widths) {
        let cells = [
            samples[i].target.assemble()?,
            tr.baseline[i].assemble()?,
            tr.recurrent[i].assemble()?,
        ];
        for (row, cell) in cells.iter().enumerate() {
            let y0 = row * (PATCH + GRID_GAP);
            for y in 0..PATCH {
                for x in 0..w {
                    grid.set(y0 + y, x0 + x, cell.get(y, x));
                }
            }
        }
        x0 += w + GRID_GAP;
    }
    Ok(grid)
}

/// Evaluate both models and write `report.json`, `paired.csv` and `grid.png`
/// under `out`.
pub fn compare_models(recurrent: &Models, baseline: &Models, samples: &[WordSample], out: &Path) -> Result<EvalReport> {
    let (report, translations) = evaluate(recurrent, baseline, samples)?;
    let grid = render_grid(samples, &translations)?;
    fs::create_dir_all(out).map_err(|e| EvalError::io(out, e))?;
    let write = |name: &str, text: String| {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| EvalError::io(&p, e))
    };
    write(REPORT_FILE, to_pretty_json(&report))?;
    write(PAIRED_FILE, report.paired_csv())?;
    save_png(&grid, &out.join(GRID_FILE))?;
    Ok(report)
}
