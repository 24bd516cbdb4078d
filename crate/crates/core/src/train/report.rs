use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{Result, TrainError};

pub const CSV_HEADER: &str = "step,loss_d,loss_g_adv,loss_g_l1,loss_g_cls,loss_c,d_real,d_fake";

/// Losses and discriminator means of one optimisation step. The generator
/// terms are unweighted. During pre-training only `loss_g_l1` is measured;
/// every other field is 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepReport {
    pub step: u64,
    pub loss_d: f64,
    pub loss_g_adv: f64,
    pub loss_g_l1: f64,
    pub loss_g_cls: f64,
    pub loss_c: f64,
    pub d_real: f64,
    pub d_fake: f64,
}

impl StepReport {
    fn fields(&self) -> [f64; 7] {
        [
            self.loss_d,
            self.loss_g_adv,
            self.loss_g_l1,
            self.loss_g_cls,
            self.loss_c,
            self.d_real,
            self.d_fake,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|v| v.is_finite())
    }

    /// An adversarial step always has a strictly positive discriminator loss.
    pub fn is_adversarial(&self) -> bool {
        self.loss_d > 0.0
    }

    /// Shortest round-trip formatting, so equal reports give equal text.
    pub fn csv_row(&self) -> String {
        let mut row = self.step.to_string();
        for v in self.fields() {
            row.push(',');
            row.push_str(&v.to_string());
        }
        row
    }

    pub fn parse_csv_row(line: &str) -> Option<Self> {
        let mut it = line.split(',');
        let step = it.next()?.parse().ok()?;
        let mut v = [0.0; 7];
        for slot in &mut v {
            *slot = it.next()?.parse().ok()?;
        }
        if it.next().is_some() {
            return None;
        }
        Some(Self {
            step,
            loss_d: v[0],
            loss_g_adv: v[1],
            loss_g_l1: v[2],
            loss_g_cls: v[3],
            loss_c: v[4],
            d_real: v[5],
            d_fake: v[6],
        })
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<StepReport>> {
    let text = fs::read_to_string(path).map_err(|source| TrainError::io(path, source))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(TrainError::Resume(format!(
            "{}: missing step report header",
            path.display()
        )));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            StepReport::parse_csv_row(l)
                .ok_or_else(|| TrainError::Resume(format!("{}: malformed row {}", path.display(), i + 2)))
        })
        .collect()
}

pub fn write_csv(path: &Path, reports: &[StepReport]) -> Result<()> {
    let mut text = String::with_capacity(64 * (reports.len() + 1));
    text.push_str(CSV_HEADER);
    text.push('\n');
    for r in reports {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| TrainError::io(path, source))
}

/// Appends rows to an open CSV file, flushing after each one.
pub struct CsvStream {
    file: fs::File,
    path: std::path::PathBuf,
}

impl CsvStream {
    /// Open for appending; the file must already hold the header.
    pub fn append(path: &Path) -> Result<Self> {
        let file = fs::OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|source| TrainError::io(path, source))?;
        Ok(Self {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn push(&mut self, r: &StepReport) -> Result<()> {
        writeln!(self.file, "{}", r.csv_row()).map_err(|source| TrainError::io(&self.path, source))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_exactly() {
        let r = StepReport {
            step: 12,
            loss_d: 1.3862943611198906,
            loss_g_adv: 0.1 + 0.2,
            loss_g_l1: 1e-300,
            loss_g_cls: 3.0,
            loss_c: f64::MIN_POSITIVE,
            d_real: 0.5,
            d_fake: 0.25,
        };
        assert_eq!(StepReport::parse_csv_row(&r.csv_row()), Some(r));
        assert_eq!(CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
        assert!(StepReport::parse_csv_row("1,2").is_none());
    }
}
