//! The translation networks.
//!
//! A [`Generator`] encodes each 32×32 patch to a latent vector, mixes the
//! sequence with a font-conditioned core, and decodes every feature back to a
//! patch. The recurrent core is a stacked bidirectional LSTM with output
//! feedback; the baseline core fuses each latent with the label embedding
//! independently. A [`Critic`] holds the real/fake discriminator and the font
//! classifier, which share one convolutional trunk.
//!
//! Batches are laid out time-major: for `B` words of `T` patches, row
//! `t * B + b` is patch `t` of word `b`.

mod checkpoint;
mod critic;
mod generator;
pub mod layers;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use critic::{Critic, Head, Trunk};
pub use generator::{Core, Decoder, Encoder, Generator, RecurrentCore};

use crate::dataset::{resample, resize_to_height, DatasetError, PatchSequence, WordImage, PATCH};
use crate::tensor::{seeded_rng, NamedParam, Tape, Tensor, TensorError};

#[derive(Debug)]
pub enum ModelError {
    Tensor(TensorError),
    Dataset(DatasetError),
    Io { path: PathBuf, source: std::io::Error },
    Format(String),
    FontCount { expected: usize, found: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tensor(e) => write!(f, "{e}"),
            Self::Dataset(e) => write!(f, "{e}"),
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Self::Format(d) => write!(f, "invalid checkpoint: {d}"),
            Self::FontCount { expected, found } => {
                write!(f, "font count mismatch: expected K = {expected}, found K = {found}")
            }
        }
    }
}

impl std::error::Error for ModelError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Tensor(e) => Some(e),
            Self::Dataset(e) => Some(e),
            Self::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<TensorError> for ModelError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}

impl From<DatasetError> for ModelError {
    fn from(e: DatasetError) -> Self {
        Self::Dataset(e)
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Normalisation behaviour of every batch-norm layer in a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Batch statistics; running statistics are left alone.
    BatchStats,
    /// Running statistics.
    Infer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Recurrent,
    Baseline,
}

impl ModelKind {
    fn code(self) -> f64 {
        match self {
            Self::Recurrent => 0.0,
            Self::Baseline => 1.0,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Recurrent => "recurrent",
            Self::Baseline => "baseline",
        })
    }
}

/// Layer widths. [`ModelConfig::standard`] is the full-size network; the
/// small variants exist for fast tests.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub fonts: usize,
    pub encoder_channels: [usize; 5],
    pub embed_dim: usize,
    /// LSTM units per direction.
    pub hidden: usize,
    pub trunk_channels: [usize; 4],
    pub head_hidden: usize,
}

impl ModelConfig {
    pub fn standard(fonts: usize) -> Self {
        Self {
            fonts,
            encoder_channels: [32, 64, 128, 256, 256],
            embed_dim: 32,
            hidden: 512,
            trunk_channels: [32, 64, 128, 256],
            head_hidden: 256,
        }
    }

    /// A narrow clone of the standard layout.
    pub fn tiny(fonts: usize) -> Self {
        Self {
            fonts,
            encoder_channels: [4, 4, 8, 8, 8],
            embed_dim: 4,
            hidden: 8,
            trunk_channels: [4, 4, 8, 8],
            head_hidden: 8,
        }
    }
}

/// Parameter counts per component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParamReport {
    pub generator: usize,
    pub trunk: usize,
    pub disc_head: usize,
    pub cls_head: usize,
    pub total: usize,
}

fn count(params: &[NamedParam]) -> usize {
    params.iter().map(|(_, p)| p.len()).sum()
}

/// Generator plus critic, created together from one seed.
#[derive(Clone, Debug)]
pub struct Models {
    pub config: ModelConfig,
    pub seed: u64,
    pub generator: Generator,
    pub critic: Critic,
}

impl Models {
    pub fn init(config: ModelConfig, kind: ModelKind, seed: u64) -> Result<Self> {
        if config.fonts < 2 {
            return Err(ModelError::Format(format!(
                "need at least 2 fonts, got {}",
                config.fonts
            )));
        }
        let mut rng = seeded_rng(seed);
        let generator = Generator::new(&config, kind, &mut rng);
        let critic = Critic::new(&config, &mut rng);
        let models = Self {
            config,
            seed,
            generator,
            critic,
        };
        let r = models.param_report();
        log::info!(
            "{kind} model: generator {} params, trunk {}, discriminator head {}, classifier head {}, total {}",
            r.generator,
            r.trunk,
            r.disc_head,
            r.cls_head,
            r.total
        );
        Ok(models)
    }

    pub fn kind(&self) -> ModelKind {
        self.generator.kind()
    }

    pub fn fonts(&self) -> usize {
        self.config.fonts
    }

    pub fn param_report(&self) -> ParamReport {
        let generator = count(&self.generator.params());
        let trunk = count(&self.critic.trunk_params());
        let disc_head = count(&self.critic.disc_head_params());
        let cls_head = count(&self.critic.cls_head_params());
        ParamReport {
            generator,
            trunk,
            disc_head,
            cls_head,
            total: generator + trunk + disc_head + cls_head,
        }
    }

    /// Every stored tensor: trainable params, then batch-norm buffers.
    pub fn named_tensors(&self) -> Vec<NamedParam> {
        let mut out = self.generator.params();
        out.extend(self.generator.buffers());
        out.extend(self.critic.params());
        out
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.config.fonts as u32, self.seed);
        ck.push("meta.kind", Tensor::scalar(self.kind().code()));
        for (name, p) in self.named_tensors() {
            ck.push(name, p.snapshot());
        }
        ck
    }

    /// Rebuild from a checkpoint, inferring layer widths from tensor shapes.
    /// Entries outside the model namespaces (e.g. optimizer state) are ignored.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let get = |name: &str| {
            ck.get(name)
                .ok_or_else(|| ModelError::Format(format!("missing tensor `{name}`")))
        };
        let dim = |name: &str, axis: usize| -> Result<usize> {
            let t = get(name)?;
            t.shape()
                .get(axis)
                .copied()
                .ok_or_else(|| ModelError::Format(format!("tensor `{name}` has rank {}", t.shape().len())))
        };
        let kind = match ck.scalar("meta.kind") {
            Some(v) if v == ModelKind::Recurrent.code() => ModelKind::Recurrent,
            Some(v) if v == ModelKind::Baseline.code() => ModelKind::Baseline,
            _ => return Err(ModelError::Format("missing or invalid `meta.kind`".into())),
        };
        let mut encoder_channels = [0; 5];
        for (i, c) in encoder_channels.iter_mut().enumerate() {
            *c = dim(&format!("gen.enc.conv{i}.w"), 0)?;
        }
        let mut trunk_channels = [0; 4];
        for (i, c) in trunk_channels.iter_mut().enumerate() {
            *c = dim(&format!("trunk.conv{i}.w"), 0)?;
        }
        let fonts = ck.fonts as usize;
        let table_rows = dim("gen.embed.table", 0)?;
        if table_rows != fonts {
            return Err(ModelError::Format(format!(
                "header says K = {fonts} but the label table has {table_rows} rows"
            )));
        }
        let config = ModelConfig {
            fonts,
            encoder_channels,
            embed_dim: dim("gen.embed.table", 1)?,
            hidden: match kind {
                ModelKind::Recurrent => dim("gen.core.l1f.wr", 0)?,
                ModelKind::Baseline => ModelConfig::standard(fonts).hidden,
            },
            trunk_channels,
            head_hidden: dim("disc.fc0.w", 1)?,
        };
        let models = Self::init(config, kind, ck.seed)?;
        for (name, p) in models.named_tensors() {
            let t = get(&name)?;
            if t.shape() != p.shape() {
                return Err(ModelError::Format(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    t.shape(),
                    p.shape()
                )));
            }
            p.assign(t.values())?;
        }
        Ok(models)
    }

    /// Fail unless the model was built for `expected` fonts.
    pub fn check_fonts(&self, expected: usize) -> Result<()> {
        if self.config.fonts != expected {
            return Err(ModelError::FontCount {
                expected,
                found: self.config.fonts,
            });
        }
        Ok(())
    }

    /// Translate one word to `target_font`.
    pub fn translate(&self, source: &PatchSequence, target_font: usize, mode: Mode) -> Result<PatchSequence> {
        let tape = Tape::new();
        let x = tape.constant(&source.to_tensor());
        let y = self.generator.forward(&tape, x, source.count(), &[target_font], mode)?;
        let values = y.value().into_values();
        Ok(PatchSequence::from_values(values, source.original_width())?)
    }

    /// Translate a word image of any size: scale to height 32, translate,
    /// assemble and scale back to the input size.
    pub fn translate_image(&self, image: &WordImage, target_font: usize, mode: Mode) -> Result<WordImage> {
        let seq = PatchSequence::extract(&resize_to_height(image, PATCH))?;
        let out = self.translate(&seq, target_font, mode)?.assemble()?;
        Ok(resample(&out, image.height(), image.width()))
    }
}

/// Stack equal-length sequences into a `(T * B, 1, 32, 32)` time-major tensor.
pub fn time_major(seqs: &[&PatchSequence]) -> std::result::Result<Tensor, TensorError> {
    let steps = seqs.first().map_or(0, |s| s.count());
    if steps == 0 || seqs.iter().any(|s| s.count() != steps) {
        return Err(TensorError::Contract(
            "time_major: batch must be non-empty with equal patch counts".into(),
        ));
    }
    let mut values = Vec::with_capacity(steps * seqs.len() * PATCH * PATCH);
    for t in 0..steps {
        for s in seqs {
            values.extend_from_slice(s.patch(t));
        }
    }
    Tensor::new([steps * seqs.len(), 1, PATCH, PATCH], values)
}

/// Inverse of [`time_major`]: one flat `T * 32 * 32` block per word.
pub fn split_time_major(values: &[f64], steps: usize, batch: usize) -> Vec<Vec<f64>> {
    let p = PATCH * PATCH;
    (0..batch)
        .map(|b| {
            let mut word = Vec::with_capacity(steps * p);
            for t in 0..steps {
                let row = t * batch + b;
                word.extend_from_slice(&values[row * p..(row + 1) * p]);
            }
            word
        })
        .collect()
}
