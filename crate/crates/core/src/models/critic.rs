//! Discriminator and classifier over a shared convolutional trunk.

use rand_chacha::ChaCha8Rng;

use super::layers::{Conv, Dense, Embedding};
use super::ModelConfig;
use crate::dataset::PATCH;
use crate::tensor::{Activation, NamedParam, Result, Tape, TensorError, Var};

/// Four stride-2 convolutions with leaky ReLU and no normalisation:
/// `(N, 1, 32, 32) -> (N, 4 * C)` (a flattened 2×2×C map).
#[derive(Clone, Debug)]
pub struct Trunk {
    pub convs: Vec<Conv>,
}

impl Trunk {
    pub fn new(channels: &[usize; 4], rng: &mut ChaCha8Rng) -> Self {
        let mut c_in = 1;
        let convs = channels
            .iter()
            .map(|&c| {
                let conv = Conv::new(c_in, c, false, rng);
                c_in = c;
                conv
            })
            .collect();
        Self { convs }
    }

    pub fn feature_dim(&self) -> usize {
        4 * self.convs.last().expect("four layers").out_channels()
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>) -> Result<Var<'t>> {
        let shape = x.shape();
        if shape.len() != 4 || shape[1..] != [1, PATCH, PATCH] {
            return Err(TensorError::BadRank {
                op: "critic",
                expected: "(N, 1, 32, 32) patches",
                got: shape,
            });
        }
        let mut h = x;
        for conv in &self.convs {
            h = conv.forward(tape, h)?.activation(Activation::LEAKY);
        }
        h.reshape(&[shape[0], self.feature_dim()])
    }

    pub fn collect(&self, out: &mut Vec<NamedParam>) {
        for (i, c) in self.convs.iter().enumerate() {
            c.collect(&format!("trunk.conv{i}"), out);
        }
    }
}

/// Two dense layers with a leaky ReLU between them.
#[derive(Clone, Debug)]
pub struct Head {
    pub hidden: Dense,
    pub out: Dense,
}

impl Head {
    fn new(d_in: usize, hidden: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            hidden: Dense::new(d_in, hidden, rng),
            out: Dense::new(hidden, d_out, rng),
        }
    }

    fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.hidden.forward(tape, x)?.activation(Activation::LEAKY);
        self.out.forward(tape, h)
    }

    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.hidden.collect(&format!("{prefix}.fc0"), out);
        self.out.collect(&format!("{prefix}.fc1"), out);
    }
}

/// The shared trunk, a label-conditioned real/fake head and a K-way font
/// classification head.
#[derive(Clone, Debug)]
pub struct Critic {
    pub trunk: Trunk,
    pub label_embedding: Embedding,
    pub disc_head: Head,
    pub cls_head: Head,
}

impl Critic {
    pub fn new(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let trunk = Trunk::new(&config.trunk_channels, rng);
        let f = trunk.feature_dim();
        let label_embedding = Embedding::new(config.fonts, config.embed_dim, rng);
        let disc_head = Head::new(f + config.embed_dim, config.head_hidden, 1, rng);
        let cls_head = Head::new(f, config.head_hidden, config.fonts, rng);
        Self {
            trunk,
            label_embedding,
            disc_head,
            cls_head,
        }
    }

    pub fn fonts(&self) -> usize {
        self.label_embedding.classes()
    }

    /// Trunk features, computed once and shared by both heads.
    pub fn features<'t>(&self, tape: &'t Tape, patches: Var<'t>) -> Result<Var<'t>> {
        self.trunk.forward(tape, patches)
    }

    /// `(N, 1)` probabilities that each patch is real, given one label per row.
    pub fn discriminate<'t>(&self, tape: &'t Tape, features: Var<'t>, labels: &[usize]) -> Result<Var<'t>> {
        let e = self.label_embedding.forward(tape, labels)?;
        Ok(self
            .disc_head
            .forward(tape, Var::concat_cols(&[features, e])?)?
            .sigmoid())
    }

    /// `(N, K)` font logits.
    pub fn classify<'t>(&self, tape: &'t Tape, features: Var<'t>) -> Result<Var<'t>> {
        self.cls_head.forward(tape, features)
    }

    pub fn trunk_params(&self) -> Vec<NamedParam> {
        let mut out = Vec::new();
        self.trunk.collect(&mut out);
        out
    }

    /// Conditioning embedding and the two dense layers of the real/fake head.
    pub fn disc_head_params(&self) -> Vec<NamedParam> {
        let mut out = Vec::new();
        self.label_embedding.collect("disc.embed", &mut out);
        self.disc_head.collect("disc", &mut out);
        out
    }

    pub fn cls_head_params(&self) -> Vec<NamedParam> {
        let mut out = Vec::new();
        self.cls_head.collect("cls", &mut out);
        out
    }

    /// Everything a discriminator step updates.
    pub fn disc_params(&self) -> Vec<NamedParam> {
        let mut out = self.trunk_params();
        out.extend(self.disc_head_params());
        out
    }

    /// Everything a classifier step updates.
    pub fn cls_params(&self) -> Vec<NamedParam> {
        let mut out = self.trunk_params();
        out.extend(self.cls_head_params());
        out
    }

    /// Each parameter exactly once.
    pub fn params(&self) -> Vec<NamedParam> {
        let mut out = self.trunk_params();
        out.extend(self.disc_head_params());
        out.extend(self.cls_head_params());
        out
    }
}
