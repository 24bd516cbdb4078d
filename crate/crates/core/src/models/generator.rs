//! Patch encoder, recurrent core, decoder, and the two generator variants.

use rand_chacha::ChaCha8Rng;

use super::layers::{BatchNorm, Conv, Dense, Embedding, Lstm};
use super::{Mode, ModelConfig, ModelKind};
use crate::dataset::PATCH;
use crate::tensor::{Activation, LstmState, NamedParam, Result, Tape, TensorError, Var};

/// Five stride-2 convolutions, each followed by batch norm and leaky ReLU:
/// `(N, 1, 32, 32) -> (N, C)` with `C` the last channel count.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub convs: Vec<Conv>,
    pub norms: Vec<BatchNorm>,
}

impl Encoder {
    pub fn new(channels: &[usize; 5], rng: &mut ChaCha8Rng) -> Self {
        let mut c_in = 1;
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        for &c in channels {
            convs.push(Conv::new(c_in, c, false, rng));
            norms.push(BatchNorm::new(c));
            c_in = c;
        }
        Self { convs, norms }
    }

    pub fn latent_dim(&self) -> usize {
        self.convs.last().expect("five layers").out_channels()
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>, mode: Mode) -> Result<Var<'t>> {
        let shape = x.shape();
        if shape.len() != 4 || shape[1..] != [1, PATCH, PATCH] {
            return Err(TensorError::BadRank {
                op: "encode_patch",
                expected: "(N, 1, 32, 32) patches",
                got: shape,
            });
        }
        let mut h = x;
        for (conv, norm) in self.convs.iter().zip(&self.norms) {
            h = norm
                .forward(tape, conv.forward(tape, h)?, mode)?
                .activation(Activation::LEAKY);
        }
        h.reshape(&[shape[0], self.latent_dim()])
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        for (i, (c, n)) in self.convs.iter().zip(&self.norms).enumerate() {
            c.collect(&format!("{prefix}.conv{i}"), out);
            n.collect(&format!("{prefix}.bn{i}"), out);
        }
    }

    pub fn collect_buffers(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        for (i, n) in self.norms.iter().enumerate() {
            n.collect_buffers(&format!("{prefix}.bn{i}"), out);
        }
    }
}

/// Mirror of the encoder: five transposed convolutions, batch norm and leaky
/// ReLU after all but the last, then tanh. `(N, C) -> (N, 1, 32, 32)`.
#[derive(Clone, Debug)]
pub struct Decoder {
    pub convs: Vec<Conv>,
    pub norms: Vec<BatchNorm>,
}

impl Decoder {
    pub fn new(encoder_channels: &[usize; 5], rng: &mut ChaCha8Rng) -> Self {
        let mut chain: Vec<usize> = encoder_channels.iter().rev().copied().collect();
        chain.push(1);
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        for w in chain.windows(2) {
            convs.push(Conv::new(w[0], w[1], true, rng));
        }
        for &c in &chain[1..chain.len() - 1] {
            norms.push(BatchNorm::new(c));
        }
        Self { convs, norms }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, features: Var<'t>, mode: Mode) -> Result<Var<'t>> {
        let shape = features.shape();
        let c = self.convs[0].kernels.shape()[0];
        if shape.len() != 2 || shape[1] != c {
            return Err(TensorError::ShapeMismatch {
                op: "decode_feature",
                left: shape,
                right: vec![c],
            });
        }
        let mut h = features.reshape(&[shape[0], c, 1, 1])?;
        let last = self.convs.len() - 1;
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(tape, h)?;
            if i < last {
                h = self.norms[i].forward(tape, h, mode)?.activation(Activation::LEAKY);
            }
        }
        Ok(h.tanh())
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        for (i, c) in self.convs.iter().enumerate() {
            c.collect(&format!("{prefix}.deconv{i}"), out);
        }
        for (i, n) in self.norms.iter().enumerate() {
            n.collect(&format!("{prefix}.bn{i}"), out);
        }
    }

    pub fn collect_buffers(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        for (i, n) in self.norms.iter().enumerate() {
            n.collect_buffers(&format!("{prefix}.bn{i}"), out);
        }
    }
}

/// Two stacked bidirectional LSTM layers with previous-output feedback.
///
/// A forward scan that feeds its own projected output back cannot also see
/// the backward direction of the same step without a cycle, so the core runs
/// in two passes:
///
/// 1. Context: layer-1 forward over `[z_t, e, 0]`, layer-1 backward over
///    `[z_t, e]`, then layer-2 backward over both layer-1 outputs.
/// 2. Generation: a forward scan where layer 1 reads `[z_t, e, h'_{t-1}]`,
///    layer 2 reads `[l1f_t, l1b_t]`, and `h'_t = W [l2f_t, l2b_t] + b`.
///
/// `h'_0` is the zero vector.
#[derive(Clone, Debug)]
pub struct RecurrentCore {
    pub l1_fwd: Lstm,
    pub l1_bwd: Lstm,
    pub l2_fwd: Lstm,
    pub l2_bwd: Lstm,
    pub projection: Dense,
}

impl RecurrentCore {
    pub fn new(latent: usize, embed: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            l1_fwd: Lstm::new(latent + embed + latent, hidden, rng),
            l1_bwd: Lstm::new(latent + embed, hidden, rng),
            l2_fwd: Lstm::new(2 * hidden, hidden, rng),
            l2_bwd: Lstm::new(2 * hidden, hidden, rng),
            projection: Dense::new(2 * hidden, latent, rng),
        }
    }

    /// `latents` is `(T * B, C)` in time-major order (row `t * B + b`),
    /// `embedding` is `(B, E)`. Returns `(T * B, C)` in the same order.
    pub fn forward<'t>(&self, tape: &'t Tape, latents: Var<'t>, embedding: Var<'t>, steps: usize) -> Result<Var<'t>> {
        let shape = latents.shape();
        if steps == 0 || shape.len() != 2 || shape[0] == 0 {
            return Err(TensorError::Contract("recurrent_core: empty latent sequence".into()));
        }
        let (rows, c) = (shape[0], shape[1]);
        let batch = rows / steps;
        if batch * steps != rows || embedding.shape()[0] != batch {
            return Err(TensorError::Contract(format!(
                "recurrent_core: {rows} latent rows do not split into {steps} steps of {} words",
                embedding.shape()[0]
            )));
        }
        let u = self.l1_fwd.hidden();
        let z: Vec<Var<'t>> = (0..steps)
            .map(|t| latents.slice_rows(t * batch, (t + 1) * batch))
            .collect::<Result<_>>()?;
        let (w1f, w1b) = (self.l1_fwd.weights(tape), self.l1_bwd.weights(tape));
        let (w2f, w2b) = (self.l2_fwd.weights(tape), self.l2_bwd.weights(tape));
        let zero_feedback = tape.zeros(&[batch, c]);

        let mut state = LstmState::zeros(tape, batch, u);
        let mut l1f_context = Vec::with_capacity(steps);
        for zt in &z {
            state = Var::concat_cols(&[*zt, embedding, zero_feedback])?.lstm_cell(&state, &w1f)?;
            l1f_context.push(state.h);
        }
        let mut l1b = vec![zero_feedback; steps];
        state = LstmState::zeros(tape, batch, u);
        for t in (0..steps).rev() {
            state = Var::concat_cols(&[z[t], embedding])?.lstm_cell(&state, &w1b)?;
            l1b[t] = state.h;
        }
        let mut l2b = vec![zero_feedback; steps];
        state = LstmState::zeros(tape, batch, u);
        for t in (0..steps).rev() {
            state = Var::concat_cols(&[l1f_context[t], l1b[t]])?.lstm_cell(&state, &w2b)?;
            l2b[t] = state.h;
        }

        let mut s1 = LstmState::zeros(tape, batch, u);
        let mut s2 = LstmState::zeros(tape, batch, u);
        let mut feedback = zero_feedback;
        let mut outputs = Vec::with_capacity(steps);
        for t in 0..steps {
            s1 = Var::concat_cols(&[z[t], embedding, feedback])?.lstm_cell(&s1, &w1f)?;
            s2 = Var::concat_cols(&[s1.h, l1b[t]])?.lstm_cell(&s2, &w2f)?;
            feedback = self.projection.forward(tape, Var::concat_cols(&[s2.h, l2b[t]])?)?;
            outputs.push(feedback);
        }
        Var::concat_rows(&outputs)
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.l1_fwd.collect(&format!("{prefix}.l1f"), out);
        self.l1_bwd.collect(&format!("{prefix}.l1b"), out);
        self.l2_fwd.collect(&format!("{prefix}.l2f"), out);
        self.l2_bwd.collect(&format!("{prefix}.l2b"), out);
        self.projection.collect(&format!("{prefix}.proj"), out);
    }
}

#[derive(Clone, Debug)]
pub enum Core {
    Recurrent(RecurrentCore),
    /// Per-patch fuse of latent and label embedding.
    Baseline(Dense),
}

/// Encoder → core → decoder, conditioned on a target font label.
#[derive(Clone, Debug)]
pub struct Generator {
    pub encoder: Encoder,
    pub embedding: Embedding,
    pub core: Core,
    pub decoder: Decoder,
}

impl Generator {
    pub fn new(config: &ModelConfig, kind: ModelKind, rng: &mut ChaCha8Rng) -> Self {
        let encoder = Encoder::new(&config.encoder_channels, rng);
        let latent = encoder.latent_dim();
        let embedding = Embedding::new(config.fonts, config.embed_dim, rng);
        let core = match kind {
            ModelKind::Recurrent => Core::Recurrent(RecurrentCore::new(latent, config.embed_dim, config.hidden, rng)),
            ModelKind::Baseline => Core::Baseline(Dense::new(latent + config.embed_dim, latent, rng)),
        };
        let decoder = Decoder::new(&config.encoder_channels, rng);
        Self {
            encoder,
            embedding,
            core,
            decoder,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.core {
            Core::Recurrent(_) => ModelKind::Recurrent,
            Core::Baseline(_) => ModelKind::Baseline,
        }
    }

    /// Latent features after the core, `(T * B, C)` time-major.
    pub fn features<'t>(&self, tape: &'t Tape, latents: Var<'t>, steps: usize, labels: &[usize]) -> Result<Var<'t>> {
        let rows = latents.shape()[0];
        if steps == 0 || labels.is_empty() || rows != steps * labels.len() {
            return Err(TensorError::Contract(format!(
                "generator: {rows} patches do not match {steps} steps × {} words",
                labels.len()
            )));
        }
        match &self.core {
            Core::Recurrent(core) => core.forward(tape, latents, self.embedding.forward(tape, labels)?, steps),
            Core::Baseline(fuse) => {
                let per_row: Vec<usize> = (0..steps).flat_map(|_| labels.iter().copied()).collect();
                let e = self.embedding.forward(tape, &per_row)?;
                fuse.forward(tape, Var::concat_cols(&[latents, e])?)
            }
        }
    }

    /// Translate a batch of `B` words of `steps` patches each.
    ///
    /// `patches` is `(T * B, 1, 32, 32)` in time-major order and `labels`
    /// holds one target font per word. The output has the same shape and
    /// order, with values in `[-1, 1]`.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        patches: Var<'t>,
        steps: usize,
        labels: &[usize],
        mode: Mode,
    ) -> Result<Var<'t>> {
        let z = self.encoder.forward(tape, patches, mode)?;
        let h = self.features(tape, z, steps, labels)?;
        self.decoder.forward(tape, h, mode)
    }

    pub fn params(&self) -> Vec<NamedParam> {
        let mut out = Vec::new();
        self.encoder.collect("gen.enc", &mut out);
        self.embedding.collect("gen.embed", &mut out);
        match &self.core {
            Core::Recurrent(core) => core.collect("gen.core", &mut out),
            Core::Baseline(fuse) => fuse.collect("gen.fuse", &mut out),
        }
        self.decoder.collect("gen.dec", &mut out);
        out
    }

    pub fn buffers(&self) -> Vec<NamedParam> {
        let mut out = Vec::new();
        self.encoder.collect_buffers("gen.enc", &mut out);
        self.decoder.collect_buffers("gen.dec", &mut out);
        out
    }
}
