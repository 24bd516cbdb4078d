//! Parameterised layers built on the tape primitives.

use rand_chacha::ChaCha8Rng;

use super::Mode;
use crate::tensor::{normal_tensor, LstmWeights, NamedParam, NormMode, Param, Result, Tape, Tensor, Var};

/// Standard deviation of every initial weight.
pub const INIT_STD: f64 = 0.02;
pub const KERNEL: usize = 5;
pub const STRIDE: usize = 2;
pub const PAD: usize = 2;

fn push(out: &mut Vec<NamedParam>, prefix: &str, name: &str, p: &Param) {
    out.push((format!("{prefix}.{name}"), p.clone()));
}

/// 5×5, stride 2, padding 2 convolution, or its transpose (output padding 1).
#[derive(Clone, Debug)]
pub struct Conv {
    pub kernels: Param,
    pub bias: Param,
    transposed: bool,
}

impl Conv {
    pub fn new(c_in: usize, c_out: usize, transposed: bool, rng: &mut ChaCha8Rng) -> Self {
        let shape = if transposed {
            [c_in, c_out, KERNEL, KERNEL]
        } else {
            [c_out, c_in, KERNEL, KERNEL]
        };
        Self {
            kernels: Param::new(normal_tensor(&shape, INIT_STD, rng)),
            bias: Param::new(Tensor::zeros([c_out])),
            transposed,
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>) -> Result<Var<'t>> {
        let (k, b) = (tape.param(&self.kernels), tape.param(&self.bias));
        if self.transposed {
            x.conv_transpose2d(&k, &b, STRIDE, PAD, 1)
        } else {
            x.conv2d(&k, &b, STRIDE, PAD)
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[if self.transposed { 1 } else { 0 }]
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "w", &self.kernels);
        push(out, prefix, "b", &self.bias);
    }
}

/// `x · W + b` with `W` of shape `(D_in, D_out)`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new(d_in: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: Param::new(normal_tensor(&[d_in, d_out], INIT_STD, rng)),
            bias: Param::new(Tensor::zeros([d_out])),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>) -> Result<Var<'t>> {
        x.dense(&tape.param(&self.weight), &tape.param(&self.bias))
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "w", &self.weight);
        push(out, prefix, "b", &self.bias);
    }
}

/// Batch norm with running statistics held in non-trainable buffers.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Param,
    pub running_var: Param,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(Tensor::full([channels], 1.0)),
            beta: Param::new(Tensor::zeros([channels])),
            running_mean: Param::buffer(Tensor::zeros([channels])),
            running_var: Param::buffer(Tensor::full([channels], 1.0)),
        }
    }

    /// `Train` normalises with batch statistics and folds them into the
    /// running buffers; `BatchStats` does the former only. A batch with a
    /// single sample per channel has no variance, so it falls back to the
    /// running statistics.
    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>, mode: Mode) -> Result<Var<'t>> {
        let (g, b) = (tape.param(&self.gamma), tape.param(&self.beta));
        let shape = x.shape();
        let count = shape[0] * shape[2..].iter().product::<usize>();
        if mode != Mode::Infer && count >= 2 {
            let (y, stats) = x.batch_norm(&g, &b, NormMode::Train)?;
            if mode == Mode::Train {
                let stats = stats.expect("train mode yields statistics");
                let mut rm = self.running_mean.borrow_mut();
                let mut rv = self.running_var.borrow_mut();
                stats.update_running(rm.values_mut(), rv.values_mut());
            }
            return Ok(y);
        }
        let rm = self.running_mean.borrow();
        let rv = self.running_var.borrow();
        Ok(x.batch_norm(
            &g,
            &b,
            NormMode::Infer {
                mean: rm.values(),
                var: rv.values(),
            },
        )?
        .0)
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "gamma", &self.gamma);
        push(out, prefix, "beta", &self.beta);
    }

    pub fn collect_buffers(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "running_mean", &self.running_mean);
        push(out, prefix, "running_var", &self.running_var);
    }
}

/// Learned `(K, E)` label table.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: Param,
}

impl Embedding {
    pub fn new(classes: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            table: Param::new(normal_tensor(&[classes, dim], INIT_STD, rng)),
        }
    }

    pub fn classes(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn forward<'t>(&self, tape: &'t Tape, labels: &[usize]) -> Result<Var<'t>> {
        tape.param(&self.table).gather_rows(labels)
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "table", &self.table);
    }
}

/// Weights of one LSTM direction.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub input: Param,
    pub recurrent: Param,
    pub bias: Param,
}

impl Lstm {
    /// Forget-gate biases start at 1.
    pub fn new(d_in: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].fill(1.0);
        Self {
            input: Param::new(normal_tensor(&[d_in, 4 * hidden], INIT_STD, rng)),
            recurrent: Param::new(normal_tensor(&[hidden, 4 * hidden], INIT_STD, rng)),
            bias: Param::new(Tensor::new([4 * hidden], bias).expect("bias length")),
        }
    }

    pub fn hidden(&self) -> usize {
        self.recurrent.shape()[0]
    }

    pub fn weights<'t>(&self, tape: &'t Tape) -> LstmWeights<'t> {
        LstmWeights {
            input: tape.param(&self.input),
            recurrent: tape.param(&self.recurrent),
            bias: tape.param(&self.bias),
        }
    }

    pub fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "wi", &self.input);
        push(out, prefix, "wr", &self.recurrent);
        push(out, prefix, "b", &self.bias);
    }
}
