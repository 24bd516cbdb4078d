//! Long short-term memory cell, gate order `[input, forget, candidate, output]`.

use super::ops::sigmoid;
use super::{Result, TensorError, Var};

/// Gate weights of one LSTM direction as recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LstmWeights<'t> {
    /// `(D, 4U)` input-to-gate weights.
    pub input: Var<'t>,
    /// `(U, 4U)` recurrent weights.
    pub recurrent: Var<'t>,
    /// `(4U)` gate biases.
    pub bias: Var<'t>,
}

/// Hidden and cell state, each `(N, U)`.
#[derive(Clone, Copy, Debug)]
pub struct LstmState<'t> {
    pub h: Var<'t>,
    pub c: Var<'t>,
}

impl<'t> LstmWeights<'t> {
    pub fn hidden(&self) -> usize {
        self.recurrent.shape()[0]
    }
}

impl<'t> LstmState<'t> {
    pub fn zeros(tape: &'t super::Tape, batch: usize, hidden: usize) -> Self {
        Self {
            h: tape.zeros(&[batch, hidden]),
            c: tape.zeros(&[batch, hidden]),
        }
    }
}

impl<'t> Var<'t> {
    /// One LSTM step on input `self` of shape `(N, D)`:
    /// `c_t = f * c_prev + i * g`, `h_t = o * tanh(c_t)`.
    pub fn lstm_cell(&self, prev: &LstmState<'t>, weights: &LstmWeights<'t>) -> Result<LstmState<'t>> {
        let rshape = weights.recurrent.shape();
        let u = rshape[0];
        if rshape.len() != 2 || rshape[1] != 4 * u {
            return Err(TensorError::BadRank {
                op: "lstm_cell",
                expected: "recurrent weights of shape (U, 4U)",
                got: rshape,
            });
        }
        for state in [&prev.h, &prev.c] {
            let s = state.shape();
            if s.len() != 2 || s[1] != u {
                return Err(TensorError::ShapeMismatch {
                    op: "lstm_cell",
                    left: s,
                    right: rshape,
                });
            }
        }
        let gates = self
            .dense(&weights.input, &weights.bias)?
            .add(&prev.h.matmul(&weights.recurrent)?)?;
        let hc = gates.lstm_pointwise(&prev.c)?;
        Ok(LstmState {
            h: hc.slice_cols(0, u)?,
            c: hc.slice_cols(u, 2 * u)?,
        })
    }

    /// Fused gate nonlinearities: `(N, 4U)` pre-activations and `(N, U)` cell
    /// state to `(N, 2U)` holding `[h_t | c_t]`.
    fn lstm_pointwise(&self, c_prev: &Var<'t>) -> Result<Var<'t>> {
        let gs = self.shape();
        let cs = c_prev.shape();
        if gs.len() != 2 || cs.len() != 2 || gs[0] != cs[0] || gs[1] != 4 * cs[1] {
            return Err(TensorError::ShapeMismatch {
                op: "lstm_cell",
                left: gs,
                right: cs,
            });
        }
        let (n, u) = (cs[0], cs[1]);
        // Saved activations per row: i, f, g, o, tanh(c).
        let mut saved = vec![0.0; n * 5 * u];
        let mut out = vec![0.0; n * 2 * u];
        self.with_value(|a| {
            c_prev.with_value(|cp| {
                for r in 0..n {
                    let pre = &a[r * 4 * u..(r + 1) * 4 * u];
                    let sv = &mut saved[r * 5 * u..(r + 1) * 5 * u];
                    for j in 0..u {
                        let i = sigmoid(pre[j]);
                        let f = sigmoid(pre[u + j]);
                        let g = pre[2 * u + j].tanh();
                        let o = sigmoid(pre[3 * u + j]);
                        let c = f * cp[r * u + j] + i * g;
                        let tc = c.tanh();
                        sv[j] = i;
                        sv[u + j] = f;
                        sv[2 * u + j] = g;
                        sv[3 * u + j] = o;
                        sv[4 * u + j] = tc;
                        out[r * 2 * u + j] = o * tc;
                        out[r * 2 * u + u + j] = c;
                    }
                }
            })
        });
        let (ia, ic) = (self.id, c_prev.id);
        Ok(self.tape.push(
            vec![n, 2 * u],
            out,
            &[*self, *c_prev],
            Box::new(move |grad, nodes, sink| {
                let cp = &nodes[ic].value;
                let mut dpre = vec![0.0; n * 4 * u];
                let mut dcp = vec![0.0; n * u];
                for r in 0..n {
                    let sv = &saved[r * 5 * u..(r + 1) * 5 * u];
                    for j in 0..u {
                        let (i, f, g, o, tc) = (sv[j], sv[u + j], sv[2 * u + j], sv[3 * u + j], sv[4 * u + j]);
                        let dh = grad[r * 2 * u + j];
                        let dc = grad[r * 2 * u + u + j] + dh * o * (1.0 - tc * tc);
                        let d = &mut dpre[r * 4 * u..(r + 1) * 4 * u];
                        d[j] = dc * g * i * (1.0 - i);
                        d[u + j] = dc * cp[r * u + j] * f * (1.0 - f);
                        d[2 * u + j] = dc * i * (1.0 - g * g);
                        d[3 * u + j] = dh * tc * o * (1.0 - o);
                        dcp[r * u + j] = dc * f;
                    }
                }
                sink.add(ia, &dpre);
                sink.add(ic, &dcp);
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Tape, Tensor};

    fn zero_weights(tape: &Tape, d: usize, u: usize) -> LstmWeights<'_> {
        LstmWeights {
            input: tape.zeros(&[d, 4 * u]),
            recurrent: tape.zeros(&[u, 4 * u]),
            bias: tape.zeros(&[4 * u]),
        }
    }

    #[test]
    fn all_zero_cell_stays_zero() {
        let tape = Tape::new();
        let w = zero_weights(&tape, 3, 4);
        let next = tape
            .zeros(&[2, 3])
            .lstm_cell(&LstmState::zeros(&tape, 2, 4), &w)
            .unwrap();
        assert!(next.h.value().values().iter().all(|&v| v == 0.0));
        assert!(next.c.value().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_open_gates_with_unit_cell() {
        let tape = Tape::new();
        let w = zero_weights(&tape, 3, 4);
        let prev = LstmState {
            h: tape.zeros(&[1, 4]),
            c: tape.constant(&Tensor::full([1, 4], 1.0)),
        };
        let next = tape.zeros(&[1, 3]).lstm_cell(&prev, &w).unwrap();
        for &c in next.c.value().values() {
            assert_eq!(c, 0.5);
        }
        for &h in next.h.value().values() {
            assert!((h - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
            assert!((h - 0.231059).abs() < 1e-6);
        }
    }

    #[test]
    fn hidden_size_mismatch() {
        let tape = Tape::new();
        let w = zero_weights(&tape, 3, 4);
        let prev = LstmState::zeros(&tape, 1, 5);
        assert!(tape.zeros(&[1, 3]).lstm_cell(&prev, &w).is_err());
    }
}
