//! Per-channel batch normalisation.

use super::{Result, TensorError, Var};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the old running value in the running-statistics update.
pub const BN_MOMENTUM: f64 = 0.9;

/// Which statistics normalise the input.
#[derive(Clone, Copy, Debug)]
pub enum NormMode<'a> {
    /// Statistics of the current batch.
    Train,
    /// Stored running statistics.
    Infer { mean: &'a [f64], var: &'a [f64] },
}

/// Per-channel statistics of one train-mode batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Biased (population) variance, the one used for normalisation.
    pub var: Vec<f64>,
    pub count: usize,
}

impl BatchStats {
    /// Fold this batch into running statistics (unbiased variance).
    pub fn update_running(&self, running_mean: &mut [f64], running_var: &mut [f64]) {
        let correction = self.count as f64 / (self.count as f64 - 1.0);
        for c in 0..self.mean.len() {
            running_mean[c] = BN_MOMENTUM * running_mean[c] + (1.0 - BN_MOMENTUM) * self.mean[c];
            running_var[c] = BN_MOMENTUM * running_var[c] + (1.0 - BN_MOMENTUM) * self.var[c] * correction;
        }
    }
}

impl<'t> Var<'t> {
    /// Normalise `(N, C, ...)` per channel, then scale by `gamma` and shift by
    /// `beta`. Train mode also returns the batch statistics so the caller can
    /// update its running buffers.
    pub fn batch_norm(
        &self,
        gamma: &Var<'t>,
        beta: &Var<'t>,
        mode: NormMode<'_>,
    ) -> Result<(Var<'t>, Option<BatchStats>)> {
        let shape = self.shape();
        if shape.len() < 2 {
            return Err(TensorError::BadRank {
                op: "batch_norm",
                expected: "rank >= 2 (N, C, ...)",
                got: shape,
            });
        }
        let (n, c) = (shape[0], shape[1]);
        let spatial: usize = shape[2..].iter().product();
        for p in [gamma, beta] {
            if p.shape() != [c] {
                return Err(TensorError::ShapeMismatch {
                    op: "batch_norm",
                    left: shape,
                    right: p.shape(),
                });
            }
        }
        let count = n * spatial;
        let (mean, var, stats) = match mode {
            NormMode::Train => {
                if count < 2 {
                    return Err(TensorError::DegenerateStatistics {
                        samples_per_channel: count,
                    });
                }
                let (mean, var) = self.with_value(|x| channel_moments(x, n, c, spatial));
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: var.clone(),
                    count,
                };
                (mean, var, Some(stats))
            }
            NormMode::Infer { mean, var } => {
                if mean.len() != c || var.len() != c {
                    return Err(TensorError::DataLength {
                        expected: c,
                        got: mean.len().min(var.len()),
                    });
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
        let xhat: Vec<f64> = self.with_value(|x| {
            let mut out = vec![0.0; x.len()];
            for b in 0..n {
                for ch in 0..c {
                    let base = (b * c + ch) * spatial;
                    for i in base..base + spatial {
                        out[i] = (x[i] - mean[ch]) * inv_std[ch];
                    }
                }
            }
            out
        });
        let mut y = vec![0.0; xhat.len()];
        gamma.with_value(|gv| {
            beta.with_value(|bv| {
                for b in 0..n {
                    for ch in 0..c {
                        let base = (b * c + ch) * spatial;
                        for i in base..base + spatial {
                            y[i] = gv[ch] * xhat[i] + bv[ch];
                        }
                    }
                }
            })
        });
        let batch_stats = matches!(mode, NormMode::Train);
        let (ix, ig, ib) = (self.id, gamma.id, beta.id);
        let out = self.tape.push(
            shape,
            y,
            &[*self, *gamma, *beta],
            Box::new(move |g, nodes, sink| {
                let mut sum_g = vec![0.0; c];
                let mut sum_gx = vec![0.0; c];
                for b in 0..n {
                    for ch in 0..c {
                        let base = (b * c + ch) * spatial;
                        for i in base..base + spatial {
                            sum_g[ch] += g[i];
                            sum_gx[ch] += g[i] * xhat[i];
                        }
                    }
                }
                if sink.wants(ix) {
                    let gv = &nodes[ig].value;
                    let m = count as f64;
                    let s = sink.slot(ix);
                    for b in 0..n {
                        for ch in 0..c {
                            let base = (b * c + ch) * spatial;
                            let k = gv[ch] * inv_std[ch];
                            for i in base..base + spatial {
                                s[i] += if batch_stats {
                                    k / m * (m * g[i] - sum_g[ch] - xhat[i] * sum_gx[ch])
                                } else {
                                    k * g[i]
                                };
                            }
                        }
                    }
                }
                sink.add(ig, &sum_gx);
                sink.add(ib, &sum_g);
            }),
        );
        Ok((out, stats))
    }
}

fn channel_moments(x: &[f64], n: usize, c: usize, spatial: usize) -> (Vec<f64>, Vec<f64>) {
    let m = (n * spatial) as f64;
    let mut mean = vec![0.0; c];
    for b in 0..n {
        for (ch, m) in mean.iter_mut().enumerate() {
            let base = (b * c + ch) * spatial;
            *m += x[base..base + spatial].iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut var = vec![0.0; c];
    for b in 0..n {
        for (ch, (v, &mu)) in var.iter_mut().zip(&mean).enumerate() {
            let base = (b * c + ch) * spatial;
            *v += x[base..base + spatial].iter().map(|x| (x - mu).powi(2)).sum::<f64>();
        }
    }
    var.iter_mut().for_each(|v| *v /= m);
    (mean, var)
}
