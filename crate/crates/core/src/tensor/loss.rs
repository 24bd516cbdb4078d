//! Scalar losses. All reduce by the mean over their elements (or rows).

use super::{Result, TensorError, Var};

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

impl<'t> Var<'t> {
    /// Binary cross-entropy of probabilities `self` against a constant target
    /// label, `-[y ln p + (1 - y) ln(1 - p)]` averaged over all elements.
    ///
    /// The derivative is taken at the clamped probability, so a saturated
    /// discriminator still passes a gradient.
    pub fn bce(&self, target: f64) -> Var<'t> {
        let n = self.len() as f64;
        let loss = self.with_value(|p| {
            p.iter()
                .map(|&p| {
                    let p = clamp_prob(p);
                    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / n
        });
        let ip = self.id;
        self.tape.push(
            Vec::new(),
            vec![loss],
            &[*self],
            Box::new(move |g, nodes, sink| {
                if sink.wants(ip) {
                    let p = &nodes[ip].value;
                    let s = sink.slot(ip);
                    for (si, &pi) in s.iter_mut().zip(p) {
                        let pc = clamp_prob(pi);
                        *si += g[0] * (-(target / pc) + (1.0 - target) / (1.0 - pc)) / n;
                    }
                }
            }),
        )
    }

    /// Mean absolute difference.
    pub fn l1(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op: "l1",
                left: sa,
                right: sb,
            });
        }
        let n = self.len() as f64;
        let loss =
            self.with_value(|a| other.with_value(|b| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n));
        let (ia, ib) = (self.id, other.id);
        Ok(self.tape.push(
            Vec::new(),
            vec![loss],
            &[*self, *other],
            Box::new(move |g, nodes, sink| {
                let (a, b) = (&nodes[ia].value, &nodes[ib].value);
                let scale = g[0] / n;
                let sign: Vec<f64> = a.iter().zip(b).map(|(x, y)| scale * signum0(x - y)).collect();
                sink.add(ia, &sign);
                if sink.wants(ib) {
                    sink.slot(ib).iter_mut().zip(&sign).for_each(|(s, d)| *s -= d);
                }
            }),
        ))
    }

    /// Softmax cross-entropy of `(N, K)` logits against integer labels,
    /// averaged over rows.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Var<'t>> {
        let shape = self.shape();
        let &[n, k] = shape.as_slice() else {
            return Err(TensorError::BadRank {
                op: "cross_entropy",
                expected: "(N, K) logits",
                got: shape,
            });
        };
        if labels.len() != n {
            return Err(TensorError::DataLength {
                expected: n,
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(TensorError::LabelOutOfRange { label: bad, classes: k });
        }
        let labels = labels.to_vec();
        let (loss, probs) = self.with_value(|z| {
            let mut probs = vec![0.0; n * k];
            let mut loss = 0.0;
            for r in 0..n {
                let row = &z[r * k..(r + 1) * k];
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
                let log_sum = max + sum.ln();
                for j in 0..k {
                    probs[r * k + j] = (row[j] - log_sum).exp();
                }
                loss += log_sum - row[labels[r]];
            }
            (loss / n as f64, probs)
        });
        let iz = self.id;
        Ok(self.tape.push(
            Vec::new(),
            vec![loss],
            &[*self],
            Box::new(move |g, _, sink| {
                if sink.wants(iz) {
                    let scale = g[0] / n as f64;
                    let s = sink.slot(iz);
                    for r in 0..n {
                        for j in 0..k {
                            let onehot = if labels[r] == j { 1.0 } else { 0.0 };
                            s[r * k + j] += scale * (probs[r * k + j] - onehot);
                        }
                    }
                }
            }),
        ))
    }

    /// The adversarial value `mean ln D(real) + mean ln(1 - D(fake))` with
    /// `self` holding `D(real)`.
    pub fn gan_value(&self, d_fake: &Var<'t>) -> Var<'t> {
        let (nr, nf) = (self.len() as f64, d_fake.len() as f64);
        let real = self.with_value(|p| p.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / nr);
        let fake = d_fake.with_value(|p| p.iter().map(|&p| (1.0 - clamp_prob(p)).ln()).sum::<f64>() / nf);
        let (ir, ifk) = (self.id, d_fake.id);
        self.tape.push(
            Vec::new(),
            vec![real + fake],
            &[*self, *d_fake],
            Box::new(move |g, nodes, sink| {
                if sink.wants(ir) {
                    let p = &nodes[ir].value;
                    let s = sink.slot(ir);
                    for (si, &pi) in s.iter_mut().zip(p) {
                        *si += g[0] / (clamp_prob(pi) * nr);
                    }
                }
                if sink.wants(ifk) {
                    let p = &nodes[ifk].value;
                    let s = sink.slot(ifk);
                    for (si, &pi) in s.iter_mut().zip(p) {
                        *si -= g[0] / ((1.0 - clamp_prob(pi)) * nf);
                    }
                }
            }),
        )
    }
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use crate::tensor::{Tape, Tensor};

    #[test]
    fn gan_value_at_symmetry_point() {
        let tape = Tape::new();
        let real = tape.constant(&Tensor::full([16, 1], 0.5));
        let fake = tape.constant(&Tensor::full([16, 1], 0.5));
        let v = real.gan_value(&fake).item();
        assert!((v + 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((v + 1.386294).abs() < 1e-6);
    }

    #[test]
    fn l1_identity_is_zero() {
        let tape = Tape::new();
        let a = tape.constant(&Tensor::new([3], vec![0.1, -0.4, 0.9]).unwrap());
        assert_eq!(a.l1(&a).unwrap().item(), 0.0);
    }

    #[test]
    fn bce_clamps_saturated_probabilities() {
        let tape = Tape::new();
        let p = tape.constant(&Tensor::new([2], vec![0.0, 1.0]).unwrap());
        let real = p.bce(1.0).item();
        assert!(real.is_finite());
        let want = (-(1e-7f64).ln() - (1.0 - 1e-7f64).ln()) / 2.0;
        assert!((real - want).abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let tape = Tape::new();
        let z = tape.zeros(&[4, 3]);
        let ce = z.cross_entropy(&[0, 1, 2, 1]).unwrap().item();
        assert!((ce - 3f64.ln()).abs() < 1e-15);
        assert!(z.cross_entropy(&[0, 1, 3, 1]).is_err());
    }
}
