use super::{NamedParam, Result, TensorError};

/// Adam hyper-parameters.
///
/// `weight_decay` is an L2 penalty `lambda * |w|^2`, added to the gradient as
/// `2 * lambda * w` before the moment updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// First and second moment estimates of one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Adam optimizer bound to an ordered parameter list.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    names: Vec<String>,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[NamedParam]) -> Self {
        let moments = params
            .iter()
            .map(|(_, p)| {
                let n = p.len();
                Moments {
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                }
            })
            .collect();
        Self {
            config,
            step: 0,
            names: params.iter().map(|(n, _)| n.clone()).collect(),
            moments,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of completed updates.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn moments(&self) -> &[Moments] {
        &self.moments
    }

    /// Reinstate a saved state; lengths must match the current layout.
    pub fn restore(&mut self, step: u64, moments: Vec<Moments>) -> Result<()> {
        if moments.len() != self.moments.len() {
            return Err(TensorError::OptimizerMismatch {
                detail: format!("expected {} moment pairs, got {}", self.moments.len(), moments.len()),
            });
        }
        for ((name, old), new) in self.names.iter().zip(&self.moments).zip(&moments) {
            if old.m.len() != new.m.len() || old.v.len() != new.v.len() {
                return Err(TensorError::OptimizerMismatch {
                    detail: format!("moment length mismatch for `{name}`"),
                });
            }
        }
        self.step = step;
        self.moments = moments;
        Ok(())
    }

    /// One bias-corrected Adam update from the params' accumulated gradients.
    /// A param without a gradient is treated as having a zero gradient. If any
    /// gradient is not finite, nothing is updated.
    pub fn step(&mut self, params: &[NamedParam]) -> Result<()> {
        if params.len() != self.moments.len() {
            return Err(TensorError::OptimizerMismatch {
                detail: format!(
                    "optimizer holds {} params, step got {}",
                    self.moments.len(),
                    params.len()
                ),
            });
        }
        for ((name, p), expected) in params.iter().zip(&self.names) {
            if name != expected {
                return Err(TensorError::OptimizerMismatch {
                    detail: format!("expected param `{expected}`, got `{name}`"),
                });
            }
            if let Some(g) = p.borrow().grad() {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(TensorError::NonFiniteGradient { param: name.clone() });
                }
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for ((_, p), mom) in params.iter().zip(&mut self.moments) {
            let mut tensor = p.borrow_mut();
            let grad = tensor.grad().map(|g| g.to_vec());
            let w = tensor.values_mut();
            for i in 0..w.len() {
                let g = grad.as_ref().map_or(0.0, |g| g[i]) + 2.0 * weight_decay * w[i];
                mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * g;
                mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * g * g;
                let m_hat = mom.m[i] / bias1;
                let v_hat = mom.v[i] / bias2;
                w[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
