use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::models::ModelKind;
use crate::tensor::AdamConfig;

/// Training hyper-parameters. `epochs` counts every epoch, including the
/// first `pretrain_epochs` L1-only ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub lambda_adv: f64,
    pub lambda_l1: f64,
    pub lambda_cls: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Save a resumable checkpoint every this many epochs (and after the last).
    pub checkpoint_interval: usize,
    pub manifest: Option<PathBuf>,
    pub model: ModelKind,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 60,
            pretrain_epochs: 2,
            lambda_adv: 1.0,
            lambda_l1: 100.0,
            lambda_cls: 1.0,
            weight_decay: 1e-5,
            seed: 0,
            checkpoint_interval: 1,
            manifest: None,
            model: ModelKind::Recurrent,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, detail: String| {
            Err(ConfigError::Invalid {
                key: key.to_string(),
                detail,
            })
        };
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return invalid("learning_rate", format!("must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return invalid("batch_size", "must be at least 1".into());
        }
        if self.pretrain_epochs > self.epochs {
            return invalid(
                "pretrain_epochs",
                format!("{} exceeds epochs = {}", self.pretrain_epochs, self.epochs),
            );
        }
        for (key, v) in [
            ("lambda_adv", self.lambda_adv),
            ("lambda_l1", self.lambda_l1),
            ("lambda_cls", self.lambda_cls),
            ("weight_decay", self.weight_decay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(key, format!("must be a non-negative number, got {v}"));
            }
        }
        if self.checkpoint_interval == 0 {
            return invalid("checkpoint_interval", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c: TrainingConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, TrainingConfig::default());
        assert_eq!((c.learning_rate, c.batch_size, c.epochs), (0.001, 32, 60));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_keys_and_ranges_rejected() {
        assert!(serde_json::from_str::<TrainingConfig>(r#"{"epoch": 3}"#).is_err());
        let c = TrainingConfig {
            batch_size: 0,
            ..TrainingConfig::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { key, .. }) if key == "batch_size"));
        let c = TrainingConfig {
            epochs: 1,
            ..TrainingConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainingConfig {
            lambda_cls: -1.0,
            ..TrainingConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn model_kind_is_lowercase() {
        let c: TrainingConfig = serde_json::from_str(r#"{"model": "baseline"}"#).unwrap();
        assert_eq!(c.model, ModelKind::Baseline);
    }
}
