use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// How a mixed task's query gradient is credited to each domain's meta-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlphaChainRule {
    /// `α_k · g`: the chain rule through `θ = Σ α_k θ_k`.
    #[default]
    SingleAlpha,
    /// `α_k² · g`: an explicit `α_k` loss weight composed with the chain rule.
    DoubleAlpha,
}

/// Meta-training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainLoopConfig {
    /// Inner-loop SGD step size.
    pub gamma: f64,
    /// Outer-loop (Adam) learning rate.
    pub beta: f64,
    pub inner_steps: usize,
    /// Pure tasks per domain per iteration.
    pub meta_batch: usize,
    /// Mixed tasks per iteration; `None` means `meta_batch`.
    pub mixed_batch: Option<usize>,
    pub iterations: usize,
    /// Treat the adapted parameters' Jacobian as identity. Only `true` is supported.
    pub first_order: bool,
    pub alpha_chain_rule: AlphaChainRule,
    pub mixed_tasks_enabled: bool,
    pub uniform_weights: bool,
    /// Start every domain from one shared random draw instead of independent draws.
    pub shared_init: bool,
    /// Maximum stored task prototypes per domain; `None` keeps all of them.
    pub prototype_cap: Option<usize>,
}

impl Default for TrainLoopConfig {
    fn default() -> Self {
        Self {
            gamma: 0.01,
            beta: 0.001,
            inner_steps: 5,
            meta_batch: 4,
            mixed_batch: None,
            iterations: 500,
            first_order: true,
            alpha_chain_rule: AlphaChainRule::SingleAlpha,
            mixed_tasks_enabled: true,
            uniform_weights: false,
            shared_init: true,
            prototype_cap: None,
        }
    }
}

impl TrainLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(config(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.meta_batch == 0 || self.mixed_batch == Some(0) {
            return Err(config("task batches must be non-empty"));
        }
        if !self.first_order {
            return Err(config(
                "second-order meta-gradients are not supported; set first_order = true",
            ));
        }
        Ok(())
    }

    pub fn mixed_batch_size(&self) -> usize {
        self.mixed_batch.unwrap_or(self.meta_batch)
    }
}

/// Non-episodic pre-training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Corpus examples per class.
    pub per_class: usize,
    pub lr: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            per_class: 100,
            lr: 1e-3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = TrainLoopConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.mixed_batch_size(), 4);
        assert!(TrainLoopConfig {
            gamma: 0.0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(TrainLoopConfig {
            first_order: false,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(TrainLoopConfig {
            mixed_batch: Some(0),
            ..c
        }
        .validate()
        .is_err());
    }

    #[test]
    fn chain_rule_names() {
        let c: TrainLoopConfig =
            serde_json::from_str(r#"{"alpha_chain_rule":"double_alpha","iterations":3}"#).unwrap();
        assert_eq!(c.alpha_chain_rule, AlphaChainRule::DoubleAlpha);
        assert_eq!(c.iterations, 3);
        assert_eq!(c.gamma, 0.01);
    }
}
