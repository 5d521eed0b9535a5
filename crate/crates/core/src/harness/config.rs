use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domains::{DomainSpec, GeneratorKind, TaskShape};
use crate::error::{config, Error, Result};
use crate::metalearn::{PretrainConfig, TrainLoopConfig};
use crate::ndcore::{Activation, ShapeManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cosml,
    /// Uniform blend weights instead of similarity weights.
    CosmlUniform,
    /// No mixed tasks during meta-training.
    CosmlNoMixed,
    /// One MAML initialization over the union of seen domains.
    MamlPooled,
    /// Nearest episode-class mean in the frozen feature space; no meta-training.
    NearestPrototype,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Cosml,
        Method::CosmlUniform,
        Method::CosmlNoMixed,
        Method::MamlPooled,
        Method::NearestPrototype,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cosml => "cosml",
            Method::CosmlUniform => "cosml_uniform",
            Method::CosmlNoMixed => "cosml_no_mixed",
            Method::MamlPooled => "maml_pooled",
            Method::NearestPrototype => "nearest_prototype",
        }
    }

    pub fn is_cosml(self) -> bool {
        matches!(
            self,
            Method::Cosml | Method::CosmlUniform | Method::CosmlNoMixed
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| config(format!("unknown method `{s}`")))
    }
}

fn d_n_way() -> usize {
    5
}
fn d_k_shot() -> usize {
    5
}
fn d_q_queries() -> usize {
    16
}
fn d_eval_tasks() -> usize {
    1000
}
fn d_seeds() -> Vec<u64> {
    vec![0]
}
fn d_split_index() -> usize {
    2
}
fn d_hidden_width() -> usize {
    64
}
fn d_hidden_layers() -> usize {
    4
}
fn d_method() -> Method {
    Method::Cosml
}

/// The five default synthetic domains, ids `0..5`.
pub fn default_domain_specs() -> Vec<DomainSpec> {
    GeneratorKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &k)| DomainSpec::new(i, k, 1000 + i as u64))
        .collect()
}

/// Every knob of one experiment. JSON field names match the struct fields;
/// the meta-training loop fields sit at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_domain_specs")]
    pub domain_specs: Vec<DomainSpec>,
    pub holdout_id: usize,
    pub pretrain_domain_id: usize,
    #[serde(default = "d_n_way")]
    pub n_way: usize,
    #[serde(default = "d_k_shot")]
    pub k_shot: usize,
    #[serde(default = "d_q_queries")]
    pub q_queries: usize,
    #[serde(flatten)]
    pub train: TrainLoopConfig,
    #[serde(default = "d_eval_tasks")]
    pub eval_tasks: usize,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "d_method")]
    pub method: Method,
    #[serde(default = "d_split_index")]
    pub split_index: usize,
    #[serde(default = "d_hidden_width")]
    pub hidden_width: usize,
    #[serde(default = "d_hidden_layers")]
    pub hidden_layers: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub pretrain: PretrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain_specs: default_domain_specs(),
            holdout_id: 4,
            pretrain_domain_id: 0,
            n_way: d_n_way(),
            k_shot: d_k_shot(),
            q_queries: d_q_queries(),
            train: TrainLoopConfig::default(),
            eval_tasks: d_eval_tasks(),
            seeds: d_seeds(),
            method: d_method(),
            split_index: d_split_index(),
            hidden_width: d_hidden_width(),
            hidden_layers: d_hidden_layers(),
            activation: Activation::default(),
            pretrain: PretrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain_specs.len() < 2 {
            return Err(config("need at least one seen domain and one holdout"));
        }
        let mut ids: Vec<usize> = self.domain_specs.iter().map(|d| d.domain_id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.domain_specs.len() {
            return Err(config("domain ids must be distinct"));
        }
        for spec in &self.domain_specs {
            spec.validate()?;
            if spec.n_classes < self.n_way {
                return Err(config(format!(
                    "domain {} has fewer than {} classes",
                    spec.domain_id, self.n_way
                )));
            }
        }
        let input = self.domain_specs[0].input_dim;
        if self.domain_specs.iter().any(|d| d.input_dim != input) {
            return Err(config("all domains must share one input_dim"));
        }
        if self.spec(self.holdout_id).is_none() {
            return Err(config(format!(
                "holdout {} is not a configured domain",
                self.holdout_id
            )));
        }
        if self.pretrain_domain_id == self.holdout_id
            || self.spec(self.pretrain_domain_id).is_none()
        {
            return Err(config(format!(
                "pretrain domain {} must be a seen domain",
                self.pretrain_domain_id
            )));
        }
        if self.eval_tasks == 0 {
            return Err(config("eval_tasks must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(config("at least one seed is required"));
        }
        TaskShape::new(self.n_way, self.k_shot, self.q_queries)
            .validate()
            .map_err(|e| config(e.to_string()))?;
        self.train.validate()?;
        if self.pretrain.batch_size == 0 || self.pretrain.per_class < 2 {
            return Err(config("pretrain needs batch_size >= 1 and per_class >= 2"));
        }
        self.manifest()
            .map(|_| ())
            .map_err(|e| config(e.to_string()))
    }

    pub fn spec(&self, id: usize) -> Option<&DomainSpec> {
        self.domain_specs.iter().find(|d| d.domain_id == id)
    }

    pub fn seen_specs(&self) -> Vec<DomainSpec> {
        self.domain_specs
            .iter()
            .filter(|d| d.domain_id != self.holdout_id)
            .cloned()
            .collect()
    }

    pub fn task_shape(&self) -> TaskShape {
        TaskShape::new(self.n_way, self.k_shot, self.q_queries)
    }

    /// Pre-training network: `hidden_layers` hidden layers and a head over
    /// the pre-training domain's classes.
    pub fn manifest(&self) -> Result<ShapeManifest> {
        let pre = self
            .spec(self.pretrain_domain_id)
            .ok_or_else(|| config("unknown pretrain domain"))?;
        let hidden = vec![self.hidden_width; self.hidden_layers];
        ShapeManifest::mlp(
            pre.input_dim,
            &hidden,
            pre.n_classes,
            self.activation,
            self.split_index,
        )
    }

    /// Same experiment with another holdout; the pre-training domain moves to
    /// the lowest remaining id when it would collide with the holdout.
    pub fn for_holdout(&self, holdout: usize) -> Self {
        let mut cfg = self.clone();
        cfg.holdout_id = holdout;
        if cfg.pretrain_domain_id == holdout {
            if let Some(d) = self
                .domain_specs
                .iter()
                .map(|d| d.domain_id)
                .filter(|&d| d != holdout)
                .min()
            {
                cfg.pretrain_domain_id = d;
            }
        }
        cfg
    }

    /// Meta-training loop settings with the method's ablation switches applied.
    pub fn train_config(&self) -> TrainLoopConfig {
        let mut t = self.train.clone();
        match self.method {
            Method::CosmlUniform => t.uniform_weights = true,
            Method::CosmlNoMixed => t.mixed_tasks_enabled = false,
            _ => {}
        }
        t
    }
}
