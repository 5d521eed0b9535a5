use std::sync::Arc;

use rand::Rng;

use super::config::TrainLoopConfig;
use crate::error::{invalid, Error, Result};
use crate::ndcore::{AdamConfig, AdamState, ParamVector, ShapeManifest};
use crate::scalar::Scalar;

/// Per-domain meta-parameters of the task subnetwork, their outer-loop
/// optimizer states, and the frozen extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaState<T> {
    pub thetas: Vec<ParamVector<T>>,
    pub opt_states: Vec<AdamState<T>>,
    pub phi: ParamVector<T>,
    /// Seen-domain ids, aligned with `thetas`.
    pub domain_ids: Vec<usize>,
    pub iteration: usize,
}

impl<T: Scalar> MetaState<T> {
    /// Fresh state with randomly initialized task subnetworks whose head has `n_way` outputs.
    pub fn init<R: Rng + ?Sized>(
        phi: ParamVector<T>,
        domain_ids: Vec<usize>,
        n_way: usize,
        cfg: &TrainLoopConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if domain_ids.is_empty() {
            return Err(Error::Config("at least one seen domain is required".into()));
        }
        let manifest = Arc::new(task_manifest(&phi, n_way)?);
        let layers = manifest.task_layers();
        let thetas = if cfg.shared_init {
            let theta = ParamVector::glorot(manifest.clone(), layers, rng)?;
            vec![theta; domain_ids.len()]
        } else {
            (0..domain_ids.len())
                .map(|_| ParamVector::glorot(manifest.clone(), layers.clone(), rng))
                .collect::<Result<_>>()?
        };
        Self::from_thetas(phi, domain_ids, thetas, cfg.beta)
    }

    pub fn from_thetas(
        phi: ParamVector<T>,
        domain_ids: Vec<usize>,
        thetas: Vec<ParamVector<T>>,
        beta: f64,
    ) -> Result<Self> {
        if thetas.len() != domain_ids.len() {
            return Err(invalid("one theta per seen domain is required"));
        }
        let adam = AdamConfig {
            lr: beta,
            ..AdamConfig::default()
        };
        let opt_states = thetas
            .iter()
            .map(|t| AdamState::new(t.len(), adam))
            .collect();
        let state = Self {
            thetas,
            opt_states,
            phi,
            domain_ids,
            iteration: 0,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let split = self.phi.manifest().split_index();
        if self.phi.layers() != (0..split) {
            return Err(invalid(format!(
                "phi must cover extractor layers 0..{split}"
            )));
        }
        if let Some(first) = self.thetas.first() {
            if first.layers() != first.manifest().task_layers()
                || first.manifest().split_index() != split
            {
                return Err(invalid(
                    "thetas must cover exactly the task-subnetwork layers",
                ));
            }
            if self.thetas.iter().any(|t| !t.is_aligned_with(first)) {
                return Err(invalid("all thetas must share one manifest"));
            }
            if first.manifest().layer_dims()[split].0 != self.phi.manifest().feature_dim() {
                return Err(invalid(
                    "task subnetwork input does not match the feature width",
                ));
            }
        }
        if self.opt_states.len() != self.thetas.len()
            || self
                .opt_states
                .iter()
                .zip(&self.thetas)
                .any(|(o, t)| o.len() != t.len())
        {
            return Err(invalid("optimizer states are not aligned with thetas"));
        }
        Ok(())
    }

    pub fn num_domains(&self) -> usize {
        self.thetas.len()
    }

    pub fn domain_index(&self, domain_id: usize) -> Option<usize> {
        self.domain_ids.iter().position(|&d| d == domain_id)
    }

    pub fn all_finite(&self) -> bool {
        self.thetas.iter().all(ParamVector::is_finite)
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match self.thetas.iter().position(|t| !t.is_finite()) {
            Some(k) => Err(Error::Numerical(format!(
                "meta-parameters of domain {} became non-finite at iteration {}",
                self.domain_ids[k], self.iteration
            ))),
            None => Ok(()),
        }
    }
}

/// The extractor's manifest with an `n_way` head; the task subnetwork lives in its upper layers.
pub fn task_manifest<T: Scalar>(phi: &ParamVector<T>, n_way: usize) -> Result<ShapeManifest> {
    phi.manifest().with_output_dim(n_way)
}
