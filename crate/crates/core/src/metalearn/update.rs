use super::config::{AlphaChainRule, TrainLoopConfig};
use super::state::MetaState;
use crate::domains::EpisodeKind;
use crate::error::{invalid, Error, Result};
use crate::ndcore::{
    adam_step, backward, blend, features_batch, sgd_step, Gradient, LabeledBatch, ParamVector,
};
use crate::prototypes::{domain_weights_embedded, DomainWeights, EmbeddedEpisode, PrototypeStore};
use crate::scalar::Scalar;

/// `steps` plain gradient-descent steps of the task subnetwork on support features.
pub fn adapt_embedded<T: Scalar>(
    theta: &ParamVector<T>,
    support: &LabeledBatch<T>,
    gamma: T,
    steps: usize,
) -> Result<ParamVector<T>> {
    let mut adapted = theta.clone();
    let first = theta.layers().start;
    for _ in 0..steps {
        let (_, grad) = backward(&adapted, support, first)?;
        adapted = sgd_step(&adapted, &grad, gamma)?;
    }
    Ok(adapted)
}

/// Adapts `theta` to a raw support set seen through the frozen extractor `phi`.
pub fn inner_adapt<T: Scalar>(
    theta: &ParamVector<T>,
    phi: &ParamVector<T>,
    support: &LabeledBatch<T>,
    gamma: T,
    steps: usize,
) -> Result<ParamVector<T>> {
    adapt_embedded(theta, &features_batch(phi, support)?, gamma, steps)
}

/// Query-set gradient at the adapted parameters (first-order meta-gradient of one task).
pub fn task_meta_gradient<T: Scalar>(
    theta: &ParamVector<T>,
    task: &EmbeddedEpisode<T>,
    cfg: &TrainLoopConfig,
) -> Result<(T, Gradient<T>)> {
    let adapted = adapt_embedded(theta, &task.support, T::lit(cfg.gamma), cfg.inner_steps)?;
    backward(&adapted, &task.query, adapted.layers().start)
}

/// Sum of per-task first-order meta-gradients over a batch, and the mean query loss.
pub fn pure_meta_gradient<T: Scalar>(
    theta: &ParamVector<T>,
    batch: &[EmbeddedEpisode<T>],
    cfg: &TrainLoopConfig,
) -> Result<(T, Gradient<T>)> {
    let mut total = Gradient::zeros(theta.len());
    let mut loss = T::zero();
    for task in batch {
        let (l, g) = task_meta_gradient(theta, task, cfg)?;
        total.add_scaled(&g, T::one())?;
        loss += l;
    }
    Ok((loss / T::of_usize(batch.len().max(1)), total))
}

impl<T: Scalar> MetaState<T> {
    /// One outer step of domain `k` from a batch of its pure tasks. Returns the mean query loss.
    pub fn pure_task_outer_update(
        &mut self,
        k: usize,
        batch: &[EmbeddedEpisode<T>],
        cfg: &TrainLoopConfig,
    ) -> Result<T> {
        let domain = *self
            .domain_ids
            .get(k)
            .ok_or_else(|| invalid(format!("no domain at index {k}")))?;
        if batch.is_empty() {
            return Err(invalid("empty task batch"));
        }
        for task in batch {
            if task.kind != EpisodeKind::Pure
                || task.domains.len() != 1
                || !task.domains.contains(&domain)
            {
                return Err(invalid(format!(
                    "pure update of domain {domain} got a {:?} task from {:?}",
                    task.kind, task.domains
                )));
            }
        }
        let (loss, grad) = pure_meta_gradient(&self.thetas[k], batch, cfg)?;
        self.thetas[k] = adam_step(&mut self.opt_states[k], &self.thetas[k], &grad)?;
        Ok(loss)
    }

    /// Blend weights for a task: similarity-based, or uniform when requested.
    pub fn weights_for(
        &self,
        support: &LabeledBatch<T>,
        stores: &[PrototypeStore<T>],
        uniform: bool,
    ) -> Result<DomainWeights<T>> {
        if uniform {
            return DomainWeights::uniform(self.num_domains());
        }
        self.check_store_order(stores)?;
        if let Some(s) = stores.iter().find(|s| s.is_empty()) {
            return Err(Error::Precondition(format!(
                "prototype store {} has no tasks yet",
                s.domain_id()
            )));
        }
        domain_weights_embedded(support, stores)
    }

    fn check_store_order(&self, stores: &[PrototypeStore<T>]) -> Result<()> {
        if stores.len() != self.num_domains()
            || stores
                .iter()
                .zip(&self.domain_ids)
                .any(|(s, &d)| s.domain_id() != d)
        {
            return Err(invalid(
                "prototype stores must align with the seen-domain order",
            ));
        }
        Ok(())
    }

    /// Per-domain gradient contributions of a batch of mixed tasks, before any optimizer step.
    pub fn mixed_task_contributions(
        &self,
        stores: &[PrototypeStore<T>],
        batch: &[EmbeddedEpisode<T>],
        cfg: &TrainLoopConfig,
    ) -> Result<Vec<Gradient<T>>> {
        let mut contributions: Vec<Gradient<T>> = self
            .thetas
            .iter()
            .map(|t| Gradient::zeros(t.len()))
            .collect();
        for task in batch {
            let alpha = self.weights_for(&task.support, stores, cfg.uniform_weights)?;
            let theta = blend(&self.thetas, &alpha.alphas)?;
            let (_, grad) = task_meta_gradient(&theta, task, cfg)?;
            for (c, &a) in contributions.iter_mut().zip(&alpha.alphas) {
                let factor = match cfg.alpha_chain_rule {
                    AlphaChainRule::SingleAlpha => a,
                    AlphaChainRule::DoubleAlpha => a * a,
                };
                if !factor.is_zero() {
                    c.add_scaled(&grad, factor)?;
                }
            }
        }
        Ok(contributions)
    }

    /// One outer step per domain from a batch of mixed tasks. A domain whose
    /// accumulated contribution is exactly zero received no gradient and is
    /// not stepped.
    pub fn mixed_task_update(
        &mut self,
        stores: &[PrototypeStore<T>],
        batch: &[EmbeddedEpisode<T>],
        cfg: &TrainLoopConfig,
    ) -> Result<()> {
        let contributions = self.mixed_task_contributions(stores, batch, cfg)?;
        for (k, grad) in contributions.iter().enumerate() {
            if grad.is_all_zero() {
                continue;
            }
            self.thetas[k] = adam_step(&mut self.opt_states[k], &self.thetas[k], grad)?;
        }
        Ok(())
    }
}
