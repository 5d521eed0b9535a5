use rand_chacha::ChaCha8Rng;

use super::config::TrainLoopConfig;
use super::state::MetaState;
use super::update::pure_meta_gradient;
use crate::domains::{
    sample_mixed_task, sample_pure_task, DomainAudit, DomainGenerator, SeedStreams, Stream,
    TaskShape,
};
use crate::error::{config, Result};
use crate::ndcore::{adam_step, ParamVector};
use crate::prototypes::{EmbeddedEpisode, PrototypeStore};
use crate::scalar::Scalar;

/// Final meta-parameters, prototypes and the record of consumed domains.
#[derive(Debug, Clone)]
pub struct MetaTrainOutput<T> {
    pub state: MetaState<T>,
    pub stores: Vec<PrototypeStore<T>>,
    pub audit: DomainAudit,
}

fn check_domains(gens: &[DomainGenerator], shape: &TaskShape, phi_input: usize) -> Result<()> {
    if gens.is_empty() {
        return Err(config("meta-training needs at least one seen domain"));
    }
    shape.validate()?;
    for g in gens {
        if g.input_dim() != phi_input {
            return Err(config(format!(
                "domain {} has input width {}, network expects {phi_input}",
                g.domain_id(),
                g.input_dim()
            )));
        }
        if shape.n_way > g.n_classes() {
            return Err(config(format!(
                "{}-way tasks exceed the {} classes of domain {}",
                shape.n_way,
                g.n_classes(),
                g.domain_id()
            )));
        }
    }
    let mut ids: Vec<_> = gens.iter().map(DomainGenerator::domain_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != gens.len() {
        return Err(config("seen domain ids must be distinct"));
    }
    Ok(())
}

/// Draws a pure task, records it, and maps it through the extractor.
fn draw_pure<T: Scalar>(
    gen: &DomainGenerator,
    shape: TaskShape,
    phi: &ParamVector<T>,
    rng: &mut ChaCha8Rng,
    audit: &mut DomainAudit,
) -> Result<EmbeddedEpisode<T>> {
    let ep = sample_pure_task(gen, shape, rng)?;
    audit.record_episode(&ep);
    EmbeddedEpisode::new(&ep, phi)
}

/// Iteration-by-iteration driver of domain-specific meta-training with
/// pure tasks, prototype updates and (optionally) mixed tasks.
pub struct MetaTrainer<'a, T> {
    gens: &'a [DomainGenerator],
    shape: TaskShape,
    cfg: TrainLoopConfig,
    state: MetaState<T>,
    stores: Vec<PrototypeStore<T>>,
    audit: DomainAudit,
    pure_rngs: Vec<ChaCha8Rng>,
    mixed_rng: ChaCha8Rng,
}

impl<'a, T: Scalar> MetaTrainer<'a, T> {
    pub fn new(
        gens: &'a [DomainGenerator],
        shape: TaskShape,
        phi: ParamVector<T>,
        cfg: &TrainLoopConfig,
        streams: &SeedStreams,
    ) -> Result<Self> {
        cfg.validate()?;
        check_domains(gens, &shape, phi.manifest().input_dim())?;
        let ids: Vec<usize> = gens.iter().map(DomainGenerator::domain_id).collect();
        let state = MetaState::init(
            phi,
            ids.clone(),
            shape.n_way,
            cfg,
            &mut streams.stream(Stream::ThetaInit),
        )?;
        let dim = state.phi.manifest().feature_dim();
        let stores = ids
            .iter()
            .map(|&d| {
                PrototypeStore::new(d, dim).with_cap(cfg.prototype_cap, streams.root() ^ d as u64)
            })
            .collect();
        Ok(Self {
            gens,
            shape,
            cfg: cfg.clone(),
            state,
            stores,
            audit: DomainAudit::new(),
            pure_rngs: ids
                .iter()
                .map(|&d| streams.stream(Stream::Pure(d)))
                .collect(),
            mixed_rng: streams.stream(Stream::Mixed),
        })
    }

    pub fn state(&self) -> &MetaState<T> {
        &self.state
    }

    pub fn stores(&self) -> &[PrototypeStore<T>] {
        &self.stores
    }

    pub fn audit(&self) -> &DomainAudit {
        &self.audit
    }

    /// One iteration: for each domain a batch of pure tasks (folded into its
    /// store, then one outer step), then one batch of mixed tasks.
    pub fn step(&mut self) -> Result<()> {
        for k in 0..self.gens.len() {
            let batch = (0..self.cfg.meta_batch)
                .map(|_| {
                    draw_pure(
                        &self.gens[k],
                        self.shape,
                        &self.state.phi,
                        &mut self.pure_rngs[k],
                        &mut self.audit,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            for task in &batch {
                self.stores[k].fold_embedded(task)?;
            }
            self.state.pure_task_outer_update(k, &batch, &self.cfg)?;
        }
        if self.cfg.mixed_tasks_enabled {
            let batch = (0..self.cfg.mixed_batch_size())
                .map(|_| {
                    let ep = sample_mixed_task(self.gens, self.shape, &mut self.mixed_rng)?;
                    self.audit.record_episode(&ep);
                    EmbeddedEpisode::new(&ep, &self.state.phi)
                })
                .collect::<Result<Vec<_>>>()?;
            self.state
                .mixed_task_update(&self.stores, &batch, &self.cfg)?;
        }
        self.state.iteration += 1;
        self.state.check_finite()
    }

    pub fn finish(self) -> MetaTrainOutput<T> {
        MetaTrainOutput {
            state: self.state,
            stores: self.stores,
            audit: self.audit,
        }
    }
}

/// Runs `cfg.iterations` meta-training iterations over the seen domains.
pub fn meta_train<T: Scalar>(
    gens: &[DomainGenerator],
    shape: TaskShape,
    phi: ParamVector<T>,
    cfg: &TrainLoopConfig,
    streams: &SeedStreams,
) -> Result<MetaTrainOutput<T>> {
    let mut trainer = MetaTrainer::new(gens, shape, phi, cfg, streams)?;
    for _ in 0..cfg.iterations {
        trainer.step()?;
    }
    Ok(trainer.finish())
}

/// Single-initialization MAML over the union of the seen domains' pure tasks.
///
/// Draws exactly the pure-task stream of [`MetaTrainer`] (same per-domain
/// streams, same order) and takes one outer step per domain batch, so with
/// one domain and no mixed tasks both produce the same trajectory.
pub struct MamlTrainer<'a, T> {
    gens: &'a [DomainGenerator],
    shape: TaskShape,
    cfg: TrainLoopConfig,
    state: MetaState<T>,
    audit: DomainAudit,
    pure_rngs: Vec<ChaCha8Rng>,
}

impl<'a, T: Scalar> MamlTrainer<'a, T> {
    pub fn new(
        gens: &'a [DomainGenerator],
        shape: TaskShape,
        phi: ParamVector<T>,
        cfg: &TrainLoopConfig,
        streams: &SeedStreams,
    ) -> Result<Self> {
        cfg.validate()?;
        check_domains(gens, &shape, phi.manifest().input_dim())?;
        let pooled = vec![gens[0].domain_id()];
        let state = MetaState::init(
            phi,
            pooled,
            shape.n_way,
            cfg,
            &mut streams.stream(Stream::ThetaInit),
        )?;
        Ok(Self {
            gens,
            shape,
            cfg: cfg.clone(),
            state,
            audit: DomainAudit::new(),
            pure_rngs: gens
                .iter()
                .map(|g| streams.stream(Stream::Pure(g.domain_id())))
                .collect(),
        })
    }

    pub fn theta(&self) -> &ParamVector<T> {
        &self.state.thetas[0]
    }

    pub fn state(&self) -> &MetaState<T> {
        &self.state
    }

    pub fn audit(&self) -> &DomainAudit {
        &self.audit
    }

    pub fn step(&mut self) -> Result<()> {
        for k in 0..self.gens.len() {
            let batch = (0..self.cfg.meta_batch)
                .map(|_| {
                    draw_pure(
                        &self.gens[k],
                        self.shape,
                        &self.state.phi,
                        &mut self.pure_rngs[k],
                        &mut self.audit,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let (_, grad) = pure_meta_gradient(&self.state.thetas[0], &batch, &self.cfg)?;
            self.state.thetas[0] =
                adam_step(&mut self.state.opt_states[0], &self.state.thetas[0], &grad)?;
        }
        self.state.iteration += 1;
        self.state.check_finite()
    }

    /// Final state (one theta, no prototypes) and the consumption audit.
    pub fn finish(self) -> (MetaState<T>, DomainAudit) {
        (self.state, self.audit)
    }
}

pub fn maml_train<T: Scalar>(
    gens: &[DomainGenerator],
    shape: TaskShape,
    phi: ParamVector<T>,
    cfg: &TrainLoopConfig,
    streams: &SeedStreams,
) -> Result<(MetaState<T>, DomainAudit)> {
    let mut trainer = MamlTrainer::new(gens, shape, phi, cfg, streams)?;
    for _ in 0..cfg.iterations {
        trainer.step()?;
    }
    Ok(trainer.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metalearn::fixtures::{gens, phi, SHAPE};

    fn cfg(iterations: usize) -> TrainLoopConfig {
        TrainLoopConfig {
            iterations,
            meta_batch: 2,
            ..TrainLoopConfig::default()
        }
    }

    #[test]
    fn zero_iterations_keep_the_initialization() {
        let streams = SeedStreams::new(1);
        let out = meta_train(&gens(3), SHAPE, phi(2), &cfg(0), &streams).unwrap();
        let init = MetaState::init(
            phi(2),
            vec![0, 1, 2],
            SHAPE.n_way,
            &cfg(0),
            &mut streams.stream(Stream::ThetaInit),
        )
        .unwrap();
        assert_eq!(out.state, init);
        assert!(out.stores.iter().all(PrototypeStore::is_empty));
    }

    #[test]
    fn phi_is_bit_identical_after_training() {
        let out = meta_train(&gens(3), SHAPE, phi(3), &cfg(4), &SeedStreams::new(4)).unwrap();
        assert_eq!(out.state.phi, phi(3));
        assert_eq!(out.state.iteration, 4);
        assert!(out.state.all_finite());
        assert!(out.stores.iter().all(|s| s.task_count() == 8));
    }

    #[test]
    fn training_is_deterministic() {
        let a = meta_train(&gens(3), SHAPE, phi(5), &cfg(3), &SeedStreams::new(6)).unwrap();
        let b = meta_train(&gens(3), SHAPE, phi(5), &cfg(3), &SeedStreams::new(6)).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.stores, b.stores);
        let c = meta_train(&gens(3), SHAPE, phi(5), &cfg(3), &SeedStreams::new(7)).unwrap();
        assert_ne!(a.state.thetas, c.state.thetas);
    }

    #[test]
    fn single_domain_without_mixing_is_maml() {
        let g = gens(1);
        let c = TrainLoopConfig {
            mixed_tasks_enabled: false,
            ..cfg(6)
        };
        let cos = meta_train(&g, SHAPE, phi(8), &c, &SeedStreams::new(9)).unwrap();
        let (maml, _) = maml_train(&g, SHAPE, phi(8), &c, &SeedStreams::new(9)).unwrap();
        assert_eq!(cos.state.thetas, maml.thetas);
    }

    #[test]
    fn audit_sees_only_training_domains() {
        let out = meta_train(&gens(3), SHAPE, phi(10), &cfg(2), &SeedStreams::new(11)).unwrap();
        for d in 0..3 {
            assert!(out.audit.count(d) > 0);
        }
        assert_eq!(out.audit.count(3), 0);
        let per_task = SHAPE.examples_per_task() as u64;
        assert_eq!(out.audit.total(), per_task * (2 * 3 * 2 + 2 * 2));
    }

    #[test]
    fn mismatched_domains_are_config_errors() {
        let mut g = gens(2);
        g[1] = g[0].clone();
        assert!(matches!(
            meta_train(&g, SHAPE, phi(1), &cfg(1), &SeedStreams::new(1)),
            Err(crate::Error::Config(_))
        ));
        assert!(matches!(
            meta_train(&[], SHAPE, phi(1), &cfg(1), &SeedStreams::new(1)),
            Err(crate::Error::Config(_))
        ));
    }
}
