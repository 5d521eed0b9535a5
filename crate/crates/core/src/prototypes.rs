//! Task and domain prototypes in the frozen feature space, task-to-domain
//! distances and the normalized inverse-distance domain weights.

use std::collections::BTreeSet;

use crate::domains::{Episode, EpisodeKind};
use crate::error::{config, invalid, Error, Result};
use crate::ndcore::{features_batch, squared_distance, LabeledBatch, ParamVector};
use crate::scalar::Scalar;

/// An episode mapped through the frozen extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedEpisode<T> {
    pub support: LabeledBatch<T>,
    pub query: LabeledBatch<T>,
    pub kind: EpisodeKind,
    pub domains: BTreeSet<usize>,
    pub n_way: usize,
}

impl<T: Scalar> EmbeddedEpisode<T> {
    pub fn new(episode: &Episode<T>, phi: &ParamVector<T>) -> Result<Self> {
        if episode.support.is_empty() {
            return Err(invalid("episode has no support examples"));
        }
        Ok(Self {
            support: features_batch(phi, &episode.support_batch()?)?,
            query: features_batch(phi, &episode.query_batch()?)?,
            kind: episode.kind,
            domains: episode.domain_tags(),
            n_way: episode.n_way(),
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.support.dim()
    }

    /// Mean feature over support and query.
    pub fn prototype(&self) -> Vec<T> {
        let mut sum = vec![T::zero(); self.feature_dim()];
        for row in self.support.rows().chain(self.query.rows()) {
            sum.iter_mut().zip(row).for_each(|(s, &v)| *s += v);
        }
        let n = T::of_usize(self.support.len() + self.query.len());
        sum.iter_mut().for_each(|s| *s /= n);
        sum
    }
}

/// Mean feature vector over the support and query examples of an episode.
pub fn task_prototype<T: Scalar>(episode: &Episode<T>, phi: &ParamVector<T>) -> Result<Vec<T>> {
    if episode.support.is_empty() && episode.query.is_empty() {
        return Err(invalid("empty episode"));
    }
    Ok(EmbeddedEpisode::new(episode, phi)?.prototype())
}

fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    squared_distance(a, b).sqrt()
}

/// Mean Euclidean distance from each support feature to `z`.
pub fn ds_features<T: Scalar>(support: &LabeledBatch<T>, z: &[T]) -> Result<T> {
    if support.is_empty() {
        return Err(invalid("empty support set"));
    }
    if support.dim() != z.len() {
        return Err(invalid(format!(
            "features of width {} against a prototype of width {}",
            support.dim(),
            z.len()
        )));
    }
    let total: T = support.rows().map(|row| euclidean(row, z)).sum();
    Ok(total / T::of_usize(support.len()))
}

/// Average distance between an episode's support examples and a prototype.
pub fn ds<T: Scalar>(support: &LabeledBatch<T>, z: &[T], phi: &ParamVector<T>) -> Result<T> {
    ds_features(&features_batch(phi, support)?, z)
}

/// Prototypes of one seen domain: every task prototype folded so far and the
/// running mean of all folded features.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeStore<T> {
    domain_id: usize,
    task_prototypes: Vec<Vec<T>>,
    domain_prototype: Vec<T>,
    example_count: u64,
    tasks_folded: u64,
    cap: Option<usize>,
    reservoir_seed: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl<T: Scalar> PrototypeStore<T> {
    pub fn new(domain_id: usize, feature_dim: usize) -> Self {
        Self {
            domain_id,
            task_prototypes: Vec::new(),
            domain_prototype: vec![T::zero(); feature_dim],
            example_count: 0,
            tasks_folded: 0,
            cap: None,
            reservoir_seed: 0,
        }
    }

    /// Keep at most `cap` task prototypes, replacing uniformly at random
    /// (reservoir sampling) once full.
    pub fn with_cap(mut self, cap: Option<usize>, reservoir_seed: u64) -> Self {
        self.cap = cap.filter(|&c| c > 0);
        self.reservoir_seed = reservoir_seed;
        self
    }

    pub(crate) fn from_parts(
        domain_id: usize,
        task_prototypes: Vec<Vec<T>>,
        domain_prototype: Vec<T>,
        example_count: u64,
        tasks_folded: u64,
        cap: Option<usize>,
        reservoir_seed: u64,
    ) -> Result<Self> {
        let dim = domain_prototype.len();
        if task_prototypes.iter().any(|z| z.len() != dim) {
            return Err(invalid(
                "task prototypes and domain prototype differ in width",
            ));
        }
        if (tasks_folded as usize) < task_prototypes.len() {
            return Err(invalid("more stored task prototypes than folded tasks"));
        }
        Ok(Self {
            domain_id,
            task_prototypes,
            domain_prototype,
            example_count,
            tasks_folded,
            cap,
            reservoir_seed,
        })
    }

    pub fn domain_id(&self) -> usize {
        self.domain_id
    }

    pub fn task_prototypes(&self) -> &[Vec<T>] {
        &self.task_prototypes
    }

    pub fn domain_prototype(&self) -> &[T] {
        &self.domain_prototype
    }

    pub fn example_count(&self) -> u64 {
        self.example_count
    }

    /// Number of stored task prototypes (the normalizer of the task-prototype average).
    pub fn task_count(&self) -> usize {
        self.task_prototypes.len()
    }

    pub fn tasks_folded(&self) -> u64 {
        self.tasks_folded
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    pub fn reservoir_seed(&self) -> u64 {
        self.reservoir_seed
    }

    pub fn feature_dim(&self) -> usize {
        self.domain_prototype.len()
    }

    pub fn is_empty(&self) -> bool {
        self.task_prototypes.is_empty()
    }

    /// Folds a pure task of this domain: appends its task prototype and
    /// updates the running domain mean with all of its features.
    pub fn fold_task(&mut self, episode: &Episode<T>, phi: &ParamVector<T>) -> Result<()> {
        self.fold_embedded(&EmbeddedEpisode::new(episode, phi)?)
    }

    pub fn fold_embedded(&mut self, ep: &EmbeddedEpisode<T>) -> Result<()> {
        if ep.kind != EpisodeKind::Pure {
            return Err(invalid(format!(
                "only pure tasks update prototypes, got {:?}",
                ep.kind
            )));
        }
        if ep.domains.len() != 1 || !ep.domains.contains(&self.domain_id) {
            return Err(invalid(format!(
                "episode from domains {:?} folded into store {}",
                ep.domains, self.domain_id
            )));
        }
        if ep.feature_dim() != self.feature_dim() {
            return Err(invalid("feature width does not match the store"));
        }
        let z = ep.prototype();
        let n_new = (ep.support.len() + ep.query.len()) as u64;
        let total = self.example_count + n_new;
        let w = T::lit(n_new as f64 / total as f64);
        for (d, &m) in self.domain_prototype.iter_mut().zip(&z) {
            *d += (m - *d) * w;
        }
        self.example_count = total;
        self.tasks_folded += 1;
        match self.cap {
            Some(cap) if self.task_prototypes.len() >= cap => {
                let j = splitmix64(self.reservoir_seed ^ splitmix64(self.tasks_folded))
                    % self.tasks_folded;
                if (j as usize) < cap {
                    self.task_prototypes[j as usize] = z;
                }
            }
            _ => self.task_prototypes.push(z),
        }
        Ok(())
    }

    /// Half the sum of the support's distance to the domain prototype and its
    /// average distance to the task prototypes.
    pub fn dist_embedded(&self, support: &LabeledBatch<T>) -> Result<T> {
        if self.is_empty() {
            return Err(Error::Precondition(format!(
                "prototype store {} has no tasks yet",
                self.domain_id
            )));
        }
        let to_domain = ds_features(support, &self.domain_prototype)?;
        let mut to_tasks = T::zero();
        for z in &self.task_prototypes {
            to_tasks += ds_features(support, z)?;
        }
        let half = T::lit(0.5);
        Ok(half * (to_domain + to_tasks / T::of_usize(self.task_count())))
    }
}

/// Task-to-domain distance computed from the episode's support set only.
pub fn dist_to_domain<T: Scalar>(
    episode: &Episode<T>,
    store: &PrototypeStore<T>,
    phi: &ParamVector<T>,
) -> Result<T> {
    store.dist_embedded(&features_batch(phi, &episode.support_batch()?)?)
}

/// Normalized similarity weights over seen domains, aligned with store order.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainWeights<T> {
    pub alphas: Vec<T>,
}

impl<T: Scalar> DomainWeights<T> {
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(config("no seen domains"));
        }
        Ok(Self {
            alphas: vec![T::one() / T::of_usize(m); m],
        })
    }

    pub fn one_hot(m: usize, k: usize) -> Self {
        let mut alphas = vec![T::zero(); m];
        alphas[k] = T::one();
        Self { alphas }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        crate::ndcore::argmax(&self.alphas)
    }
}

/// `α_k = (1/d_k) / Σ_j 1/d_j`. Zero distances take all the mass, shared
/// uniformly, which is the limit of the inverse-distance rule.
pub fn weights_from_distances<T: Scalar>(distances: &[T]) -> Result<DomainWeights<T>> {
    if distances.is_empty() {
        return Err(config("no seen domains"));
    }
    if let Some(d) = distances
        .iter()
        .find(|d| !(d.is_finite() && **d >= T::zero()))
    {
        return Err(invalid(format!(
            "distance {d} is not a finite non-negative number"
        )));
    }
    let zeros = distances.iter().filter(|d| d.is_zero()).count();
    let alphas = if zeros > 0 {
        let share = T::one() / T::of_usize(zeros);
        distances
            .iter()
            .map(|d| if d.is_zero() { share } else { T::zero() })
            .collect()
    } else {
        let inv: Vec<T> = distances.iter().map(|&d| T::one() / d).collect();
        let total: T = inv.iter().copied().sum();
        inv.into_iter().map(|a| a / total).collect()
    };
    Ok(DomainWeights { alphas })
}

/// Similarity weights of an embedded task against every store.
pub fn domain_weights_embedded<T: Scalar>(
    support: &LabeledBatch<T>,
    stores: &[PrototypeStore<T>],
) -> Result<DomainWeights<T>> {
    if stores.is_empty() || stores.iter().all(|s| s.is_empty()) {
        return Err(config(
            "domain weights need at least one warm prototype store",
        ));
    }
    let distances = stores
        .iter()
        .map(|s| s.dist_embedded(support))
        .collect::<Result<Vec<_>>>()?;
    weights_from_distances(&distances)
}

pub fn domain_weights<T: Scalar>(
    episode: &Episode<T>,
    stores: &[PrototypeStore<T>],
    phi: &ParamVector<T>,
) -> Result<DomainWeights<T>> {
    domain_weights_embedded(&features_batch(phi, &episode.support_batch()?)?, stores)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::domains::{
        make_domain, sample_mixed_task, sample_pure_task, DomainSpec, GeneratorKind, TaskShape,
    };
    use crate::ndcore::{Activation, ShapeManifest};

    /// Extractor whose single layer is the identity on 2-D inputs (ReLU keeps
    /// non-negative inputs unchanged).
    fn identity_phi() -> ParamVector<f64> {
        let m = Arc::new(ShapeManifest::mlp(2, &[2], 2, Activation::Relu, 1).unwrap());
        ParamVector::from_values(m, 0..1, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap()
    }

    fn batch(rows: &[[f64; 2]]) -> LabeledBatch<f64> {
        LabeledBatch::from_pairs(2, rows.iter().map(|r| (&r[..], 0))).unwrap()
    }

    fn embedded(support: &[[f64; 2]], query: &[[f64; 2]], domain: usize) -> EmbeddedEpisode<f64> {
        EmbeddedEpisode {
            support: batch(support),
            query: batch(query),
            kind: EpisodeKind::Pure,
            domains: [domain].into(),
            n_way: 1,
        }
    }

    #[test]
    fn prototype_of_two_points() {
        let ep = embedded(&[[0.0, 0.0]], &[[2.0, 4.0]], 0);
        assert_eq!(ep.prototype(), vec![1.0, 2.0]);
        assert_eq!(embedded(&[[3.0, 1.0]], &[], 0).prototype(), vec![3.0, 1.0]);
    }

    #[test]
    fn ds_three_four_five() {
        let phi = identity_phi();
        assert_eq!(
            ds(&batch(&[[0.0, 0.0], [3.0, 4.0]]), &[0.0, 0.0], &phi).unwrap(),
            2.5
        );
        assert_eq!(ds(&batch(&[[1.0, 2.0]]), &[1.0, 2.0], &phi).unwrap(), 0.0);
        assert!(ds_features(&batch(&[[1.0, 2.0]]), &[1.0]).is_err());
    }

    #[test]
    fn first_fold_and_repeat_fold() {
        let mut store = PrototypeStore::new(0, 2);
        let ep = embedded(&[[1.0, 0.5]], &[[2.0, 4.0], [0.25, 3.0]], 0);
        store.fold_embedded(&ep).unwrap();
        assert_eq!(store.domain_prototype(), ep.prototype().as_slice());
        assert_eq!(store.task_count(), 1);
        let before = store.domain_prototype().to_vec();
        store.fold_embedded(&ep).unwrap();
        assert_eq!(store.domain_prototype(), before.as_slice());
        assert_eq!(store.task_count(), 2);
        assert_eq!(store.example_count(), 6);
    }

    #[test]
    fn fold_rejects_mixed_and_foreign() {
        let mut store = PrototypeStore::new(0, 2);
        let mut ep = embedded(&[[1.0, 0.5]], &[], 1);
        assert!(store.fold_embedded(&ep).is_err());
        ep.domains = [0].into();
        ep.kind = EpisodeKind::Mixed;
        assert!(store.fold_embedded(&ep).is_err());
    }

    #[test]
    fn hand_evaluated_domain_distance() {
        let store = PrototypeStore::from_parts(
            0,
            vec![vec![0.0, 2.0], vec![0.0, 4.0]],
            vec![2.0, 0.0],
            10,
            2,
            None,
            0,
        )
        .unwrap();
        let d = store
            .dist_embedded(&batch(&[[0.0, 0.0], [0.0, 0.0]]))
            .unwrap();
        assert_eq!(d, 2.5);
    }

    #[test]
    fn single_prototype_equal_to_domain() {
        let store =
            PrototypeStore::from_parts(0, vec![vec![1.0, 1.0]], vec![1.0, 1.0], 4, 1, None, 0)
                .unwrap();
        let s = batch(&[[0.0, 0.0], [4.0, 4.0]]);
        assert_eq!(
            store.dist_embedded(&s).unwrap(),
            ds_features(&s, &[1.0, 1.0]).unwrap()
        );
    }

    #[test]
    fn empty_store_is_a_precondition_error() {
        let store = PrototypeStore::<f64>::new(0, 2);
        assert!(matches!(
            store.dist_embedded(&batch(&[[0.0, 0.0]])),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            domain_weights_embedded(&batch(&[[0.0, 0.0]]), &[store]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn weight_arithmetic() {
        let w = weights_from_distances(&[2.0f64, 2.0, 2.0]).unwrap();
        assert!(w.alphas.iter().all(|a| (a - 1.0 / 3.0).abs() < 1e-15));
        let w = weights_from_distances(&[1.0f64, 2.0]).unwrap();
        assert!((w.alphas[0] - 2.0 / 3.0).abs() < 1e-15 && (w.alphas[1] - 1.0 / 3.0).abs() < 1e-15);
        let w = weights_from_distances(&[0.5f64, 1.0, 2.0]).unwrap();
        for (a, e) in w.alphas.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_distances_share_the_mass() {
        let w = weights_from_distances(&[0.0, 3.0, 0.0]).unwrap();
        assert_eq!(w.alphas, vec![0.5, 0.0, 0.5]);
        assert!(weights_from_distances(&[1.0, -1.0]).is_err());
        assert!(weights_from_distances::<f64>(&[]).is_err());
    }

    #[test]
    fn capped_store_keeps_at_most_cap() {
        let mut store = PrototypeStore::new(0, 2).with_cap(Some(3), 17);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let p = [rng.random::<f64>(), rng.random::<f64>()];
            store.fold_embedded(&embedded(&[p], &[p], 0)).unwrap();
        }
        assert_eq!(store.task_count(), 3);
        assert_eq!(store.tasks_folded(), 20);
        assert_eq!(store.example_count(), 40);
    }

    #[test]
    fn fold_through_public_api() {
        let g = make_domain(DomainSpec::new(3, GeneratorKind::Spirals, 1)).unwrap();
        let m = Arc::new(ShapeManifest::mlp(8, &[6, 6], 5, Activation::Relu, 1).unwrap());
        let phi = ParamVector::glorot(m, 0..1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = TaskShape::new(5, 1, 2);
        let ep: Episode<f64> = sample_pure_task(&g, shape, &mut rng).unwrap();
        let mut store = PrototypeStore::new(3, 6);
        store.fold_task(&ep, &phi).unwrap();
        assert_eq!(
            store.domain_prototype(),
            task_prototype(&ep, &phi).unwrap().as_slice()
        );
        assert!(dist_to_domain(&ep, &store, &phi).unwrap() >= 0.0);
        let mixed: Episode<f64> =
            sample_mixed_task(std::slice::from_ref(&g), shape, &mut rng).unwrap();
        assert!(store.fold_task(&mixed, &phi).is_err());
    }
}
