use rand::Rng;

use super::generator::DomainGenerator;
use crate::error::{invalid, Result};
use crate::ndcore::LabeledBatch;
use crate::scalar::Scalar;

/// Non-episodic training set over the full class pool of one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus<T> {
    pub examples: LabeledBatch<T>,
    pub n_classes: usize,
    pub domain_id: usize,
}

impl<T: Scalar> Corpus<T> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

pub fn pretrain_corpus<T: Scalar, R: Rng + ?Sized>(
    gen: &DomainGenerator,
    per_class: usize,
    rng: &mut R,
) -> Result<Corpus<T>> {
    if per_class < 2 {
        return Err(invalid(format!(
            "per_class must be at least 2, got {per_class}"
        )));
    }
    let mut examples = LabeledBatch::with_capacity(gen.input_dim(), per_class * gen.n_classes());
    for class in 0..gen.n_classes() {
        for _ in 0..per_class {
            examples.push(&gen.sample::<T, _>(class, rng)?, class)?;
        }
    }
    Ok(Corpus {
        examples,
        n_classes: gen.n_classes(),
        domain_id: gen.domain_id(),
    })
}
