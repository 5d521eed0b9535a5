//! Helpers shared by the property and acceptance suites.
#![allow(dead_code)]

use std::sync::Arc;

use cosml::ndcore::{Activation, LabeledBatch, ParamVector, ShapeManifest};
use rand::Rng;

/// Random MLP with at most 3 layers and 50 parameters, plus a batch of at most 20 rows.
pub fn random_net<R: Rng>(rng: &mut R) -> (ParamVector<f64>, LabeledBatch<f64>) {
    loop {
        let n_layers = rng.random_range(1..=3);
        let mut dims = vec![rng.random_range(1..=5)];
        for _ in 0..n_layers {
            dims.push(rng.random_range(2..=5));
        }
        let count: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if count > 50 {
            continue;
        }
        let act =
            [Activation::Relu, Activation::Tanh, Activation::Identity][rng.random_range(0..3)];
        let layer_dims: Vec<(usize, usize)> = dims.windows(2).map(|w| (w[0], w[1])).collect();
        let split = if n_layers == 1 { 0 } else { 1 };
        let manifest = Arc::new(ShapeManifest::new(layer_dims, act, split).unwrap());
        let values = (0..count).map(|_| rng.random_range(-1.5..1.5)).collect();
        let params = ParamVector::from_values(manifest, 0..n_layers, values).unwrap();
        let rows = rng.random_range(1..=20);
        let classes = *dims.last().unwrap();
        let mut batch = LabeledBatch::with_capacity(dims[0], rows);
        for _ in 0..rows {
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
            batch.push(&x, rng.random_range(0..classes)).unwrap();
        }
        return (params, batch);
    }
}

/// Smallest |pre-activation| of any hidden unit over the batch, by a direct loop.
/// Finite differences are meaningless for ReLU within `h` of a kink.
pub fn closest_kink(params: &ParamVector<f64>, batch: &LabeledBatch<f64>) -> f64 {
    let m = params.manifest();
    if m.activation() != Activation::Relu {
        return f64::INFINITY;
    }
    let mut closest = f64::INFINITY;
    for row in batch.rows() {
        let mut a = row.to_vec();
        for l in params.layers() {
            let (fan_in, fan_out) = m.layer_dims()[l];
            let off = params.layer_offset(l);
            let v = params.as_slice();
            let mut z: Vec<f64> = (0..fan_out)
                .map(|j| v[off + fan_in * fan_out + j])
                .collect();
            for (j, zj) in z.iter_mut().enumerate() {
                for (i, ai) in a.iter().enumerate() {
                    *zj += ai * v[off + i * fan_out + j];
                }
            }
            if l + 1 < m.num_layers() {
                closest = z.iter().fold(closest, |c, v| c.min(v.abs()));
                a = z.into_iter().map(|v| v.max(0.0)).collect();
            } else {
                a = z;
            }
        }
    }
    closest
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Task-to-domain distance evaluated straight from its definition.
pub fn naive_dist(support: &[Vec<f64>], domain: &[f64], tasks: &[Vec<f64>]) -> f64 {
    let ds = |z: &[f64]| support.iter().map(|f| euclid(f, z)).sum::<f64>() / support.len() as f64;
    0.5 * (ds(domain) + tasks.iter().map(|z| ds(z)).sum::<f64>() / tasks.len() as f64)
}
