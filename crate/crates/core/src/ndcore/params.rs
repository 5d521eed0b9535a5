use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::manifest::ShapeManifest;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Flat parameter storage for a contiguous range of layers of a manifest.
///
/// Each layer is laid out as a row-major `fan_in x fan_out` weight block
/// followed by `fan_out` biases, so `y = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    values: Vec<T>,
    manifest: Arc<ShapeManifest>,
    layers: Range<usize>,
}

/// A borrowed view of one layer's weights and biases.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a, T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: &'a [T],
    pub bias: &'a [T],
}

impl<T: Scalar> ParamVector<T> {
    pub fn from_values(
        manifest: Arc<ShapeManifest>,
        layers: Range<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if layers.start >= layers.end || layers.end > manifest.num_layers() {
            return Err(invalid(format!(
                "layer range {layers:?} outside a {}-layer manifest",
                manifest.num_layers()
            )));
        }
        let expected = manifest.param_count(layers.clone());
        if values.len() != expected {
            return Err(invalid(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameter values must be finite"));
        }
        Ok(Self {
            values,
            manifest,
            layers,
        })
    }

    pub fn zeros(manifest: Arc<ShapeManifest>, layers: Range<usize>) -> Result<Self> {
        let n = manifest.param_count(layers.clone());
        Self::from_values(manifest, layers, vec![T::zero(); n])
    }

    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        manifest: Arc<ShapeManifest>,
        layers: Range<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(manifest.param_count(layers.clone()));
        for l in layers.clone() {
            let (fan_in, fan_out) = manifest.layer_dims()[l];
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("positive limit");
            values.extend((0..fan_in * fan_out).map(|_| T::lit(dist.sample(rng))));
            values.extend(std::iter::repeat_n(T::zero(), fan_out));
        }
        Self::from_values(manifest, layers, values)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn manifest(&self) -> &Arc<ShapeManifest> {
        &self.manifest
    }

    pub fn layers(&self) -> Range<usize> {
        self.layers.clone()
    }

    /// Offset of a (global) layer's block within `values`.
    pub fn layer_offset(&self, layer: usize) -> usize {
        debug_assert!(self.layers.contains(&layer));
        self.manifest.param_count(self.layers.start..layer)
    }

    pub fn layer(&self, layer: usize) -> LayerView<'_, T> {
        let (fan_in, fan_out) = self.manifest.layer_dims()[layer];
        let off = self.layer_offset(layer);
        let (weights, rest) = self.values[off..].split_at(fan_in * fan_out);
        LayerView {
            fan_in,
            fan_out,
            weights,
            bias: &rest[..fan_out],
        }
    }

    /// Copy of a sub-range of layers, e.g. the extractor part of a full network.
    pub fn slice_layers(&self, layers: Range<usize>) -> Result<Self> {
        if layers.start < self.layers.start || layers.end > self.layers.end {
            return Err(invalid(format!(
                "layers {layers:?} not covered by {:?}",
                self.layers
            )));
        }
        let start = self.layer_offset(layers.start);
        let len = self.manifest.param_count(layers.clone());
        Self::from_values(
            self.manifest.clone(),
            layers,
            self.values[start..start + len].to_vec(),
        )
    }

    /// Same manifest and layers, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::from_values(self.manifest.clone(), self.layers.clone(), values)
    }

    /// Whether two vectors can be combined index by index.
    pub fn is_aligned_with(&self, other: &Self) -> bool {
        self.layers == other.layers
            && self.values.len() == other.values.len()
            && (Arc::ptr_eq(&self.manifest, &other.manifest)
                || self
                    .manifest
                    .layers_match(&other.manifest, self.layers.clone()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Derivative of a scalar loss, index-aligned with a [`ParamVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    values: Vec<T>,
}

impl<T: Scalar> Gradient<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![T::zero(); len],
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradient<T>, scale: T) -> Result<()> {
        if other.len() != self.len() {
            return Err(invalid(format!(
                "gradient lengths {} and {} differ",
                self.len(),
                other.len()
            )));
        }
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scaled(&self, scale: T) -> Gradient<T> {
        Gradient::new(self.values.iter().map(|&g| g * scale).collect())
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Weighted sum of aligned parameter vectors: `out[i] = Σ_k w_k p_k[i]`.
pub fn blend<T: Scalar>(params_list: &[ParamVector<T>], weights: &[T]) -> Result<ParamVector<T>> {
    let first = params_list
        .first()
        .ok_or_else(|| invalid("blend of an empty list"))?;
    if weights.len() != params_list.len() {
        return Err(invalid(format!(
            "{} weights for {} parameter vectors",
            weights.len(),
            params_list.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(invalid("blend weights must be finite"));
    }
    if let Some(k) = params_list.iter().position(|p| !p.is_aligned_with(first)) {
        return Err(invalid(format!(
            "parameter vector {k} has a different manifest"
        )));
    }
    let mut out = vec![T::zero(); first.len()];
    for (p, &w) in params_list.iter().zip(weights) {
        // Exact zeros contribute nothing; skipping them keeps one-hot blends bit-exact.
        if w.is_zero() {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(p.as_slice()) {
            *o += w * v;
        }
    }
    first.with_values(out)
}
