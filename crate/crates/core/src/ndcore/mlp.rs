use std::ops::Range;

use super::manifest::Activation;
use super::params::{Gradient, ParamVector};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Row-major batch of inputs with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch<T> {
    inputs: Vec<T>,
    dim: usize,
    labels: Vec<usize>,
}

impl<T: Scalar> LabeledBatch<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            inputs: Vec::new(),
            dim,
            labels: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            inputs: Vec::with_capacity(dim * rows),
            dim,
            labels: Vec::with_capacity(rows),
        }
    }

    pub fn from_pairs<'a, I>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [T], usize)>,
    {
        let mut batch = Self::new(dim);
        for (x, y) in pairs {
            batch.push(x, y)?;
        }
        Ok(batch)
    }

    pub fn push(&mut self, x: &[T], label: usize) -> Result<()> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "input of length {} in a batch of width {}",
                x.len(),
                self.dim
            )));
        }
        self.inputs.extend_from_slice(x);
        self.labels.push(label);
        Ok(())
    }

    /// Appends every row of `other`.
    pub fn extend(&mut self, other: &LabeledBatch<T>) -> Result<()> {
        if other.dim != self.dim {
            return Err(invalid("batch widths differ"));
        }
        self.inputs.extend_from_slice(&other.inputs);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.inputs.chunks_exact(self.dim.max(1))
    }

    pub fn inputs(&self) -> &[T] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Everything `backward` needs from a forward pass over a batch.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    layers: Range<usize>,
    rows: usize,
    /// Input activations of each evaluated layer.
    inputs: Vec<Vec<T>>,
    /// Pre-activation outputs of each evaluated layer.
    pre: Vec<Vec<T>>,
    output: Vec<T>,
    out_dim: usize,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        &self.output
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn output_row(&self, r: usize) -> &[T] {
        &self.output[r * self.out_dim..(r + 1) * self.out_dim]
    }

    pub fn into_output(self) -> Vec<T> {
        self.output
    }
}

fn activate<T: Scalar>(act: Activation, z: T) -> T {
    match act {
        Activation::Relu => z.max(T::zero()),
        Activation::Tanh => z.tanh(),
        Activation::Identity => z,
    }
}

fn activation_slope<T: Scalar>(act: Activation, z: T) -> T {
    match act {
        Activation::Relu => {
            if z > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        Activation::Tanh => {
            let t = z.tanh();
            T::one() - t * t
        }
        Activation::Identity => T::one(),
    }
}

/// Evaluates `layers` (a sub-range of the vector's layers) on `rows` stacked inputs.
pub(crate) fn run_layers<T: Scalar>(
    params: &ParamVector<T>,
    layers: Range<usize>,
    input: &[T],
    rows: usize,
) -> Result<ForwardCache<T>> {
    let covered = params.layers();
    if layers.start < covered.start || layers.end > covered.end || layers.is_empty() {
        return Err(invalid(format!(
            "layers {layers:?} not covered by {covered:?}"
        )));
    }
    let manifest = params.manifest().clone();
    let in_dim = manifest.layer_dims()[layers.start].0;
    if input.len() != rows * in_dim {
        return Err(invalid(format!(
            "expected {rows} inputs of length {in_dim}, got {} values",
            input.len()
        )));
    }
    let act = manifest.activation();
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut current = input.to_vec();
    for l in layers.clone() {
        let layer = params.layer(l);
        let mut z = Vec::with_capacity(rows * layer.fan_out);
        for r in 0..rows {
            z.extend_from_slice(layer.bias);
            let zr = &mut z[r * layer.fan_out..];
            let xr = &current[r * layer.fan_in..(r + 1) * layer.fan_in];
            for (i, &xi) in xr.iter().enumerate() {
                if xi.is_zero() {
                    continue;
                }
                let w = &layer.weights[i * layer.fan_out..(i + 1) * layer.fan_out];
                for (zj, &wj) in zr.iter_mut().zip(w) {
                    *zj += xi * wj;
                }
            }
        }
        let a = if manifest.is_hidden(l) {
            z.iter().map(|&v| activate(act, v)).collect()
        } else {
            z.clone()
        };
        inputs.push(std::mem::replace(&mut current, a));
        pre.push(z);
    }
    let out_dim = manifest.layer_dims()[layers.end - 1].1;
    Ok(ForwardCache {
        layers,
        rows,
        inputs,
        pre,
        output: current,
        out_dim,
    })
}

/// Evaluates every layer of `params` on one input.
pub fn forward<T: Scalar>(params: &ParamVector<T>, x: &[T]) -> Result<(Vec<T>, ForwardCache<T>)> {
    let cache = run_layers(params, params.layers(), x, 1)?;
    Ok((cache.output.clone(), cache))
}

/// Evaluates every layer of `params` on a batch.
pub fn forward_batch<T: Scalar>(
    params: &ParamVector<T>,
    batch: &LabeledBatch<T>,
) -> Result<ForwardCache<T>> {
    run_layers(params, params.layers(), batch.inputs(), batch.len())
}

/// Output of the frozen extractor (layers `0..split_index`) for one input.
pub fn features<T: Scalar>(phi: &ParamVector<T>, x: &[T]) -> Result<Vec<T>> {
    let split = phi.manifest().split_index();
    if phi.layers().start != 0 || phi.layers().end < split || split == 0 {
        return Err(invalid(format!(
            "extractor layers 0..{split} not covered by {:?}",
            phi.layers()
        )));
    }
    Ok(run_layers(phi, 0..split, x, 1)?.output)
}

/// Extractor output for every row of a batch, as a batch with the same labels.
pub fn features_batch<T: Scalar>(
    phi: &ParamVector<T>,
    batch: &LabeledBatch<T>,
) -> Result<LabeledBatch<T>> {
    let split = phi.manifest().split_index();
    if phi.layers().start != 0 || phi.layers().end < split || split == 0 {
        return Err(invalid(format!(
            "extractor layers 0..{split} not covered by {:?}",
            phi.layers()
        )));
    }
    let cache = run_layers(phi, 0..split, batch.inputs(), batch.len())?;
    Ok(LabeledBatch {
        dim: cache.out_dim,
        inputs: cache.output,
        labels: batch.labels.clone(),
    })
}

/// Dot product with four independent accumulators so the loop vectorizes.
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let split = n - n % 4;
    for (ca, cb) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        for j in 0..4 {
            acc[j] += ca[j] * cb[j];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in a[split..].iter().zip(&b[split..]) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Squared Euclidean distance, accumulated like [`dot`].
pub(crate) fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let split = n - n % 4;
    for (ca, cb) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        for j in 0..4 {
            let d = ca[j] - cb[j];
            acc[j] += d * d;
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in a[split..].iter().zip(&b[split..]) {
        tail += (x - y) * (x - y);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn log_sum_exp<T: Scalar>(logits: &[T]) -> T {
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    max + logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<T> {
    if label >= logits.len() {
        return Err(invalid(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    Ok((log_sum_exp(logits) - logits[label]).max(T::zero()))
}

/// Mean cross-entropy over a batch.
pub fn mean_loss<T: Scalar>(params: &ParamVector<T>, batch: &LabeledBatch<T>) -> Result<T> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let cache = forward_batch(params, batch)?;
    let mut total = T::zero();
    for (r, &y) in batch.labels().iter().enumerate() {
        total += cross_entropy(cache.output_row(r), y)?;
    }
    Ok(total / T::of_usize(batch.len()))
}

/// Mean cross-entropy over the batch and its exact gradient. Layers with a
/// global index below `trainable_from` receive exactly zero gradient.
pub fn backward<T: Scalar>(
    params: &ParamVector<T>,
    batch: &LabeledBatch<T>,
    trainable_from: usize,
) -> Result<(T, Gradient<T>)> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let cache = forward_batch(params, batch)?;
    let rows = batch.len();
    let classes = cache.out_dim;
    let scale = T::one() / T::of_usize(rows);

    let mut loss = T::zero();
    let mut delta = vec![T::zero(); rows * classes];
    for (r, &y) in batch.labels().iter().enumerate() {
        let logits = cache.output_row(r);
        loss += cross_entropy(logits, y)?;
        let lse = log_sum_exp(logits);
        let d = &mut delta[r * classes..(r + 1) * classes];
        for (dj, &z) in d.iter_mut().zip(logits) {
            *dj = (z - lse).exp() * scale;
        }
        d[y] -= scale;
    }
    loss *= scale;

    let mut grad = Gradient::zeros(params.len());
    let manifest = params.manifest().clone();
    let act = manifest.activation();
    let layers = cache.layers.clone();
    let lowest = layers.start.max(trainable_from);
    for (idx, l) in layers.clone().enumerate().rev() {
        if l < lowest {
            break;
        }
        let layer = params.layer(l);
        if manifest.is_hidden(l) {
            for (d, &z) in delta.iter_mut().zip(&cache.pre[idx]) {
                *d *= activation_slope(act, z);
            }
        }
        let off = params.layer_offset(l);
        let (gw, rest) = grad.as_mut_slice()[off..].split_at_mut(layer.fan_in * layer.fan_out);
        let gb = &mut rest[..layer.fan_out];
        let input = &cache.inputs[idx];
        for r in 0..rows {
            let dr = &delta[r * layer.fan_out..(r + 1) * layer.fan_out];
            for (b, &d) in gb.iter_mut().zip(dr) {
                *b += d;
            }
            let xr = &input[r * layer.fan_in..(r + 1) * layer.fan_in];
            for (i, &xi) in xr.iter().enumerate() {
                if xi.is_zero() {
                    continue;
                }
                let g = &mut gw[i * layer.fan_out..(i + 1) * layer.fan_out];
                for (gj, &dj) in g.iter_mut().zip(dr) {
                    *gj += xi * dj;
                }
            }
        }
        if l > lowest {
            let mut prev = vec![T::zero(); rows * layer.fan_in];
            for r in 0..rows {
                let dr = &delta[r * layer.fan_out..(r + 1) * layer.fan_out];
                for (i, p) in prev[r * layer.fan_in..(r + 1) * layer.fan_in]
                    .iter_mut()
                    .enumerate()
                {
                    *p = dot(
                        &layer.weights[i * layer.fan_out..(i + 1) * layer.fan_out],
                        dr,
                    );
                }
            }
            delta = prev;
        }
    }
    Ok((loss, grad))
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
