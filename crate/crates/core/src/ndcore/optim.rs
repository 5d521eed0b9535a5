use serde::{Deserialize, Serialize};

use super::params::{Gradient, ParamVector};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// `params - step_size * grad`, as a new vector.
pub fn sgd_step<T: Scalar>(
    params: &ParamVector<T>,
    grad: &Gradient<T>,
    step_size: T,
) -> Result<ParamVector<T>> {
    check_aligned(params, grad)?;
    let values = params
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .map(|(&p, &g)| p - step_size * g)
        .collect();
    params.with_values(values)
}

fn check_aligned<T: Scalar>(params: &ParamVector<T>, grad: &Gradient<T>) -> Result<()> {
    if params.len() != grad.len() {
        return Err(invalid(format!(
            "{} parameters but {} gradient entries",
            params.len(),
            grad.len()
        )));
    }
    Ok(())
}

/// Hyper-parameters of Adam; defaults match the common library defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one tracked parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize, cfg: AdamConfig) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
            lr: T::lit(cfg.lr),
            beta1: T::lit(cfg.beta1),
            beta2: T::lit(cfg.beta2),
            eps: T::lit(cfg.eps),
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update. Advances `state.t` and returns the new parameters.
pub fn adam_step<T: Scalar>(
    state: &mut AdamState<T>,
    params: &ParamVector<T>,
    grad: &Gradient<T>,
) -> Result<ParamVector<T>> {
    check_aligned(params, grad)?;
    if state.len() != params.len() || state.v.len() != params.len() {
        return Err(invalid(format!(
            "optimizer tracks {} values, parameters have {}",
            state.len(),
            params.len()
        )));
    }
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let one = T::one();
    let bias1 = one - state.beta1.powi(t);
    let bias2 = one - state.beta2.powi(t);
    let mut out = Vec::with_capacity(params.len());
    for (((&p, &g), m), v) in params
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = state.beta1 * *m + (one - state.beta1) * g;
        *v = state.beta2 * *v + (one - state.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        out.push(p - state.lr * m_hat / (v_hat.sqrt() + state.eps));
    }
    params.with_values(out)
}
