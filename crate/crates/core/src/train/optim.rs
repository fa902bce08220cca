//! SGD with momentum, LR decay schedule, and MSE loss/gradient evaluation.

use crate::error::{Error, Result};
use crate::nn::{Gradient, NnParams};

use super::{Dataset, HyperParams};

/// Mean squared error over the dataset on the normalized scale:
/// `(1/|D|) sum ||f(norm(x)) - norm(y)||^2`.
pub fn mse_loss(params: &NnParams, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::domain("loss over empty dataset"));
    }
    let mut acc = 0.0;
    for r in &data.records {
        acc += record_sq_error(params, &r.input, &r.target)?;
    }
    Ok(acc / data.len() as f64)
}

fn record_sq_error(params: &NnParams, input: &[f64], target: &[f64]) -> Result<f64> {
    let (xn, tn) = normalize_pair(params, input, target)?;
    let out = params.forward_raw(&xn)?;
    Ok(out
        .iter()
        .zip(&tn)
        .map(|(o, t)| {
            let d = o - t;
            d * d
        })
        .sum())
}

fn normalize_pair(params: &NnParams, input: &[f64], target: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if input.len() != params.input_dim() || target.len() != params.output_dim() {
        return Err(Error::structural(format!(
            "record shape {}x{} does not match network {}x{}",
            input.len(),
            target.len(),
            params.input_dim(),
            params.output_dim()
        )));
    }
    let xn = input
        .iter()
        .zip(params.input_norm())
        .map(|(v, n)| n.normalize(*v))
        .collect();
    let tn = target
        .iter()
        .zip(params.output_norm())
        .map(|(v, n)| n.normalize(*v))
        .collect();
    Ok((xn, tn))
}

/// Gradient of the batch MSE `(1/B) sum ||f(x) - y||^2` w.r.t. all parameters.
pub fn batch_gradient(params: &NnParams, data: &Dataset, indices: &[usize]) -> Result<Gradient> {
    if indices.is_empty() {
        return Err(Error::domain("gradient over empty batch"));
    }
    let mut total = Gradient::zeros_like(params);
    let inv = 1.0 / indices.len() as f64;
    for &i in indices {
        let r = &data.records[i];
        let (xn, tn) = normalize_pair(params, &r.input, &r.target)?;
        let trace = params.forward_trace(&xn)?;
        let out = trace.last().unwrap();
        let seed: Vec<f64> = out
            .iter()
            .zip(&tn)
            .map(|(o, t)| 2.0 * (o - t) * inv)
            .collect();
        let g = params.backprop_with_trace(&trace, &seed);
        total.add_scaled(&g, 1.0);
    }
    Ok(total)
}

/// One SGD-with-momentum update:
/// `velocity = grad + momentum * velocity; theta -= lr * velocity`.
///
/// A zero-initialized velocity reproduces the plain-gradient first step.
pub fn sgd_momentum_step(
    params: &mut NnParams,
    velocity: &mut Gradient,
    grad: &Gradient,
    learning_rate: f64,
    momentum: f64,
) -> Result<()> {
    if !grad.is_finite() {
        return Err(Error::numeric("sgd step", "non-finite gradient"));
    }
    velocity.decay_and_add(momentum, grad);
    params.apply_step(velocity, learning_rate);
    Ok(())
}

/// Effective learning rate at `epoch`: `lr * decay^floor(epoch / period)`.
pub fn apply_lr_decay(hp: &HyperParams, epoch: usize) -> f64 {
    hp.learning_rate * hp.decay_factor.powi((epoch / hp.decay_period) as i32)
}
