//! Training loops for the plant-side network and the recurrence.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{
    self, EmissionsState, Gradient, NnParams, RNN_CONTROL_DIM, RNN_INPUT_DIM, RNN_STATE_DIM,
};

use super::{
    apply_lr_decay, batch_gradient, fit_mean_std, fit_range, fit_scale_only, mse_loss, optim,
    Dataset, Episode, HyperParams, Provenance, Split, TrajectoryDataset,
};

/// Per-epoch training statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LossCurves {
    pub epochs: Vec<EpochStats>,
}

impl LossCurves {
    pub fn final_val_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_loss)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: NnParams,
    pub curves: LossCurves,
    /// True when training hit a non-finite loss and returned the last finite
    /// checkpoint instead of the final iterate.
    pub aborted: bool,
}

/// Trains the 10-in/2-out emissions network on the train split with shuffled
/// disjoint batches (short remainder batch kept). Reproducible per
/// (seed, hyperparameters, data).
pub fn train_fnn(data: &Dataset, hp: &HyperParams, seed: u64) -> Result<TrainedModel> {
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = nn::seeded_fnn(&mut rng);
    let train = data.subset(Split::Train);
    let val = data.subset(Split::Validation);
    if train.is_empty() {
        return Err(Error::domain("dataset has no train split"));
    }
    let input_norm = fit_mean_std(
        train.records.iter().map(|r| r.input.clone()),
        params.input_dim(),
    );
    let output_norm = fit_scale_only(
        train.records.iter().map(|r| r.target.clone()),
        params.output_dim(),
    );
    params.set_norms(input_norm, output_norm)?;
    train_static(params, &train, &val, hp, &mut rng)
}

/// Shuffles `order` in place and yields the epoch's batches: disjoint,
/// covering every index, all full-size except a kept short remainder.
pub(crate) fn shuffled_batches<'a>(
    order: &'a mut [usize],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> impl Iterator<Item = &'a [usize]> {
    order.shuffle(rng);
    order.chunks(batch_size)
}

/// Core static-data loop shared by [`train_fnn`] and the grid search.
pub(super) fn train_static(
    mut params: NnParams,
    train: &Dataset,
    val: &Dataset,
    hp: &HyperParams,
    rng: &mut ChaCha8Rng,
) -> Result<TrainedModel> {
    let mut velocity = Gradient::zeros_like(&params);
    let mut curves = LossCurves::default();
    let mut checkpoint = params.clone();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..hp.epochs {
        let lr = apply_lr_decay(hp, epoch);
        for batch in shuffled_batches(&mut order, hp.batch_size, rng) {
            let grad = batch_gradient(&params, train, batch)?;
            if !grad.is_finite() {
                return Ok(TrainedModel {
                    params: checkpoint,
                    curves,
                    aborted: true,
                });
            }
            optim::sgd_momentum_step(&mut params, &mut velocity, &grad, lr, hp.momentum)?;
        }
        let train_loss = mse_loss(&params, train)?;
        let val_loss = if val.is_empty() {
            train_loss
        } else {
            mse_loss(&params, val)?
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Ok(TrainedModel {
                params: checkpoint,
                curves,
                aborted: true,
            });
        }
        checkpoint = params.clone();
        curves.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            learning_rate: lr,
        });
    }
    Ok(TrainedModel {
        params,
        curves,
        aborted: false,
    })
}

#[derive(Debug, Clone)]
pub struct TrainedRnn {
    pub params: NnParams,
    pub curves: LossCurves,
    pub aborted: bool,
    /// Episodes too short for one horizon window.
    pub skipped_episodes: usize,
}

/// Windows are (episode, start) pairs fully inside one split segment.
fn collect_windows(
    data: &TrajectoryDataset,
    horizon: usize,
    split: Split,
) -> (Vec<(usize, usize)>, usize) {
    let mut windows = Vec::new();
    let mut skipped = 0usize;
    for (ei, ep) in data.episodes.iter().enumerate() {
        let range = ep.segment_range(split);
        if range.len() < horizon + 1 {
            if split == Split::Train && !range.is_empty() {
                skipped += 1;
            }
            continue;
        }
        for start in range.start..=(range.end - horizon - 1) {
            windows.push((ei, start));
        }
    }
    (windows, skipped)
}

/// Normalized window loss `(1/N) sum_j ||xhat_j - x_j||^2` plus its parameter
/// gradient, back-propagated through the rolled chain.
fn window_loss_and_grad(
    params: &NnParams,
    ep: &Episode,
    start: usize,
    horizon: usize,
    grad_out: Option<&mut Gradient>,
    weight: f64,
) -> Result<f64> {
    let state_norm = |x: &EmissionsState| {
        [
            params.input_norm()[0].normalize(x.nox),
            params.input_norm()[1].normalize(x.soot),
        ]
    };
    // forward: keep every step's trace for the reverse sweep
    let mut traces = Vec::with_capacity(horizon);
    let mut xn = state_norm(&ep.steps[start].state);
    let mut residuals = Vec::with_capacity(horizon);
    for j in 0..horizon {
        let u = ep.steps[start + j].input.to_array();
        let mut s = [0.0; RNN_INPUT_DIM];
        s[..RNN_STATE_DIM].copy_from_slice(&xn);
        for c in 0..RNN_CONTROL_DIM {
            s[RNN_STATE_DIM + c] = params.input_norm()[RNN_STATE_DIM + c].normalize(u[c]);
        }
        let trace = params.forward_trace(&s)?;
        let out = trace.last().unwrap();
        let target = state_norm(&ep.steps[start + j + 1].state);
        residuals.push([out[0] - target[0], out[1] - target[1]]);
        xn = [out[0], out[1]];
        traces.push(trace);
    }
    let inv_n = 1.0 / horizon as f64;
    let loss: f64 = residuals
        .iter()
        .map(|r| r[0] * r[0] + r[1] * r[1])
        .sum::<f64>()
        * inv_n;
    let Some(grad_out) = grad_out else {
        return Ok(loss);
    };
    // reverse sweep: adjoint of the predicted state at each step
    let mut adjoint = [0.0; RNN_STATE_DIM];
    for j in (0..horizon).rev() {
        let mut seed = [0.0; RNN_STATE_DIM];
        for c in 0..RNN_STATE_DIM {
            seed[c] = adjoint[c] + 2.0 * residuals[j][c] * inv_n * weight;
        }
        let g = params.backprop_with_trace(&traces[j], &seed);
        grad_out.add_scaled(&g, 1.0);
        adjoint = [g.d_input[0], g.d_input[1]];
    }
    Ok(loss)
}

/// Mean windowed horizon loss over one split of the trajectory data.
pub fn horizon_mse(
    params: &NnParams,
    data: &TrajectoryDataset,
    horizon: usize,
    split: Split,
) -> Result<f64> {
    let (windows, _) = collect_windows(data, horizon, split);
    if windows.is_empty() {
        return Err(Error::domain("no window fits the horizon"));
    }
    let mut acc = 0.0;
    for &(ei, start) in &windows {
        acc += window_loss_and_grad(params, &data.episodes[ei], start, horizon, None, 1.0)?;
    }
    Ok(acc / windows.len() as f64)
}

/// Gradient of [`horizon_mse`] w.r.t. all parameters.
pub fn horizon_gradient(
    params: &NnParams,
    data: &TrajectoryDataset,
    horizon: usize,
    split: Split,
) -> Result<Gradient> {
    let (windows, _) = collect_windows(data, horizon, split);
    if windows.is_empty() {
        return Err(Error::domain("no window fits the horizon"));
    }
    let mut grad = Gradient::zeros_like(params);
    let inv = 1.0 / windows.len() as f64;
    for &(ei, start) in &windows {
        window_loss_and_grad(params, &data.episodes[ei], start, horizon, Some(&mut grad), inv)?;
    }
    Ok(grad)
}

/// Trains the recurrence on multi-step rollouts from measured states under
/// recorded inputs, accumulating MSE across the whole horizon.
pub fn train_rnn_horizon(
    data: &TrajectoryDataset,
    horizon: usize,
    hp: &HyperParams,
    seed: u64,
) -> Result<TrainedRnn> {
    hp.validate()?;
    if horizon == 0 {
        return Err(Error::domain("horizon must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = nn::seeded_rnn(&mut rng);

    // state channels share one range-based record between input and output;
    // control channels are mean/std normalized
    let train_states = data.episodes.iter().flat_map(|ep| {
        ep.segment(Split::Train)
            .iter()
            .map(|s| vec![s.state.nox, s.state.soot])
    });
    let state_norm = fit_range(train_states, RNN_STATE_DIM, 0.8);
    let control_norm = fit_mean_std(
        data.episodes.iter().flat_map(|ep| {
            ep.segment(Split::Train)
                .iter()
                .map(|s| s.input.to_array().to_vec())
        }),
        RNN_CONTROL_DIM,
    );
    let mut input_norm = state_norm.clone();
    input_norm.extend(control_norm);
    params.set_norms(input_norm, state_norm)?;

    let (mut train_windows, skipped) = collect_windows(data, horizon, Split::Train);
    if train_windows.is_empty() {
        return Err(Error::domain("no training window fits the horizon"));
    }
    let (val_windows, _) = collect_windows(data, horizon, Split::Validation);

    let eval = |params: &NnParams, windows: &[(usize, usize)]| -> Result<f64> {
        if windows.is_empty() {
            return Ok(f64::NAN);
        }
        let mut acc = 0.0;
        for &(ei, start) in windows {
            acc += window_loss_and_grad(params, &data.episodes[ei], start, horizon, None, 1.0)?;
        }
        Ok(acc / windows.len() as f64)
    };

    let mut velocity = Gradient::zeros_like(&params);
    let mut curves = LossCurves::default();
    let mut checkpoint = params.clone();
    for epoch in 0..hp.epochs {
        let lr = apply_lr_decay(hp, epoch);
        train_windows.shuffle(&mut rng);
        for batch in train_windows.chunks(hp.batch_size) {
            let mut grad = Gradient::zeros_like(&params);
            let inv_b = 1.0 / batch.len() as f64;
            for &(ei, start) in batch {
                window_loss_and_grad(
                    &params,
                    &data.episodes[ei],
                    start,
                    horizon,
                    Some(&mut grad),
                    inv_b,
                )?;
            }
            if !grad.is_finite() {
                return Ok(TrainedRnn {
                    params: checkpoint,
                    curves,
                    aborted: true,
                    skipped_episodes: skipped,
                });
            }
            optim::sgd_momentum_step(&mut params, &mut velocity, &grad, lr, hp.momentum)?;
        }
        let train_loss = eval(&params, &train_windows)?;
        let val_loss = if val_windows.is_empty() {
            train_loss
        } else {
            eval(&params, &val_windows)?
        };
        if !train_loss.is_finite() {
            return Ok(TrainedRnn {
                params: checkpoint,
                curves,
                aborted: true,
                skipped_episodes: skipped,
            });
        }
        checkpoint = params.clone();
        curves.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            learning_rate: lr,
        });
    }
    Ok(TrainedRnn {
        params,
        curves,
        aborted: false,
        skipped_episodes: skipped,
    })
}

/// Per-provenance absolute errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProvenanceErrors {
    pub provenance: Provenance,
    pub count: usize,
    pub nox_mae: f64,
    pub soot_mae: f64,
}

/// Test-split error report in physical units.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub nox_mae: f64,
    pub soot_mae: f64,
    /// Normalized-scale MSE, same quantity the training loop minimizes.
    pub mse: f64,
    pub count: usize,
    pub per_provenance: Vec<ProvenanceErrors>,
}

/// Evaluates per-channel MAE (physical units) and normalized MSE on the test
/// split, broken down by record provenance.
pub fn evaluate_model(params: &NnParams, data: &Dataset) -> Result<EvalReport> {
    let test = data.subset(Split::Test);
    if test.is_empty() {
        return Err(Error::domain("dataset has no test split"));
    }
    let mse = mse_loss(params, &test)?;
    let mut groups: Vec<(Provenance, usize, f64, f64)> = Vec::new();
    let mut nox_abs = 0.0;
    let mut soot_abs = 0.0;
    for r in &test.records {
        let xn: Vec<f64> = r
            .input
            .iter()
            .zip(params.input_norm())
            .map(|(v, n)| n.normalize(*v))
            .collect();
        let out = params.forward_raw(&xn)?;
        let pred_nox = params.output_norm()[0].denormalize(out[0]);
        let pred_soot = params.output_norm()[1].denormalize(out[1]);
        let e_nox = (pred_nox - r.target[0]).abs();
        let e_soot = (pred_soot - r.target[1]).abs();
        nox_abs += e_nox;
        soot_abs += e_soot;
        match groups.iter_mut().find(|g| g.0 == r.provenance) {
            Some(g) => {
                g.1 += 1;
                g.2 += e_nox;
                g.3 += e_soot;
            }
            None => groups.push((r.provenance, 1, e_nox, e_soot)),
        }
    }
    let n = test.len() as f64;
    Ok(EvalReport {
        nox_mae: nox_abs / n,
        soot_mae: soot_abs / n,
        mse,
        count: test.len(),
        per_provenance: groups
            .into_iter()
            .map(|(p, c, nx, st)| ProvenanceErrors {
                provenance: p,
                count: c,
                nox_mae: nx / c as f64,
                soot_mae: st / c as f64,
            })
            .collect(),
    })
}
