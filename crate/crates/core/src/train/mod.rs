//! Batch SGD with momentum, learning-rate decay, grid search, and dataset
//! construction for both emissions networks.
//!
//! Static (input, target) records train the plant-side network one record at
//! a time; trajectory episodes train the recurrence on multi-step rollouts
//! whose horizon matches the controller configuration.

mod csvio;
mod grid;
mod loops;
mod optim;

pub use csvio::{
    dataset_from_csv, dataset_to_csv, trajectory_from_csv, trajectory_to_csv, write_heatmap_csv,
    write_loss_curves_csv,
};
pub use grid::{grid_search, GridCell, GridSearchConfig, GridSearchReport};
pub use loops::{
    evaluate_model, train_fnn, train_rnn_horizon, EpochStats, EvalReport, LossCurves,
    ProvenanceErrors, TrainedModel, TrainedRnn,
};
pub use optim::{apply_lr_decay, batch_gradient, mse_loss, sgd_momentum_step};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{ChannelNorm, EmissionsState, RnnInput};

/// SGD hyperparameters and schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    /// Learning rate (lambda).
    pub learning_rate: f64,
    /// Momentum (rho), in [0, 1).
    pub momentum: f64,
    /// Multiplicative LR decay factor (gamma), in (0, 1].
    pub decay_factor: f64,
    /// Epochs between decay applications.
    pub decay_period: usize,
    pub epochs: usize,
    pub batch_size: usize,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be finite and > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must be in [0, 1)"));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::config("decay factor must be in (0, 1]"));
        }
        if self.decay_period == 0 {
            return Err(Error::config("decay period must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        Ok(())
    }
}

/// Where a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SteadyState,
    Transient,
    Synthetic,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::SteadyState => "steady_state",
            Provenance::Transient => "transient",
            Provenance::Synthetic => "synthetic",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "steady_state" => Ok(Provenance::SteadyState),
            "transient" => Ok(Provenance::Transient),
            "synthetic" => Ok(Provenance::Synthetic),
            other => Err(Error::parse(format!("unknown provenance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::parse(format!("unknown split `{other}`"))),
        }
    }
}

/// One (input, target) pair in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub provenance: Provenance,
    pub split: Option<Split>,
}

/// Static dataset of (input, target) records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.input.len())
    }

    pub fn target_dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.target.len())
    }

    /// Indices of records carrying the given split assignment.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == Some(split))
            .map(|(i, _)| i)
            .collect()
    }

    /// New dataset holding clones of the records in the given split.
    pub fn subset(&self, split: Split) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .filter(|r| r.split == Some(split))
                .cloned()
                .collect(),
        }
    }

    fn check_schema(&self, input_dim: usize, target_dim: usize) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.input.len() != input_dim || r.target.len() != target_dim {
                return Err(Error::structural(format!(
                    "record {i} has shape {}x{}, expected {input_dim}x{target_dim}",
                    r.input.len(),
                    r.target.len()
                )));
            }
        }
        Ok(())
    }
}

/// Union of transient records and steady-state records below the Soot cutoff.
///
/// Target channel 1 is Soot (%); steady-state records above `soot_cutoff` are
/// dropped, transient records are kept unconditionally. Provenance tags are
/// preserved.
pub fn merge_emissions_datasets(
    steady: &Dataset,
    transient: &Dataset,
    soot_cutoff: f64,
) -> Result<Dataset> {
    let (input_dim, target_dim) = match (transient.input_dim(), transient.target_dim()) {
        (Some(i), Some(t)) => (i, t),
        _ => match (steady.input_dim(), steady.target_dim()) {
            (Some(i), Some(t)) => (i, t),
            _ => return Err(Error::structural("both datasets are empty")),
        },
    };
    steady.check_schema(input_dim, target_dim)?;
    transient.check_schema(input_dim, target_dim)?;
    if target_dim < 2 {
        return Err(Error::structural("targets must carry a Soot channel"));
    }
    let mut records = transient.records.clone();
    records.extend(
        steady
            .records
            .iter()
            .filter(|r| r.target[1] <= soot_cutoff)
            .cloned(),
    );
    Ok(Dataset { records })
}

/// Assigns train/validation/test splits by a seeded shuffle.
///
/// Counts are `floor(n * fraction)` for validation and test with the
/// remainder going to train, so small datasets never lose their train split.
pub fn split_dataset(data: &mut Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<()> {
    let (ft, fv, fs) = fractions;
    if (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::domain("split fractions must sum to 1"));
    }
    if ft < 0.0 || fv < 0.0 || fs < 0.0 {
        return Err(Error::domain("split fractions must be non-negative"));
    }
    let n = data.records.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_val = (n as f64 * fv).floor() as usize;
    let n_test = (n as f64 * fs).floor() as usize;
    for (pos, idx) in order.into_iter().enumerate() {
        data.records[idx].split = Some(if pos < n_val {
            Split::Validation
        } else if pos < n_val + n_test {
            Split::Test
        } else {
            Split::Train
        });
    }
    Ok(())
}

/// One logged step of an identification episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub input: RnnInput,
    pub state: EmissionsState,
}

/// One contiguous simulation episode sampled at a fixed period.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Sample period (s).
    pub period: f64,
    pub steps: Vec<TrajectoryStep>,
    /// End (exclusive) of the train segment.
    pub train_end: usize,
    /// End (exclusive) of the validation segment; test runs to the end.
    pub val_end: usize,
}

impl Episode {
    pub fn new(period: f64, steps: Vec<TrajectoryStep>) -> Self {
        let n = steps.len();
        Episode {
            period,
            steps,
            train_end: n,
            val_end: n,
        }
    }

    pub fn segment_range(&self, split: Split) -> std::ops::Range<usize> {
        match split {
            Split::Train => 0..self.train_end,
            Split::Validation => self.train_end..self.val_end,
            Split::Test => self.val_end..self.steps.len(),
        }
    }

    pub fn segment(&self, split: Split) -> &[TrajectoryStep] {
        &self.steps[self.segment_range(split)]
    }
}

/// Time-indexed episodes for training the recurrence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryDataset {
    pub episodes: Vec<Episode>,
}

impl TrajectoryDataset {
    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(|e| e.steps.len()).sum()
    }
}

/// Assigns contiguous-in-time splits within every episode: train first, then
/// validation, test last.
pub fn split_trajectory(data: &mut TrajectoryDataset, fractions: (f64, f64, f64)) -> Result<()> {
    let (ft, fv, fs) = fractions;
    if (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::domain("split fractions must sum to 1"));
    }
    if ft < 0.0 || fv < 0.0 || fs < 0.0 {
        return Err(Error::domain("split fractions must be non-negative"));
    }
    for ep in &mut data.episodes {
        let n = ep.steps.len();
        let n_val = (n as f64 * fv).floor() as usize;
        let n_test = (n as f64 * fs).floor() as usize;
        ep.train_end = n - n_val - n_test;
        ep.val_end = n - n_test;
    }
    Ok(())
}

/// Mean/std normalization per input channel (std floored away from zero).
pub fn fit_mean_std(inputs: impl Iterator<Item = Vec<f64>> + Clone, dim: usize) -> Vec<ChannelNorm> {
    let mut mean = vec![0.0; dim];
    let mut count = 0usize;
    for row in inputs.clone() {
        for (m, v) in mean.iter_mut().zip(&row) {
            *m += v;
        }
        count += 1;
    }
    if count == 0 {
        return vec![ChannelNorm::identity(); dim];
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut var = vec![0.0; dim];
    for row in inputs {
        for ((s, v), m) in var.iter_mut().zip(&row).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    mean.iter()
        .zip(&var)
        .map(|(m, s)| ChannelNorm {
            offset: *m,
            scale: (s / count as f64).sqrt().max(1e-9),
        })
        .collect()
}

/// Zero-offset RMS scaling, for non-negative targets behind a ReLU output.
pub fn fit_scale_only(targets: impl Iterator<Item = Vec<f64>>, dim: usize) -> Vec<ChannelNorm> {
    let mut sq = vec![0.0; dim];
    let mut count = 0usize;
    for row in targets {
        for (s, v) in sq.iter_mut().zip(&row) {
            *s += v * v;
        }
        count += 1;
    }
    if count == 0 {
        return vec![ChannelNorm::identity(); dim];
    }
    sq.iter()
        .map(|s| ChannelNorm {
            offset: 0.0,
            scale: (s / count as f64).sqrt().max(1e-9),
        })
        .collect()
}

/// Range-based normalization mapping observed values into [-margin, margin],
/// as needed for channels produced by a Tanh output layer.
pub fn fit_range(values: impl Iterator<Item = Vec<f64>>, dim: usize, margin: f64) -> Vec<ChannelNorm> {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for row in values {
        for ((l, h), v) in lo.iter_mut().zip(hi.iter_mut()).zip(&row) {
            *l = l.min(*v);
            *h = h.max(*v);
        }
    }
    lo.iter()
        .zip(&hi)
        .map(|(l, h)| {
            if !l.is_finite() || !h.is_finite() {
                return ChannelNorm::identity();
            }
            let mid = 0.5 * (l + h);
            let half = (0.5 * (h - l)).max(1e-9);
            ChannelNorm {
                offset: mid,
                scale: half / margin,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
