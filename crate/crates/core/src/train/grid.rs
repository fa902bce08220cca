//! 2-D (momentum, learning-rate) grid search on validation loss.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn;

use super::{fit_mean_std, fit_scale_only, loops, mse_loss, Dataset, HyperParams};

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub momentum: f64,
    pub learning_rate: f64,
    /// Validation MSE after training; +inf for diverged cells.
    pub validation_loss: f64,
}

#[derive(Debug, Clone)]
pub struct GridSearchReport {
    pub cells: Vec<GridCell>,
    /// (momentum, learning_rate) of the minimizing cell; ties broken toward
    /// smaller learning rate, then smaller momentum.
    pub best: (f64, f64),
    pub heatmap_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct GridSearchConfig {
    /// Batch size and decay schedule for every cell; its learning rate and
    /// momentum fields are ignored.
    pub base: HyperParams,
    /// Paper procedure trains each cell for a single epoch.
    pub epochs_per_cell: usize,
    /// Every cell starts from the same seeded initialization.
    pub init_seed: u64,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        GridSearchConfig {
            base: HyperParams {
                learning_rate: 1e-4,
                momentum: 0.9,
                decay_factor: 0.5,
                decay_period: 100,
                epochs: 1,
                batch_size: 40,
            },
            epochs_per_cell: 1,
            init_seed: 17,
        }
    }
}

/// Trains one freshly initialized network per (momentum, learning-rate) cell
/// and records its validation loss. Cells run in parallel; results land in
/// input order regardless of completion order. Diverged cells record +inf and
/// are never selected.
pub fn grid_search(
    grid: &[(f64, f64)],
    train: &Dataset,
    val: &Dataset,
    cfg: &GridSearchConfig,
) -> Result<GridSearchReport> {
    if grid.is_empty() {
        return Err(Error::domain("empty hyperparameter grid"));
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::domain("grid search needs train and validation data"));
    }
    let input_norm = fit_mean_std(train.records.iter().map(|r| r.input.clone()), 10);
    let output_norm = fit_scale_only(train.records.iter().map(|r| r.target.clone()), 2);

    let cells: Vec<GridCell> = grid
        .par_iter()
        .map(|&(momentum, learning_rate)| {
            let loss = run_cell(momentum, learning_rate, train, val, cfg, &input_norm, &output_norm)
                .unwrap_or(f64::INFINITY);
            GridCell {
                momentum,
                learning_rate,
                validation_loss: if loss.is_finite() { loss } else { f64::INFINITY },
            }
        })
        .collect();

    let mut best = &cells[0];
    for c in &cells[1..] {
        let better = c.validation_loss < best.validation_loss
            || (c.validation_loss == best.validation_loss
                && (c.learning_rate < best.learning_rate
                    || (c.learning_rate == best.learning_rate && c.momentum < best.momentum)));
        if better {
            best = c;
        }
    }
    let best = (best.momentum, best.learning_rate);
    Ok(GridSearchReport {
        cells,
        best,
        heatmap_path: None,
    })
}

fn run_cell(
    momentum: f64,
    learning_rate: f64,
    train: &Dataset,
    val: &Dataset,
    cfg: &GridSearchConfig,
    input_norm: &[nn::ChannelNorm],
    output_norm: &[nn::ChannelNorm],
) -> Result<f64> {
    let hp = HyperParams {
        learning_rate,
        momentum,
        epochs: cfg.epochs_per_cell,
        ..cfg.base
    };
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
    let mut params = nn::seeded_fnn(&mut rng);
    params.set_norms(input_norm.to_vec(), output_norm.to_vec())?;
    let trained = loops::train_static(params, train, val, &hp, &mut rng)?;
    if trained.aborted {
        return Ok(f64::INFINITY);
    }
    mse_loss(&trained.params, val)
}
