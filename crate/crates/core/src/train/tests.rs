use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::{
    self, Activation, ChannelNorm, EmissionsState, Gradient, Layer, NnParams, RnnInput,
};

use super::loops::shuffled_batches;
use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn record(input: Vec<f64>, target: Vec<f64>) -> Record {
    Record {
        input,
        target,
        provenance: Provenance::Synthetic,
        split: Some(Split::Train),
    }
}

/// 10-channel records with targets from a fixed linear map.
fn synthetic_dataset(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let records = (0..n)
        .map(|_| {
            let input: Vec<f64> = (0..10).map(|_| r.gen_range(-1.0..1.0)).collect();
            let t0 = 0.4 * input[0] - 0.2 * input[3] + 0.5;
            let t1 = 0.3 * input[7].max(0.0) + 0.1;
            record(input, vec![t0, t1])
        })
        .collect();
    Dataset { records }
}

#[test]
fn mse_is_zero_for_exact_reproduction() {
    // identity-ish network reproducing a constant target
    let layer = Layer::new(2, 2, vec![0.0; 4], vec![0.7, 0.2], Activation::Identity).unwrap();
    let params = NnParams::new(vec![layer]).unwrap();
    let data = Dataset {
        records: vec![record(vec![3.0, -1.0], vec![0.7, 0.2]); 5],
    };
    assert_eq!(mse_loss(&params, &data).unwrap(), 0.0);
}

#[test]
fn mse_single_record_is_squared_error() {
    let layer = Layer::new(2, 2, vec![0.0; 4], vec![0.0, 0.0], Activation::Identity).unwrap();
    let params = NnParams::new(vec![layer]).unwrap();
    let e = 0.37;
    let data = Dataset {
        records: vec![record(vec![1.0, 1.0], vec![e, 0.0])],
    };
    assert!((mse_loss(&params, &data).unwrap() - e * e).abs() < 1e-15);
}

#[test]
fn mse_matches_by_hand_accumulation() {
    let mut r = rng(60);
    let mut params = nn::seeded_fnn(&mut r);
    let data = synthetic_dataset(40, 61);
    let input_norm = fit_mean_std(data.records.iter().map(|x| x.input.clone()), 10);
    let output_norm = fit_scale_only(data.records.iter().map(|x| x.target.clone()), 2);
    params.set_norms(input_norm, output_norm).unwrap();

    // independent summation: manual normalization, manual layer loops
    let mut acc = 0.0;
    for rec in &data.records {
        let mut x: Vec<f64> = rec
            .input
            .iter()
            .zip(params.input_norm())
            .map(|(v, n)| (v - n.offset) / n.scale)
            .collect();
        for layer in params.layers() {
            let mut y = vec![0.0; layer.out_dim()];
            for o in 0..layer.out_dim() {
                let mut z = layer.bias[o];
                for i in 0..layer.in_dim() {
                    z += layer.weights[o * layer.in_dim() + i] * x[i];
                }
                y[o] = z.max(0.0);
            }
            x = y;
        }
        for (c, t) in rec.target.iter().enumerate() {
            let tn = (t - params.output_norm()[c].offset) / params.output_norm()[c].scale;
            acc += (x[c] - tn) * (x[c] - tn);
        }
    }
    let want = acc / 40.0;
    let got = mse_loss(&params, &data).unwrap();
    assert!((got - want).abs() <= 1e-12 * want.max(1.0));
}

#[test]
fn mse_rejects_empty_dataset() {
    let mut r = rng(1);
    let params = nn::seeded_fnn(&mut r);
    assert!(matches!(
        mse_loss(&params, &Dataset::default()),
        Err(crate::Error::Domain(_))
    ));
}

#[test]
fn sgd_without_momentum_is_plain_sgd() {
    let mut r = rng(2);
    let mut params = nn::seeded_fnn(&mut r);
    let before = params.clone();
    let data = synthetic_dataset(4, 3);
    let grad = batch_gradient(&params, &data, &[0, 1, 2, 3]).unwrap();
    let mut velocity = Gradient::zeros_like(&params);
    sgd_momentum_step(&mut params, &mut velocity, &grad, 0.1, 0.0).unwrap();
    let mut expected = before;
    expected.apply_step(&grad, 0.1);
    assert_eq!(params, expected);
}

#[test]
fn constant_gradient_velocity_matches_geometric_sum() {
    let mut r = rng(4);
    let mut params = nn::seeded_rnn(&mut r);
    let mut grad = Gradient::zeros_like(&params);
    for l in &mut grad.layers {
        for v in &mut l.d_weights {
            *v = 0.3;
        }
        for v in &mut l.d_bias {
            *v = -0.7;
        }
    }
    let rho = 0.9;
    let mut velocity = Gradient::zeros_like(&params);
    for k in 1..=50 {
        sgd_momentum_step(&mut params, &mut velocity, &grad, 1e-3, rho).unwrap();
        let expected = (1.0 - rho.powi(k)) / (1.0 - rho);
        for l in &velocity.layers {
            for v in &l.d_weights {
                assert!((v - 0.3 * expected).abs() <= 1e-12);
            }
            for v in &l.d_bias {
                assert!((v + 0.7 * expected).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn zero_learning_rate_keeps_params_but_accumulates_velocity() {
    let mut r = rng(5);
    let mut params = nn::seeded_fnn(&mut r);
    let before = params.clone();
    let mut grad = Gradient::zeros_like(&params);
    for l in &mut grad.layers {
        for v in &mut l.d_weights {
            *v = 1.0;
        }
    }
    let mut velocity = Gradient::zeros_like(&params);
    sgd_momentum_step(&mut params, &mut velocity, &grad, 0.0, 0.5).unwrap();
    sgd_momentum_step(&mut params, &mut velocity, &grad, 0.0, 0.5).unwrap();
    assert_eq!(params, before);
    // velocity = g * (1 + rho) after two steps
    assert!((velocity.max_abs() - 1.5).abs() < 1e-15);
}

#[test]
fn lr_decay_schedule() {
    let hp = HyperParams {
        learning_rate: 1e-4,
        momentum: 0.9,
        decay_factor: 0.5,
        decay_period: 100,
        epochs: 1000,
        batch_size: 40,
    };
    assert_eq!(apply_lr_decay(&hp, 0), 1e-4);
    assert_eq!(apply_lr_decay(&hp, 100), 0.5e-4);
    assert_eq!(apply_lr_decay(&hp, 250), 0.25e-4);
    // non-increasing in epoch
    let mut last = f64::INFINITY;
    for e in 0..500 {
        let lr = apply_lr_decay(&hp, e);
        assert!(lr <= last);
        last = lr;
    }
}

#[test]
fn merge_respects_soot_cutoff() {
    let steady_hi = Dataset {
        records: (0..5)
            .map(|i| {
                let mut r = record(vec![i as f64; 10], vec![100.0, 30.0 + i as f64]);
                r.provenance = Provenance::SteadyState;
                r
            })
            .collect(),
    };
    let transient = Dataset {
        records: (0..7)
            .map(|i| {
                let mut r = record(vec![i as f64; 10], vec![50.0, 5.0]);
                r.provenance = Provenance::Transient;
                r
            })
            .collect(),
    };
    // all steady above cutoff: result is the transient set alone
    let merged = merge_emissions_datasets(&steady_hi, &transient, 20.0).unwrap();
    assert_eq!(merged.len(), 7);
    assert!(merged
        .records
        .iter()
        .all(|r| r.provenance == Provenance::Transient));

    // cutoff 100: plain union
    let merged = merge_emissions_datasets(&steady_hi, &transient, 100.0).unwrap();
    assert_eq!(merged.len(), 12);

    // mixed: counting oracle
    let mut steady_mixed = steady_hi.clone();
    steady_mixed.records[0].target[1] = 10.0;
    steady_mixed.records[3].target[1] = 19.9;
    let kept = steady_mixed
        .records
        .iter()
        .filter(|r| r.target[1] <= 20.0)
        .count();
    let merged = merge_emissions_datasets(&steady_mixed, &transient, 20.0).unwrap();
    assert_eq!(merged.len(), transient.len() + kept);
}

#[test]
fn merge_rejects_schema_mismatch() {
    let a = Dataset {
        records: vec![record(vec![0.0; 10], vec![1.0, 2.0])],
    };
    let b = Dataset {
        records: vec![record(vec![0.0; 9], vec![1.0, 2.0])],
    };
    assert!(matches!(
        merge_emissions_datasets(&a, &b, 20.0),
        Err(crate::Error::Structural(_))
    ));
}

#[test]
fn split_counts_and_determinism() {
    let mut data = synthetic_dataset(100, 9);
    split_dataset(&mut data, (0.7, 0.15, 0.15), 123).unwrap();
    assert_eq!(data.split_indices(Split::Train).len(), 70);
    assert_eq!(data.split_indices(Split::Validation).len(), 15);
    assert_eq!(data.split_indices(Split::Test).len(), 15);

    let mut again = synthetic_dataset(100, 9);
    split_dataset(&mut again, (0.7, 0.15, 0.15), 123).unwrap();
    assert_eq!(data, again);

    let mut bad = synthetic_dataset(10, 9);
    assert!(split_dataset(&mut bad, (0.7, 0.2, 0.2), 1).is_err());
}

#[test]
fn trajectory_split_is_contiguous_with_test_last() {
    let steps: Vec<TrajectoryStep> = (0..1000)
        .map(|i| TrajectoryStep {
            input: RnnInput {
                p_im: i as f64,
                chi_egr: 0.2,
                n_e: 1500.0,
                w_inj: 40.0,
            },
            state: EmissionsState::new(i as f64, 1.0),
        })
        .collect();
    let mut data = TrajectoryDataset {
        episodes: vec![Episode::new(0.2, steps)],
    };
    split_trajectory(&mut data, (0.7, 0.15, 0.15)).unwrap();
    let ep = &data.episodes[0];
    assert_eq!(ep.segment_range(Split::Train), 0..700);
    assert_eq!(ep.segment_range(Split::Validation), 700..850);
    // test slice is the final 15%: steps 851..1000 one-based
    assert_eq!(ep.segment_range(Split::Test), 850..1000);
    assert_eq!(ep.segment(Split::Test)[0].state.nox, 850.0);
}

#[test]
fn epoch_batches_partition_every_index() {
    let mut r = rng(10);
    for &(n, b) in &[(100usize, 40usize), (37, 8), (5, 9), (40, 40)] {
        let mut order: Vec<usize> = (0..n).collect();
        let batches: Vec<Vec<usize>> = shuffled_batches(&mut order, b, &mut r)
            .map(|s| s.to_vec())
            .collect();
        let mut seen = vec![false; n];
        for (bi, batch) in batches.iter().enumerate() {
            if bi + 1 < batches.len() {
                assert_eq!(batch.len(), b, "only the final batch may be short");
            } else {
                assert!(batch.len() <= b && !batch.is_empty());
            }
            for &i in batch {
                assert!(!seen[i], "index {i} appeared twice");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }
}

#[test]
fn train_fnn_single_step_matches_hand_update() {
    let mut data = Dataset {
        records: vec![record(vec![0.5; 10], vec![2.0, 1.0])],
    };
    data.records[0].split = Some(Split::Train);
    let hp = HyperParams {
        learning_rate: 0.01,
        momentum: 0.0,
        decay_factor: 1.0,
        decay_period: 100,
        epochs: 1,
        batch_size: 1,
    };
    let trained = train_fnn(&data, &hp, 77).unwrap();
    assert!(!trained.aborted);
    assert_eq!(trained.curves.epochs.len(), 1);

    // hand-computed: theta_1 = theta_0 - lr * grad(record)
    let mut expected = {
        let mut r = rng(77);
        nn::seeded_fnn(&mut r)
    };
    let input_norm = fit_mean_std(data.records.iter().map(|x| x.input.clone()), 10);
    let output_norm = fit_scale_only(data.records.iter().map(|x| x.target.clone()), 2);
    expected.set_norms(input_norm, output_norm).unwrap();
    let grad = batch_gradient(&expected, &data, &[0]).unwrap();
    expected.apply_step(&grad, 0.01);
    assert_eq!(trained.params, expected);
}

#[test]
fn train_fnn_is_reproducible() {
    let mut data = synthetic_dataset(60, 21);
    split_dataset(&mut data, (0.7, 0.15, 0.15), 5).unwrap();
    let hp = HyperParams {
        learning_rate: 1e-2,
        momentum: 0.9,
        decay_factor: 0.5,
        decay_period: 10,
        epochs: 5,
        batch_size: 16,
    };
    let a = train_fnn(&data, &hp, 3).unwrap();
    let b = train_fnn(&data, &hp, 3).unwrap();
    assert_eq!(a.params, b.params);
    for (x, y) in a.curves.epochs.iter().zip(&b.curves.epochs) {
        assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
    }
}

#[test]
fn grid_search_single_cell_and_divergence() {
    let mut data = synthetic_dataset(80, 30);
    split_dataset(&mut data, (0.7, 0.15, 0.15), 6).unwrap();
    let train = data.subset(Split::Train);
    let val = data.subset(Split::Validation);
    let cfg = GridSearchConfig::default();

    let report = grid_search(&[(0.5, 1e-3)], &train, &val, &cfg).unwrap();
    assert_eq!(report.cells.len(), 1);
    assert_eq!(report.best, (0.5, 1e-3));

    // a deliberately divergent cell records +inf and is never selected
    let diverging = 1e30;
    let grid = [(0.9, diverging), (0.5, 1e-3), (0.0, 1e-4)];
    let report = grid_search(&grid, &train, &val, &cfg).unwrap();
    assert!(report.cells[0].validation_loss.is_infinite());
    assert_ne!(report.best, (0.9, diverging));

    // argmin invariance against recorded losses
    let best_cell = report
        .cells
        .iter()
        .find(|c| (c.momentum, c.learning_rate) == report.best)
        .unwrap();
    assert!(report
        .cells
        .iter()
        .all(|c| c.validation_loss >= best_cell.validation_loss));
}

#[test]
fn grid_search_ties_break_toward_smaller_rates() {
    // two cells, identical loss by construction (zero epochs trains nothing)
    let mut data = synthetic_dataset(40, 31);
    split_dataset(&mut data, (0.7, 0.15, 0.15), 7).unwrap();
    let train = data.subset(Split::Train);
    let val = data.subset(Split::Validation);
    let cfg = GridSearchConfig {
        epochs_per_cell: 0,
        ..Default::default()
    };
    let report = grid_search(&[(0.9, 1e-3), (0.1, 1e-4), (0.5, 1e-4)], &train, &val, &cfg).unwrap();
    assert_eq!(report.best, (0.1, 1e-4));
}

fn linear_rnn(a: [[f64; 2]; 2], b: [[f64; 4]; 2]) -> NnParams {
    // exact linear recurrence x' = A x + B u through the 15/5 bottleneck
    let mut w1 = vec![0.0; 15 * 6];
    for r in 0..2 {
        for c in 0..2 {
            w1[r * 6 + c] = a[r][c];
        }
        for c in 0..4 {
            w1[r * 6 + 2 + c] = b[r][c];
        }
    }
    let mut w2 = vec![0.0; 5 * 15];
    w2[0] = 1.0;
    w2[15 + 1] = 1.0;
    let mut w3 = vec![0.0; 2 * 5];
    w3[0] = 1.0;
    w3[5 + 1] = 1.0;
    NnParams::new(vec![
        Layer::new(6, 15, w1, vec![0.0; 15], Activation::Identity).unwrap(),
        Layer::new(15, 5, w2, vec![0.0; 5], Activation::Identity).unwrap(),
        Layer::new(5, 2, w3, vec![0.0; 2], Activation::Identity).unwrap(),
    ])
    .unwrap()
}

fn linear_plant_trajectory(a: [[f64; 2]; 2], b: [[f64; 4]; 2], n: usize, seed: u64) -> Episode {
    let mut r = rng(seed);
    let mut x = [0.1, -0.2];
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let u = [
            r.gen_range(-0.5..0.5),
            r.gen_range(-0.5..0.5),
            r.gen_range(-0.5..0.5),
            r.gen_range(-0.5..0.5),
        ];
        steps.push(TrajectoryStep {
            input: RnnInput::from_array(u),
            state: EmissionsState::new(x[0], x[1]),
        });
        let mut next = [0.0; 2];
        for row in 0..2 {
            next[row] = a[row][0] * x[0] + a[row][1] * x[1];
            for c in 0..4 {
                next[row] += b[row][c] * u[c];
            }
        }
        x = next;
    }
    Episode::new(0.2, steps)
}

#[test]
fn zero_error_oracle_network_has_zero_horizon_loss() {
    let a = [[0.8, 0.05], [-0.1, 0.7]];
    let b = [[0.2, -0.3, 0.05, 0.1], [0.0, 0.4, -0.2, 0.3]];
    let params = linear_rnn(a, b);
    let ep = linear_plant_trajectory(a, b, 60, 91);
    let data = TrajectoryDataset { episodes: vec![ep] };
    let loss = loops::horizon_mse(&params, &data, 5, Split::Train).unwrap();
    assert!(loss < 1e-24, "oracle network should have zero loss, got {loss}");
}

#[test]
fn horizon_one_collapses_to_one_step_regression() {
    let mut r = rng(14);
    let mut params = nn::seeded_rnn(&mut r);
    params
        .set_norms(
            vec![ChannelNorm::identity(); 6],
            vec![ChannelNorm::identity(); 2],
        )
        .unwrap();
    let a = [[0.5, 0.0], [0.0, 0.5]];
    let b = [[0.1, 0.0, 0.0, 0.0], [0.0, 0.1, 0.0, 0.0]];
    let ep = linear_plant_trajectory(a, b, 30, 15);
    let data = TrajectoryDataset {
        episodes: vec![ep.clone()],
    };
    let loss = loops::horizon_mse(&params, &data, 1, Split::Train).unwrap();
    // manual teacher-forced one-step errors
    let mut acc = 0.0;
    let mut count = 0;
    for t in 0..ep.steps.len() - 1 {
        let pred = nn::rnn_step(&params, &ep.steps[t].state, &ep.steps[t].input).unwrap();
        let dx = pred.nox - ep.steps[t + 1].state.nox;
        let ds = pred.soot - ep.steps[t + 1].state.soot;
        acc += dx * dx + ds * ds;
        count += 1;
    }
    assert!((loss - acc / count as f64).abs() < 1e-12);
}

#[test]
fn horizon_gradient_matches_finite_differences() {
    let mut r = rng(44);
    let mut params = nn::seeded_rnn(&mut r);
    params
        .set_norms(
            vec![ChannelNorm::identity(); 6],
            vec![ChannelNorm::identity(); 2],
        )
        .unwrap();
    let a = [[0.6, 0.1], [0.0, 0.5]];
    let b = [[0.3, -0.1, 0.0, 0.2], [0.1, 0.2, -0.3, 0.0]];
    // 2-window toy set: exactly horizon+2 steps
    let horizon = 3;
    let ep = linear_plant_trajectory(a, b, horizon + 2, 45);
    let data = TrajectoryDataset {
        episodes: vec![ep.clone()],
    };
    let grad = loops::horizon_gradient(&params, &data, horizon, Split::Train).unwrap();

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for li in 0..3 {
        for wi in 0..params.layers()[li].weights.len() {
            let orig = params.layers()[li].weights[wi];
            let eval = |params: &mut NnParams, v: f64| {
                params.layers_mut()[li].weights[wi] = v;
                loops::horizon_mse(params, &data, horizon, Split::Train).unwrap()
            };
            let hi = eval(&mut params, orig + h);
            let lo = eval(&mut params, orig - h);
            params.layers_mut()[li].weights[wi] = orig;
            let numeric = (hi - lo) / (2.0 * h);
            let analytic = grad.layers[li].d_weights[wi];
            let diff = (analytic - numeric).abs();
            if diff > 1e-9 {
                worst = worst.max(diff / analytic.abs().max(numeric.abs()));
            }
        }
    }
    assert!(worst < 1e-5, "worst relative gradient error {worst}");
}

#[test]
fn train_rnn_reduces_loss_on_linear_plant() {
    let a = [[0.7, 0.1], [0.05, 0.6]];
    let b = [[0.2, -0.25, 0.1, 0.15], [0.05, 0.3, -0.1, 0.2]];
    let mut data = TrajectoryDataset {
        episodes: vec![
            linear_plant_trajectory(a, b, 150, 100),
            linear_plant_trajectory(a, b, 150, 101),
        ],
    };
    split_trajectory(&mut data, (0.7, 0.15, 0.15)).unwrap();
    let hp = HyperParams {
        learning_rate: 0.02,
        momentum: 0.9,
        decay_factor: 0.5,
        decay_period: 40,
        epochs: 30,
        batch_size: 32,
    };
    let trained = train_rnn_horizon(&data, 4, &hp, 7).unwrap();
    assert!(!trained.aborted);
    let first = trained.curves.epochs.first().unwrap().train_loss;
    let last = trained.curves.epochs.last().unwrap().train_loss;
    assert!(
        last < first * 0.5,
        "loss should drop substantially: {first} -> {last}"
    );
}

#[test]
fn train_rnn_skips_short_episodes() {
    let a = [[0.5, 0.0], [0.0, 0.5]];
    let b = [[0.1, 0.0, 0.0, 0.0], [0.0, 0.1, 0.0, 0.0]];
    let data = TrajectoryDataset {
        episodes: vec![
            linear_plant_trajectory(a, b, 3, 1),
            linear_plant_trajectory(a, b, 40, 2),
        ],
    };
    let hp = HyperParams {
        learning_rate: 0.01,
        momentum: 0.0,
        decay_factor: 1.0,
        decay_period: 100,
        epochs: 1,
        batch_size: 8,
    };
    let trained = train_rnn_horizon(&data, 8, &hp, 7).unwrap();
    assert_eq!(trained.skipped_episodes, 1);
}

#[test]
fn evaluate_perfect_predictor_is_zero() {
    let layer = Layer::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2], Activation::Identity)
        .unwrap();
    let params = NnParams::new(vec![layer]).unwrap();
    let mut data = Dataset {
        records: (0..10)
            .map(|i| record(vec![i as f64, 2.0 * i as f64], vec![i as f64, 2.0 * i as f64]))
            .collect(),
    };
    for r in &mut data.records {
        r.split = Some(Split::Test);
    }
    let report = evaluate_model(&params, &data).unwrap();
    assert_eq!(report.nox_mae, 0.0);
    assert_eq!(report.soot_mae, 0.0);
    assert_eq!(report.mse, 0.0);
}

#[test]
fn evaluate_constant_offset_gives_mae_c() {
    let c = 1.75;
    let layer = Layer::new(2, 2, vec![0.0; 4], vec![c, 0.0], Activation::Identity).unwrap();
    let params = NnParams::new(vec![layer]).unwrap();
    let mut data = Dataset {
        records: (0..6).map(|_| record(vec![0.0, 0.0], vec![0.0, 0.0])).collect(),
    };
    for (i, r) in data.records.iter_mut().enumerate() {
        r.split = Some(Split::Test);
        r.provenance = if i % 2 == 0 {
            Provenance::SteadyState
        } else {
            Provenance::Transient
        };
    }
    let report = evaluate_model(&params, &data).unwrap();
    assert!((report.nox_mae - c).abs() < 1e-15);
    assert_eq!(report.soot_mae, 0.0);
    assert_eq!(report.per_provenance.len(), 2);
    for g in &report.per_provenance {
        assert!((g.nox_mae - c).abs() < 1e-15);
    }
}

#[test]
fn evaluate_requires_test_split() {
    let mut r = rng(3);
    let params = nn::seeded_fnn(&mut r);
    let data = synthetic_dataset(5, 8);
    assert!(matches!(
        evaluate_model(&params, &data),
        Err(crate::Error::Domain(_))
    ));
}

#[test]
fn dataset_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let mut data = synthetic_dataset(25, 40);
    split_dataset(&mut data, (0.7, 0.15, 0.15), 2).unwrap();
    data.records[3].provenance = Provenance::SteadyState;
    dataset_to_csv(&data, &path).unwrap();
    let loaded = dataset_from_csv(&path).unwrap();
    assert_eq!(data, loaded);
}

#[test]
fn trajectory_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let a = [[0.5, 0.0], [0.0, 0.5]];
    let b = [[0.1, 0.0, 0.0, 0.0], [0.0, 0.1, 0.0, 0.0]];
    let data = TrajectoryDataset {
        episodes: vec![
            linear_plant_trajectory(a, b, 12, 3),
            linear_plant_trajectory(a, b, 9, 4),
        ],
    };
    trajectory_to_csv(&data, &path).unwrap();
    let loaded = trajectory_from_csv(&path).unwrap();
    assert_eq!(loaded.episodes.len(), 2);
    assert_eq!(loaded.episodes[0].steps, data.episodes[0].steps);
    assert!((loaded.episodes[1].period - 0.2).abs() < 1e-12);
}

#[test]
fn heatmap_and_loss_curve_export() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = GridSearchReport {
        cells: vec![
            GridCell {
                momentum: 0.9,
                learning_rate: 1e-4,
                validation_loss: 0.5,
            },
            GridCell {
                momentum: 0.5,
                learning_rate: 1e-3,
                validation_loss: f64::INFINITY,
            },
        ],
        best: (0.9, 1e-4),
        heatmap_path: None,
    };
    let path = dir.path().join("heatmap.csv");
    write_heatmap_csv(&mut report, &path).unwrap();
    assert_eq!(report.heatmap_path.as_deref(), Some(path.as_path()));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("momentum,learning_rate,validation_loss"));
    assert!(text.contains("inf"));

    let curves = LossCurves {
        epochs: vec![EpochStats {
            epoch: 0,
            train_loss: 1.0,
            val_loss: 2.0,
            learning_rate: 1e-4,
        }],
    };
    let path = dir.path().join("curves.csv");
    write_loss_curves_csv(&curves, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("epoch,train_loss,val_loss,lr"));
}
