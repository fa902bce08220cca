//! CSV serialization of datasets, trajectories, loss curves, and heatmaps.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{EmissionsState, RnnInput, FNN_CHANNEL_NAMES};

use super::{
    Dataset, Episode, GridSearchReport, LossCurves, Provenance, Record, Split, TrajectoryDataset,
    TrajectoryStep,
};

const TARGET_NAMES: [&str; 2] = ["nox_ppm", "soot_pct"];

/// Writes a static dataset: one record per row, channel headers with units,
/// provenance and split columns.
pub fn dataset_to_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = FNN_CHANNEL_NAMES.to_vec();
    header.extend(TARGET_NAMES);
    header.push("provenance");
    header.push("split");
    w.write_record(&header).map_err(csv_err)?;
    for r in &data.records {
        let mut row: Vec<String> = r.input.iter().map(|v| v.to_string()).collect();
        row.extend(r.target.iter().map(|v| v.to_string()));
        row.push(r.provenance.tag().to_string());
        row.push(r.split.map(|s| s.tag()).unwrap_or("").to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn dataset_from_csv(path: &Path) -> Result<Dataset> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers().map_err(csv_err)?.clone();
    let n_cols = header.len();
    if n_cols < FNN_CHANNEL_NAMES.len() + TARGET_NAMES.len() + 1 {
        return Err(Error::parse(format!("dataset CSV has only {n_cols} columns")));
    }
    let n_in = FNN_CHANNEL_NAMES.len();
    let mut records = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let parse = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(format!("bad numeric field in column {i}")))
        };
        let input: Vec<f64> = (0..n_in).map(parse).collect::<Result<_>>()?;
        let target: Vec<f64> = (n_in..n_in + 2).map(parse).collect::<Result<_>>()?;
        let provenance = Provenance::from_tag(row.get(n_in + 2).unwrap_or(""))?;
        let split = match row.get(n_in + 3) {
            Some("") | None => None,
            Some(tag) => Some(Split::from_tag(tag)?),
        };
        records.push(Record {
            input,
            target,
            provenance,
            split,
        });
    }
    Ok(Dataset { records })
}

/// Writes trajectory episodes: `(episode, t_s, inputs..., states...)` rows.
pub fn trajectory_to_csv(data: &TrajectoryDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "episode",
        "t_s",
        "p_im_kpa",
        "chi_egr",
        "engine_speed_rpm",
        "w_inj_mg",
        "nox_ppm",
        "soot_pct",
    ])
    .map_err(csv_err)?;
    for (ei, ep) in data.episodes.iter().enumerate() {
        for (k, s) in ep.steps.iter().enumerate() {
            w.write_record([
                ei.to_string(),
                (k as f64 * ep.period).to_string(),
                s.input.p_im.to_string(),
                s.input.chi_egr.to_string(),
                s.input.n_e.to_string(),
                s.input.w_inj.to_string(),
                s.state.nox.to_string(),
                s.state.soot.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn trajectory_from_csv(path: &Path) -> Result<TrajectoryDataset> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut episodes: Vec<Episode> = Vec::new();
    let mut current: Option<(usize, Vec<TrajectoryStep>, Vec<f64>)> = None;
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(format!("bad numeric field in column {i}")))
        };
        let ei = num(0)? as usize;
        let t = num(1)?;
        let step = TrajectoryStep {
            input: RnnInput {
                p_im: num(2)?,
                chi_egr: num(3)?,
                n_e: num(4)?,
                w_inj: num(5)?,
            },
            state: EmissionsState::new(num(6)?, num(7)?),
        };
        match &mut current {
            Some((idx, steps, times)) if *idx == ei => {
                steps.push(step);
                times.push(t);
            }
            _ => {
                if let Some(ep) = current.take() {
                    episodes.push(finish_episode(ep)?);
                }
                current = Some((ei, vec![step], vec![t]));
            }
        }
    }
    if let Some(ep) = current.take() {
        episodes.push(finish_episode(ep)?);
    }
    Ok(TrajectoryDataset { episodes })
}

fn finish_episode((idx, steps, times): (usize, Vec<TrajectoryStep>, Vec<f64>)) -> Result<Episode> {
    if steps.len() < 2 {
        return Ok(Episode::new(1.0, steps));
    }
    let period = times[1] - times[0];
    if period <= 0.0 {
        return Err(Error::parse(format!("episode {idx} has non-increasing time")));
    }
    for pair in times.windows(2) {
        if ((pair[1] - pair[0]) - period).abs() > 1e-6 * period.max(1.0) {
            return Err(Error::parse(format!("episode {idx} is not uniformly sampled")));
        }
    }
    Ok(Episode::new(period, steps))
}

/// Writes `(epoch, train_loss, val_loss, lr)` rows.
pub fn write_loss_curves_csv(curves: &LossCurves, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "val_loss", "lr"])
        .map_err(csv_err)?;
    for e in &curves.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            e.val_loss.to_string(),
            e.learning_rate.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `(momentum, learning_rate, validation_loss)` triples.
pub fn write_heatmap_csv(report: &mut GridSearchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["momentum", "learning_rate", "validation_loss"])
        .map_err(csv_err)?;
    for c in &report.cells {
        w.write_record([
            c.momentum.to_string(),
            c.learning_rate.to_string(),
            c.validation_loss.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    report.heatmap_path = Some(path.to_path_buf());
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::parse(e.to_string())
}
