//! Monte-Carlo sweeps over a grid of `(alpha, epsilon, n)`.
//!
//! Rows are written as CSV with header
//! `point_id,n,epsilon,alpha,trial,outcome,achieved_loss,runtime_ms`: one row
//! per trial, then one `summary` row per point (success rate in `outcome`,
//! RMSE of the excess loss in `achieved_loss`), then one `slope` row per
//! `(epsilon, alpha)` with at least two sample sizes (log-log slope of the
//! RMSE in `achieved_loss`).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Result};
use ldpgamma_core::learners::{required_sample_size, Task};
use ldpgamma_core::model::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};
use crate::experiment::{expected_refutation, population, trial_record, trial_seeds, Learner, Reference};
use crate::io;

pub const HEADER: [&str; 8] = ["point_id", "n", "epsilon", "alpha", "trial", "outcome", "achieved_loss", "runtime_ms"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub id: usize,
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
    /// The norm behind a formula sample size; `None` when `n` came from the grid.
    pub norm: Option<f64>,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub point_id: usize,
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub trial: usize,
    pub outcome: String,
    pub achieved_loss: Option<f64>,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point_id: usize,
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub success_rate: f64,
    /// Root mean square of `achieved_loss − optimal_loss` over learning trials.
    pub rmse: Option<f64>,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub epsilon: f64,
    pub alpha: f64,
    /// Least-squares slope of `ln rmse` against `ln n`.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub points: Vec<PointSummary>,
    pub slopes: Vec<SlopeSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

fn row_success(task: Task, mode: Mode, theta: f64, point: &SweepPoint, row: &TrialRow) -> bool {
    match mode {
        Mode::Learn => row.outcome == "success",
        Mode::Refute => match expected_refutation(task, point.alpha, theta, point.reference) {
            Some(v) => row.outcome == format!("{v:+}"),
            None => true,
        },
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Summary rows from the points and raw trial rows alone.
pub fn summarize(task: Task, mode: Mode, theta: f64, points: &[SweepPoint], rows: &[TrialRow]) -> Summary {
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.point_id == p.id).collect();
        let wins = mine.iter().filter(|r| row_success(task, mode, theta, p, r)).count();
        let losses: Vec<f64> = match mode {
            Mode::Learn => mine.iter().filter_map(|r| r.achieved_loss).collect(),
            Mode::Refute => Vec::new(),
        };
        let rmse = (!losses.is_empty()).then(|| {
            let opt = p.reference.optimal_loss;
            (losses.iter().map(|l| (l - opt) * (l - opt)).sum::<f64>() / losses.len() as f64).sqrt()
        });
        out.push(PointSummary {
            point_id: p.id,
            n: p.n,
            epsilon: p.epsilon,
            alpha: p.alpha,
            success_rate: if mine.is_empty() { 0.0 } else { wins as f64 / mine.len() as f64 },
            rmse,
            runtime_ms: mine.iter().map(|r| r.runtime_ms).sum(),
        });
    }
    let mut slopes = Vec::new();
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for s in &out {
        if !groups.contains(&(s.epsilon, s.alpha)) {
            groups.push((s.epsilon, s.alpha));
        }
    }
    for (epsilon, alpha) in groups {
        let pts: Vec<(f64, f64)> = out
            .iter()
            .filter(|s| s.epsilon == epsilon && s.alpha == alpha)
            .filter_map(|s| s.rmse.filter(|r| *r > 0.0).map(|r| ((s.n as f64).ln(), r.ln())))
            .collect();
        let distinct = pts.iter().any(|p| p.0 != pts[0].0);
        if pts.len() >= 2 && distinct {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            slopes.push(SlopeSummary { epsilon, alpha, slope: slope(&xs, &ys) });
        }
    }
    Summary { points: out, slopes }
}

fn grid<T: Copy>(values: &[T], scalar: T) -> Vec<T> {
    if values.is_empty() {
        vec![scalar]
    } else {
        values.to_vec()
    }
}

/// Runs every trial of every grid point.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.data.is_some() {
        bail!("sweep samples from a distribution; use --distribution or --target instead of --data");
    }
    let class = io::load_class(&cfg.class)?;
    let task: Task = cfg.task.into();
    let dist = population(cfg, &class)?;
    let reference = Reference::of(&class, &dist)?;
    let ns: Vec<Option<usize>> = if cfg.ns.is_empty() { vec![cfg.n] } else { cfg.ns.iter().copied().map(Some).collect() };

    let mut points = Vec::new();
    let mut rows = Vec::new();
    for alpha in grid(&cfg.alphas, cfg.alpha) {
        for epsilon in grid(&cfg.epsilons, cfg.epsilon) {
            let tcfg = cfg.task_config_at(alpha, epsilon)?;
            let learner = Learner::prepare(task, &class, &tcfg)?;
            for n in &ns {
                let (n, norm) = match n {
                    Some(n) => (*n, None),
                    None => {
                        let s = required_sample_size(task, &class, &tcfg)?;
                        (s.n, Some(s.norm))
                    }
                };
                let point = SweepPoint { id: points.len(), n, epsilon, alpha, norm, reference };
                let trial_rows = (0..cfg.trials)
                    .into_par_iter()
                    .map(|trial| -> Result<TrialRow> {
                        let (data_seed, protocol_seed) = trial_seeds(cfg.seed, point.id as u64, trial as u64);
                        let data = sample(&dist, n, data_seed)?;
                        let start = Instant::now();
                        let transcript = learner.transcript(&data, protocol_seed)?;
                        let decision = learner.decide(cfg.mode, &transcript)?;
                        let elapsed = start.elapsed().as_millis() as u64;
                        let (outcome, achieved_loss) = trial_record(task, alpha, &class, &dist, reference, &decision)?;
                        Ok(TrialRow {
                            point_id: point.id,
                            n,
                            epsilon,
                            alpha,
                            trial,
                            outcome,
                            achieved_loss,
                            runtime_ms: if cfg.record_runtime { elapsed } else { 0 },
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.extend(trial_rows);
                points.push(point);
            }
        }
    }
    let summary = summarize(task, cfg.mode, cfg.theta, &points, &rows);
    Ok(SweepResult { points, rows, summary })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Writes trial, summary and slope rows under the fixed header.
pub fn write_csv<W: Write>(out: W, result: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in &result.rows {
        w.write_record([
            r.point_id.to_string(),
            r.n.to_string(),
            r.epsilon.to_string(),
            r.alpha.to_string(),
            r.trial.to_string(),
            r.outcome.clone(),
            opt(r.achieved_loss),
            r.runtime_ms.to_string(),
        ])?;
    }
    for s in &result.summary.points {
        w.write_record([
            s.point_id.to_string(),
            s.n.to_string(),
            s.epsilon.to_string(),
            s.alpha.to_string(),
            "summary".into(),
            s.success_rate.to_string(),
            opt(s.rmse),
            s.runtime_ms.to_string(),
        ])?;
    }
    for s in &result.summary.slopes {
        w.write_record([
            "slope".into(),
            String::new(),
            s.epsilon.to_string(),
            s.alpha.to_string(),
            "slope".into(),
            String::new(),
            s.slope.to_string(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `<out>.meta.json`, next to the CSV.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    points: &'a [SweepPoint],
    summary: &'a Summary,
    rows: usize,
    summary_rows: usize,
    started_unix_ms: u128,
    wall_ms: u128,
}

/// Writes the sidecar; the only output that carries clock readings.
pub fn write_sidecar(path: &Path, cfg: &ExperimentConfig, result: &SweepResult, started: SystemTime, wall_ms: u128) -> Result<()> {
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        points: &result.points,
        summary: &result.summary,
        rows: result.rows.len(),
        summary_rows: result.summary.points.len() + result.summary.slopes.len(),
        started_unix_ms: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
        wall_ms,
    };
    io::write_json(Some(path), &meta)
}
