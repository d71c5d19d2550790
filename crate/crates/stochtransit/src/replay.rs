//! Stream replay of one edge's samples through the online model.
//!
//! The time-ordered samples are split into a stream (the first
//! `1 - test_fraction`) and a held-out test tail. Every `report_every`
//! updates a row is emitted with
//!
//! * `online_rmse`, `online_nll`: prequential errors over the window, each
//!   point predicted before it is absorbed;
//! * `batch_rmse`, `batch_nll`: an exact GP with the current online
//!   hyperparameters, trained on the first `batch_fraction` of everything
//!   seen so far and scored on the rest of it;
//! * `regret`: mean over the window of the online prequential NLL minus the
//!   NLL of that batch model at the same points;
//! * `test_rmse`, `test_nll`: the current online model on the test tail;
//! * `gp_loss`: negative log marginal likelihood per sample;
//! * `noise`: current noise variance;
//! * `step_time_s`: mean wall time per update over the window.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use stochtransit_core::gp::batch::{self, EdgeModel, FitStatus, GpFitConfig};
use stochtransit_core::gp::online::SkiState;
use stochtransit_core::gp::KernelParams;
use stochtransit_core::Gaussian;

use crate::config::{OnlineConfig, ReplayConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub step: u64,
    pub step_time_s: f64,
    pub gp_loss: f64,
    pub online_rmse: f64,
    pub online_nll: f64,
    pub batch_rmse: f64,
    pub batch_nll: f64,
    pub regret: f64,
    pub test_rmse: f64,
    pub test_nll: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub samples: usize,
    pub stream: usize,
    pub test: usize,
    pub warm_start: usize,
    pub initial_params: KernelParams,
    pub final_params: KernelParams,
    pub total_s: f64,
    pub median_update_s: f64,
    pub final_test_rmse: f64,
    pub final_test_nll: f64,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub rows: Vec<ReplayRow>,
    pub summary: ReplaySummary,
    pub state: SkiState,
    /// Wall time of every update, in stream order.
    pub update_times_s: Vec<f64>,
}

pub fn gaussian_nll(law: Gaussian, y: f64) -> f64 {
    let v = law.var.max(f64::MIN_POSITIVE);
    let r = y - law.mean;
    0.5 * (2.0 * std::f64::consts::PI * v).ln() + 0.5 * r * r / v
}

fn scores(law: impl Fn(f64) -> Gaussian, x: &[f64], y: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let (mut se, mut nll) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let g = law(xi);
        se += (yi - g.mean).powi(2);
        nll += gaussian_nll(g, yi);
    }
    let n = x.len() as f64;
    ((se / n).sqrt(), nll / n)
}

/// Evenly spaced subset of at most `cap` indices below `n`.
fn spread(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        (0..cap).map(|i| i * n / cap).collect()
    }
}

fn hindsight(p: &KernelParams, x: &[f64], y: &[f64], cfg: &ReplayConfig) -> Option<(EdgeModel, usize)> {
    let split = ((x.len() as f64) * cfg.batch_fraction).floor() as usize;
    if split < 2 || split >= x.len() {
        return None;
    }
    let idx = spread(split, cfg.batch_max_train);
    let xs = idx.iter().map(|&i| x[i]).collect();
    let ys = idx.iter().map(|&i| y[i]).collect();
    EdgeModel::new(*p, xs, ys, FitStatus::Converged).ok().map(|m| (m, split))
}

/// Replays `(x hours, y seconds)` in the given order. Hyperparameters start
/// from a batch fit on the first `online.warm_start` stream samples.
pub fn replay(x: &[f64], y: &[f64], gp: &GpFitConfig, online: &OnlineConfig, cfg: &ReplayConfig) -> Result<ReplayOutcome> {
    if x.len() != y.len() {
        return Err(Error::input("replay inputs and targets differ in length"));
    }
    let n = x.len();
    let test = ((n as f64) * cfg.test_fraction).ceil() as usize;
    let stream = n.saturating_sub(test);
    let warm = online.warm_start.max(gp.min_samples).min(stream);
    if warm < gp.min_samples.max(2) {
        return Err(stochtransit_core::Error::InsufficientData(format!(
            "{n} samples leave {stream} to stream, fewer than the {} needed to start",
            gp.min_samples.max(2)
        ))
        .into());
    }
    let (sx, sy) = (&x[..stream], &y[..stream]);
    let (tx, ty) = (&x[stream..], &y[stream..]);
    let initial = *batch::fit(&sx[..warm], &sy[..warm], gp)?.model.params();
    let mut state = SkiState::new(initial, online.ski())?;

    let started = Instant::now();
    let mut rows = Vec::new();
    let mut times = Vec::with_capacity(stream);
    let mut window_pred: Vec<Gaussian> = Vec::with_capacity(cfg.report_every);
    let mut window_start = 0;
    for i in 0..stream {
        window_pred.push(state.predict(sx[i]));
        let t = Instant::now();
        state.update(sx[i], sy[i])?;
        times.push(t.elapsed().as_secs_f64());

        let at_end = i + 1 == stream;
        if (i + 1) % cfg.report_every == 0 || at_end {
            let wx = &sx[window_start..=i];
            let wy = &sy[window_start..=i];
            let (mut se, mut nll_on) = (0.0, Vec::with_capacity(wx.len()));
            for (g, &yi) in window_pred.iter().zip(wy) {
                se += (yi - g.mean).powi(2);
                nll_on.push(gaussian_nll(*g, yi));
            }
            let k = wx.len() as f64;
            let p = *state.params();
            let (batch_rmse, batch_nll, regret) = match hindsight(&p, &sx[..=i], &sy[..=i], cfg) {
                Some((m, split)) => {
                    let (r, l) = scores(|t| m.posterior(t), &sx[split..=i], &sy[split..=i]);
                    let reg = wx.iter().zip(wy).zip(&nll_on).map(|((&a, &b), on)| on - gaussian_nll(m.posterior(a), b)).sum::<f64>() / k;
                    (r, l, reg)
                }
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            let (test_rmse, test_nll) = scores(|t| state.predict(t), tx, ty);
            rows.push(ReplayRow {
                step: (i + 1) as u64,
                step_time_s: times[window_start..=i].iter().sum::<f64>() / k,
                gp_loss: -state.mll() / (i + 1) as f64,
                online_rmse: (se / k).sqrt(),
                online_nll: nll_on.iter().sum::<f64>() / k,
                batch_rmse,
                batch_nll,
                regret,
                test_rmse,
                test_nll,
                noise: p.noise_var,
            });
            window_pred.clear();
            window_start = i + 1;
        }
    }
    let total_s = started.elapsed().as_secs_f64();
    let last = rows.last().copied();
    Ok(ReplayOutcome {
        summary: ReplaySummary {
            samples: n,
            stream,
            test,
            warm_start: warm,
            initial_params: initial,
            final_params: *state.params(),
            total_s,
            median_update_s: stochtransit_core::math::median(&times),
            final_test_rmse: last.map_or(f64::NAN, |r| r.test_rmse),
            final_test_nll: last.map_or(f64::NAN, |r| r.test_nll),
        },
        rows,
        state,
        update_times_s: times,
    })
}
