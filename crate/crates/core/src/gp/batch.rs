//! Exact (dense) Gaussian-process regression for a single edge.
//!
//! The prior mean is the sample mean of the training targets and the
//! covariance is the squared-exponential kernel plus observation noise.
//! Hyperparameters are fitted by maximizing the marginal log-likelihood
//! with BFGS in log-space from several length-scale starts.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{KernelParams, TravelTimeModel};
use crate::error::{Error, Result};
use crate::math::{self, Gaussian};

const JITTER_STEPS: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpFitConfig {
    /// Initial length scales in hours, one optimizer run each.
    pub length_scale_starts: Vec<f64>,
    pub max_iter: usize,
    /// Relative MLL change that counts as converged over `window` iterations.
    pub rel_tol: f64,
    pub window: usize,
    /// Edges with fewer samples inherit network hyperparameters.
    pub min_samples: usize,
    /// Variance floors as a fraction of the target variance.
    pub floor_fraction: f64,
    /// Larger training sets are subsampled (seeded) to this size.
    pub max_train: usize,
    pub seed: u64,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        GpFitConfig {
            length_scale_starts: alloc::vec![0.5, 1.0, 2.0, 4.0, 8.0],
            max_iter: 200,
            rel_tol: 1e-5,
            window: 10,
            min_samples: 20,
            floor_fraction: 1e-6,
            max_train: 600,
            seed: 0,
        }
    }
}

impl GpFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length_scale_starts.is_empty() || self.length_scale_starts.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::config("length_scale_starts must be non-empty and positive"));
        }
        if self.max_iter == 0 || self.window == 0 || self.max_train < 2 {
            return Err(Error::config("max_iter, window must be positive and max_train >= 2"));
        }
        if !(self.rel_tol > 0.0) || !(self.floor_fraction > 0.0 && self.floor_fraction < 1.0) {
            return Err(Error::config("rel_tol must be positive and floor_fraction in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// Too few samples: network hyperparameters with the edge's own mean.
    Inherited,
    /// No samples at all: network hyperparameters and network mean.
    NoData,
    /// Every optimizer start failed; default hyperparameters.
    Fallback,
}

/// A fitted GP for one edge with its factorized training covariance.
#[derive(Debug, Clone)]
pub struct EdgeModel {
    params: KernelParams,
    mean: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    status: FitStatus,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

/// Serializable form of [`EdgeModel`]; the factorization is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeModelRecord {
    pub params: KernelParams,
    pub mean: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub status: FitStatus,
}

fn gram(p: &KernelParams, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| p.kernel(x[i], x[j]) + if i == j { p.noise_var } else { 0.0 })
}

/// Cholesky of `K + σn² I`, adding diagonal jitter up to `1e-6·σ²` if needed.
fn factor(p: &KernelParams, x: &[f64]) -> Result<Cholesky<f64, Dyn>> {
    let k = gram(p, x);
    for j in JITTER_STEPS {
        let mut kj = k.clone();
        if j > 0.0 {
            for i in 0..x.len() {
                kj[(i, i)] += j * p.signal_var;
            }
        }
        if let Some(c) = kj.cholesky() {
            return Ok(c);
        }
    }
    Err(Error::numerical(format!("covariance not positive definite for {p:?}")))
}

fn log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    let l = c.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

fn residuals(y: &[f64], mean: f64) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.iter().map(|v| v - mean))
}

fn check_xy(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} inputs but {} targets", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("at least one observation required".into()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training value"));
    }
    Ok(())
}

/// Marginal log-likelihood of `y` under the GP with prior mean `mean(y)`.
pub fn mll(p: &KernelParams, x: &[f64], y: &[f64]) -> Result<f64> {
    check_xy(x, y)?;
    let c = factor(p, x)?;
    let r = residuals(y, math::mean(y));
    let alpha = c.solve(&r);
    let n = x.len() as f64;
    Ok(-0.5 * r.dot(&alpha) - 0.5 * log_det(&c) - 0.5 * n * (2.0 * PI).ln())
}

/// MLL and its gradient with respect to `(ln σ², ln l, ln σn²)`.
pub fn mll_with_gradient(p: &KernelParams, x: &[f64], y: &[f64]) -> Result<(f64, [f64; 3])> {
    check_xy(x, y)?;
    let n = x.len();
    let c = factor(p, x)?;
    let r = residuals(y, math::mean(y));
    let alpha = c.solve(&r);
    let value = -0.5 * r.dot(&alpha) - 0.5 * log_det(&c) - 0.5 * n as f64 * (2.0 * PI).ln();
    let kinv = c.inverse();

    // dK/dθ for the three log parameters, contracted with (ααᵀ - K⁻¹)
    let l2 = p.length_scale * p.length_scale;
    let mut g = [0.0; 3];
    for i in 0..n {
        for j in 0..n {
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            let d = x[i] - x[j];
            let kf = p.kernel(x[i], x[j]);
            g[0] += w * kf;
            g[1] += w * kf * d * d / l2;
        }
        g[2] += (alpha[i] * alpha[i] - kinv[(i, i)]) * p.noise_var;
    }
    Ok((value, [0.5 * g[0], 0.5 * g[1], 0.5 * g[2]]))
}

impl EdgeModel {
    /// Builds a model with prior mean `mean(y)`.
    pub fn new(params: KernelParams, x: Vec<f64>, y: Vec<f64>, status: FitStatus) -> Result<Self> {
        let mean = math::mean(&y);
        Self::with_mean(params, mean, x, y, status)
    }

    pub fn with_mean(params: KernelParams, mean: f64, x: Vec<f64>, y: Vec<f64>, status: FitStatus) -> Result<Self> {
        params.validate()?;
        if x.len() != y.len() {
            return Err(Error::invalid("training inputs and targets differ in length"));
        }
        if !mean.is_finite() {
            return Err(Error::invalid("model mean must be finite"));
        }
        let (chol, alpha) = if x.is_empty() {
            (None, DVector::zeros(0))
        } else {
            let c = factor(&params, &x)?;
            let a = c.solve(&residuals(&y, mean));
            (Some(c), a)
        };
        Ok(EdgeModel { params, mean, x, y, status, chol, alpha })
    }

    pub fn from_record(rec: EdgeModelRecord) -> Result<Self> {
        Self::with_mean(rec.params, rec.mean, rec.x, rec.y, rec.status)
    }

    pub fn record(&self) -> EdgeModelRecord {
        EdgeModelRecord {
            params: self.params,
            mean: self.mean,
            x: self.x.clone(),
            y: self.y.clone(),
            status: self.status,
        }
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn status(&self) -> FitStatus {
        self.status
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    /// Predictive law at time of day `t` (hours), including observation noise.
    pub fn posterior(&self, t: f64) -> Gaussian {
        let p = &self.params;
        let Some(chol) = &self.chol else {
            return Gaussian::new(self.mean, p.prior_variance());
        };
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|&xi| p.kernel(xi, t)));
        let mean = self.mean + k.dot(&self.alpha);
        let v = chol.l_dirty().solve_lower_triangular(&k).unwrap_or_else(|| DVector::zeros(k.len()));
        let f_var = (p.signal_var - v.dot(&v)).clamp(0.0, p.signal_var);
        Gaussian::new(mean, f_var + p.noise_var)
    }
}

impl TravelTimeModel for EdgeModel {
    fn predict(&self, hour: f64) -> Gaussian {
        self.posterior(hour)
    }
}

/// Hyperparameters and mean shared with edges that are too sparse to fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkPrior {
    pub params: KernelParams,
    pub mean: f64,
}

/// Per-start optimizer summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartReport {
    pub initial_length_scale: f64,
    pub mll: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: EdgeModel,
    pub mll: f64,
    pub starts: Vec<StartReport>,
    /// Number of samples dropped by subsampling.
    pub subsampled_out: usize,
}

struct Bounds {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Bounds {
    fn clamp(&self, v: [f64; 3]) -> [f64; 3] {
        let mut o = v;
        for i in 0..3 {
            o[i] = v[i].clamp(self.lo[i], self.hi[i]);
        }
        o
    }
}

struct Run {
    theta: [f64; 3],
    value: f64,
    iterations: usize,
    converged: bool,
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Maximizes the MLL from `start` with projected BFGS in log-space.
fn maximize(x: &[f64], y: &[f64], start: [f64; 3], b: &Bounds, cfg: &GpFitConfig) -> Result<Run> {
    let objective = |th: &[f64; 3]| -> Result<(f64, [f64; 3])> {
        let (v, g) = mll_with_gradient(&KernelParams::from_log(*th), x, y)?;
        Ok((-v, [-g[0], -g[1], -g[2]]))
    };
    let value_only = |th: &[f64; 3]| -> Option<f64> {
        mll(&KernelParams::from_log(*th), x, y).ok().map(|v| -v).filter(|v| v.is_finite())
    };

    let mut theta = b.clamp(start);
    let (mut f, mut g) = objective(&theta)?;
    let mut h = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut history = alloc::vec![f];
    let mut converged = false;
    let mut it = 0;

    while it < cfg.max_iter {
        it += 1;
        // zero gradient components pinned against a bound
        let mut gp = g;
        for i in 0..3 {
            if (theta[i] <= b.lo[i] && g[i] > 0.0) || (theta[i] >= b.hi[i] && g[i] < 0.0) {
                gp[i] = 0.0;
            }
        }
        if gp.iter().all(|v| v.abs() < 1e-10) {
            converged = true;
            break;
        }
        let mut dir = [0.0; 3];
        for i in 0..3 {
            dir[i] = -(h[i][0] * gp[0] + h[i][1] * gp[1] + h[i][2] * gp[2]);
        }
        if dot3(&dir, &gp) >= 0.0 {
            h = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            dir = [-gp[0], -gp[1], -gp[2]];
        }
        // cap the step at 2 log-units per component
        let big = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if big > 2.0 {
            dir.iter_mut().for_each(|d| *d *= 2.0 / big);
        }

        let slope = dot3(&dir, &gp);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = b.clamp([theta[0] + step * dir[0], theta[1] + step * dir[1], theta[2] + step * dir[2]]);
            if let Some(fc) = value_only(&cand) {
                if fc <= f + 1e-4 * step * slope {
                    accepted = Some(cand);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            // no descent possible along the projected direction
            converged = true;
            break;
        };
        let (fn_, gn) = objective(&next)?;
        let s = [next[0] - theta[0], next[1] - theta[1], next[2] - theta[2]];
        let yv = [gn[0] - g[0], gn[1] - g[1], gn[2] - g[2]];
        let sy = dot3(&s, &yv);
        if sy > 1e-12 {
            // BFGS inverse-Hessian update
            let mut hy = [0.0; 3];
            for i in 0..3 {
                hy[i] = h[i][0] * yv[0] + h[i][1] * yv[1] + h[i][2] * yv[2];
            }
            let yhy = dot3(&yv, &hy);
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        theta = next;
        f = fn_;
        g = gn;
        history.push(f);
        if history.len() > cfg.window {
            let old = history[history.len() - 1 - cfg.window];
            if (old - f).abs() <= cfg.rel_tol * f.abs().max(1.0) {
                converged = true;
                break;
            }
        }
    }
    Ok(Run { theta, value: -f, iterations: it, converged })
}

fn subsample(x: &[f64], y: &[f64], cap: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    if x.len() <= cap {
        return (x.to_vec(), y.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, x.len(), cap).into_vec();
    idx.sort_unstable();
    (idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| y[i]).collect())
}

/// Fits kernel hyperparameters for one edge by multi-start MLL maximization.
///
/// Requires at least `cfg.min_samples` observations; sparser edges should go
/// through [`inherit`]. When every start fails numerically the model falls
/// back to default hyperparameters with [`FitStatus::Fallback`].
pub fn fit(x: &[f64], y: &[f64], cfg: &GpFitConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    check_xy(x, y)?;
    if x.len() < cfg.min_samples.max(2) {
        return Err(Error::InsufficientData(format!(
            "{} samples, at least {} needed to fit",
            x.len(),
            cfg.min_samples.max(2)
        )));
    }
    let (xs, ys) = subsample(x, y, cfg.max_train, cfg.seed);
    let subsampled_out = x.len() - xs.len();

    let var = math::population_variance(&ys);
    let scale = if var > 0.0 { var } else { 1.0 };
    let floor = cfg.floor_fraction * scale;
    let bounds = Bounds {
        lo: [floor.ln(), 0.01f64.ln(), floor.ln()],
        hi: [(1e4 * scale).ln(), 1000f64.ln(), (1e4 * scale).ln()],
    };

    let mut starts = Vec::new();
    let mut best: Option<Run> = None;
    for &l0 in &cfg.length_scale_starts {
        let start = [(0.8 * scale).ln(), l0.ln(), (0.2 * scale).ln()];
        match maximize(&xs, &ys, start, &bounds, cfg) {
            Ok(run) => {
                starts.push(StartReport {
                    initial_length_scale: l0,
                    mll: Some(run.value),
                    iterations: run.iterations,
                    converged: run.converged,
                });
                if best.as_ref().map_or(true, |b| run.value > b.value) {
                    best = Some(run);
                }
            }
            Err(_) => starts.push(StartReport { initial_length_scale: l0, mll: None, iterations: 0, converged: false }),
        }
    }

    match best {
        Some(run) => {
            let status = if run.converged { FitStatus::Converged } else { FitStatus::MaxIterations };
            let model = EdgeModel::new(KernelParams::from_log(run.theta), xs, ys, status)?;
            Ok(FitOutcome { model, mll: run.value, starts, subsampled_out })
        }
        None => {
            let params = KernelParams::new(0.5 * scale, 2.0, 0.5 * scale)?;
            let model = EdgeModel::new(params, xs, ys, FitStatus::Fallback)?;
            Ok(FitOutcome { model, mll: f64::NAN, starts, subsampled_out })
        }
    }
}

/// Model for an edge with too few samples to fit on its own.
pub fn inherit(x: &[f64], y: &[f64], prior: &NetworkPrior) -> Result<EdgeModel> {
    if x.is_empty() {
        return EdgeModel::with_mean(prior.params, prior.mean, Vec::new(), Vec::new(), FitStatus::NoData);
    }
    check_xy(x, y)?;
    EdgeModel::new(prior.params, x.to_vec(), y.to_vec(), FitStatus::Inherited)
}

/// Component-wise median of fitted hyperparameters (in log-space) and of
/// edge means.
pub fn network_prior(models: &[&EdgeModel]) -> Option<NetworkPrior> {
    if models.is_empty() {
        return None;
    }
    let comp = |f: &dyn Fn(&EdgeModel) -> f64| -> f64 {
        let v: Vec<f64> = models.iter().map(|m| f(m)).collect();
        math::median(&v)
    };
    let logs = [
        comp(&|m| m.params.signal_var.ln()),
        comp(&|m| m.params.length_scale.ln()),
        comp(&|m| m.params.noise_var.ln()),
    ];
    Some(NetworkPrior { params: KernelParams::from_log(logs), mean: comp(&|m| m.mean) })
}

/// Law of the second component of a bivariate Gaussian given the first.
///
/// A slightly indefinite covariance is clipped to the PSD boundary.
pub fn condition(mean: [f64; 2], cov: [[f64; 2]; 2], observed: f64) -> Result<Gaussian> {
    let (v1, v2) = (cov[0][0], cov[1][1]);
    if v1 < 0.0 || v2 < 0.0 {
        return Err(Error::invalid("negative variance in joint covariance"));
    }
    let lim = (v1 * v2).sqrt();
    let c = (0.5 * (cov[0][1] + cov[1][0])).clamp(-lim, lim);
    if v1 == 0.0 {
        let tol = 1e-9 * mean[0].abs().max(1.0);
        if (observed - mean[0]).abs() > tol {
            return Err(Error::invalid("observation inconsistent with a degenerate conditioning variable"));
        }
        return Ok(Gaussian::new(mean[1], v2));
    }
    let gain = c / v1;
    Ok(Gaussian::new(mean[1] + gain * (observed - mean[0]), (v2 - gain * c).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_point_likelihood_is_standard_normal_log_density() {
        // total variance 1, target equal to its own mean
        let p = KernelParams::new(0.5, 1.0, 0.5).unwrap();
        let v = mll(&p, &[3.0], &[42.0]).unwrap();
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn scaling_residuals_lowers_likelihood() {
        let p = KernelParams::new(2.0, 1.5, 0.3).unwrap();
        let x = [0.0, 1.0, 2.5, 4.0];
        let y = [1.0, -0.5, 2.0, 0.1];
        let base = mll(&p, &x, &y).unwrap();
        let scaled: Vec<f64> = y.iter().map(|v| 3.0 * v).collect();
        assert!(mll(&p, &x, &scaled).unwrap() < base);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let p = KernelParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(mll(&p, &[1.0, 2.0], &[1.0]).is_err());
        assert!(mll(&p, &[], &[]).is_err());
    }

    #[test]
    fn posterior_reverts_to_prior_far_from_data() {
        let p = KernelParams::new(900.0, 1.0, 100.0).unwrap();
        let m = EdgeModel::new(p, vec![1.0, 1.5, 2.0], vec![600.0, 640.0, 620.0], FitStatus::Converged).unwrap();
        let far = m.posterior(1000.0);
        assert!((far.mean - 620.0).abs() < 1e-9);
        assert!((far.var - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn posterior_interpolates_as_noise_vanishes() {
        let p = KernelParams::new(900.0, 1.0, 1e-9).unwrap();
        let m = EdgeModel::new(p, vec![1.0, 3.0, 5.0], vec![600.0, 700.0, 650.0], FitStatus::Converged).unwrap();
        let at = m.posterior(3.0);
        assert!((at.mean - 700.0).abs() < 1e-4);
        assert!(at.var < 1e-6);
    }

    #[test]
    fn conditioning_examples() {
        let g = condition([600.0, 650.0], [[100.0, 75.0], [75.0, 225.0]], 610.0).unwrap();
        assert!((g.mean - 657.5).abs() < 1e-12);
        assert!((g.var - 168.75).abs() < 1e-12);

        let ind = condition([1.0, 2.0], [[4.0, 0.0], [0.0, 9.0]], 10.0).unwrap();
        assert_eq!(ind, Gaussian::new(2.0, 9.0));

        let perfect = condition([0.0, 0.0], [[4.0, 6.0], [6.0, 9.0]], 2.0).unwrap();
        assert!(perfect.var.abs() < 1e-12);
        assert!((perfect.mean - 3.0).abs() < 1e-12);

        assert!(condition([0.0, 0.0], [[0.0, 0.0], [0.0, 1.0]], 1.0).is_err());
        assert!(condition([0.0, 0.0], [[0.0, 0.0], [0.0, 1.0]], 0.0).is_ok());
    }

    #[test]
    fn constant_targets_hit_the_floor() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.7).collect();
        let y = vec![300.0; 30];
        let out = fit(&x, &y, &GpFitConfig::default()).unwrap();
        let p = out.model.params();
        assert!(p.signal_var <= 1e-5, "{p:?}");
        assert!(p.noise_var <= 1e-5, "{p:?}");
        assert!((out.model.posterior(5.0).mean - 300.0).abs() < 1e-6);
    }

    #[test]
    fn sparse_edges_inherit() {
        let prior = NetworkPrior { params: KernelParams::new(100.0, 2.0, 25.0).unwrap(), mean: 400.0 };
        let m = inherit(&[8.0, 9.0], &[500.0, 520.0], &prior).unwrap();
        assert_eq!(m.status(), FitStatus::Inherited);
        assert!((m.mean() - 510.0).abs() < 1e-12);
        let empty = inherit(&[], &[], &prior).unwrap();
        assert_eq!(empty.status(), FitStatus::NoData);
        assert_eq!(empty.posterior(3.0), Gaussian::new(400.0, 125.0));
        assert!(fit(&[1.0, 2.0], &[3.0, 4.0], &GpFitConfig::default()).is_err());
    }
}
