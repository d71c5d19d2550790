//! Online GP regression with structured kernel interpolation (SKI).
//!
//! Each observation is represented by four cubic-convolution weights on a
//! regular grid of `m` inducing points over the day. The state keeps the
//! sufficient statistics `Wᵀy`, `Wᵀ1`, `Σy`, `Σy²`, the exact banded `WᵀW`
//! and a rank-`r` root `L` with `L Lᵀ ≈ WᵀW`. With `A = K_UU` and noise
//! variance `σ²`, inference goes through the `r × r` matrix
//! `Q = I + σ⁻² Lᵀ A L`, so an update or a prediction costs the same no
//! matter how many observations have been absorbed.
//!
//! Targets are centered by their running mean. Because the statistics are
//! kept raw, centering is exact: `Wᵀ(y - ȳ) = Wᵀy - ȳ Wᵀ1`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{KernelParams, TravelTimeModel};
use crate::error::{Error, Result};
use crate::math::Gaussian;
use crate::time::HOURS_PER_DAY;

pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkiConfig {
    /// Number of inducing points `m` on `[0, 24]`.
    pub grid_points: usize,
    /// Maximum root rank `r`.
    pub rank: usize,
    /// Refresh hyperparameters after this many updates; 0 disables.
    pub refresh_every: usize,
    /// Gradient steps per refresh.
    pub refresh_steps: usize,
    /// Variance floors as a fraction of the running target variance.
    pub floor_fraction: f64,
}

impl Default for SkiConfig {
    fn default() -> Self {
        SkiConfig { grid_points: 128, rank: 32, refresh_every: 500, refresh_steps: 10, floor_fraction: 1e-6 }
    }
}

impl SkiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 4 {
            return Err(Error::config(format!("SKI grid needs at least 4 points, got {}", self.grid_points)));
        }
        if self.rank == 0 || self.rank > self.grid_points {
            return Err(Error::config(format!("rank must be in 1..={}, got {}", self.grid_points, self.rank)));
        }
        if !(self.floor_fraction > 0.0 && self.floor_fraction < 1.0) {
            return Err(Error::config("floor_fraction must be in (0, 1)"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        HOURS_PER_DAY / (self.grid_points - 1) as f64
    }
}

/// Four consecutive interpolation weights starting at grid index `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpWeights {
    pub start: usize,
    pub values: [f64; 4],
    /// The input lay outside `[0, 24]` and was clamped.
    pub clamped: bool,
}

impl InterpWeights {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &w)| (self.start + k, w))
    }

    pub fn dot(&self, v: &DVector<f64>) -> f64 {
        self.iter().map(|(i, w)| w * v[i]).sum()
    }
}

/// Keys cubic convolution kernel with `a = -1/2`.
fn keys(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        1.5 * s * s * s - 2.5 * s * s + 1.0
    } else if s < 2.0 {
        -0.5 * s * s * s + 2.5 * s * s - 4.0 * s + 2.0
    } else {
        0.0
    }
}

/// Cubic convolution weights of `x` (hours) on a grid of `m` points over
/// `[0, 24]`.
///
/// Ghost points past either end are extrapolated as
/// `f(-1) = 3 f(0) - 3 f(1) + f(2)`, which keeps cubic accuracy at the
/// boundary and folds every weight back onto real grid points.
pub fn interpolation_weights(m: usize, x: f64) -> Result<InterpWeights> {
    if m < 4 {
        return Err(Error::config(format!("SKI grid needs at least 4 points, got {m}")));
    }
    if x.is_nan() {
        return Err(Error::invalid("interpolation input is NaN"));
    }
    let h = HOURS_PER_DAY / (m - 1) as f64;
    let clamped = !(0.0..=HOURS_PER_DAY).contains(&x);
    let u = x.clamp(0.0, HOURS_PER_DAY) / h;
    let j = (u.floor() as usize).min(m - 2);
    let t = u - j as f64;
    // weights on j-1, j, j+1, j+2
    let raw = [keys(1.0 + t), keys(t), keys(1.0 - t), keys(2.0 - t)];
    let mut values = [0.0; 4];
    let start;
    if j == 0 {
        start = 0;
        values[0] = raw[1] + 3.0 * raw[0];
        values[1] = raw[2] - 3.0 * raw[0];
        values[2] = raw[3] + raw[0];
    } else if j + 2 == m {
        start = m - 4;
        values[1] = raw[0] + raw[3];
        values[2] = raw[1] - 3.0 * raw[3];
        values[3] = raw[2] + 3.0 * raw[3];
    } else {
        start = j - 1;
        values = raw;
    }
    Ok(InterpWeights { start, values, clamped })
}

/// Hour of the `k`-th inducing point.
pub fn grid_point(m: usize, k: usize) -> f64 {
    HOURS_PER_DAY * k as f64 / (m - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub clamped: bool,
    /// The rank-one root update broke positive definiteness of `Q` and the
    /// root was rebuilt from the exact `WᵀW`.
    pub root_rebuilt: bool,
    pub refreshed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefreshReport {
    pub mll_before: f64,
    pub mll_after: f64,
    pub steps: usize,
}

/// Streaming SKI state for one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkiState {
    version: u32,
    config: SkiConfig,
    params: KernelParams,
    n: u64,
    sum_y: f64,
    sum_y2: f64,
    #[serde(with = "dense::vector")]
    wty: DVector<f64>,
    #[serde(with = "dense::vector")]
    w1: DVector<f64>,
    /// Exact `WᵀW` by diagonal: `band[(i, d)] = (WᵀW)[i, i + d]`, `d ≤ 3`.
    #[serde(with = "dense::matrix")]
    band: DMatrix<f64>,
    #[serde(with = "dense::matrix")]
    kuu: DMatrix<f64>,
    /// Root factor, `m × k` with `k ≤ r`.
    #[serde(with = "dense::matrix")]
    l: DMatrix<f64>,
    /// `A L`, kept alongside the root.
    #[serde(with = "dense::matrix")]
    al: DMatrix<f64>,
    /// `A Wᵀy` and `A Wᵀ1`.
    #[serde(with = "dense::vector")]
    a_wty: DVector<f64>,
    #[serde(with = "dense::vector")]
    a_w1: DVector<f64>,
    #[serde(with = "dense::matrix")]
    q: DMatrix<f64>,
    /// Lower Cholesky factor of `Q`.
    #[serde(with = "dense::matrix")]
    q_chol: DMatrix<f64>,
    /// `a = σ⁻² Lᵀ A z` for centered `z`.
    #[serde(with = "dense::vector")]
    a_vec: DVector<f64>,
    /// `b = Q⁻¹ a`.
    #[serde(with = "dense::vector")]
    b_vec: DVector<f64>,
    /// Predictive mean weights on the grid.
    #[serde(with = "dense::vector")]
    alpha: DVector<f64>,
    updates_since_refresh: u64,
    clamped_inputs: u64,
    root_rebuilds: u64,
}

fn kernel_gram(p: &KernelParams, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| p.kernel(grid_point(m, i), grid_point(m, j)))
}

/// Lower Cholesky factor or `None` if not positive definite.
fn cholesky_lower(q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if q.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    q.clone().cholesky().map(|c| c.unpack())
}

fn chol_solve(lower: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if lower.nrows() == 0 {
        return DVector::zeros(0);
    }
    let y = lower.solve_lower_triangular(rhs).expect("triangular factor has nonzero diagonal");
    lower.tr_solve_lower_triangular(&y).expect("triangular factor has nonzero diagonal")
}

/// Eigenpairs sorted by decreasing eigenvalue.
fn sorted_eigen(g: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

impl SkiState {
    pub fn new(params: KernelParams, config: SkiConfig) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        let m = config.grid_points;
        let kuu = kernel_gram(&params, m);
        Ok(SkiState {
            version: STATE_VERSION,
            config,
            params,
            n: 0,
            sum_y: 0.0,
            sum_y2: 0.0,
            wty: DVector::zeros(m),
            w1: DVector::zeros(m),
            band: DMatrix::zeros(m, 4),
            kuu,
            l: DMatrix::zeros(m, 0),
            al: DMatrix::zeros(m, 0),
            a_wty: DVector::zeros(m),
            a_w1: DVector::zeros(m),
            q: DMatrix::zeros(0, 0),
            q_chol: DMatrix::zeros(0, 0),
            a_vec: DVector::zeros(0),
            b_vec: DVector::zeros(0),
            alpha: DVector::zeros(m),
            updates_since_refresh: 0,
            clamped_inputs: 0,
            root_rebuilds: 0,
        })
    }

    /// Rejects snapshots written by an incompatible version.
    pub fn check_version(&self) -> Result<()> {
        if self.version != STATE_VERSION {
            return Err(Error::invalid(format!(
                "SKI state version {} is not supported (expected {STATE_VERSION})",
                self.version
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn config(&self) -> &SkiConfig {
        &self.config
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rank(&self) -> usize {
        self.l.ncols()
    }

    pub fn clamped_inputs(&self) -> u64 {
        self.clamped_inputs
    }

    pub fn root_rebuilds(&self) -> u64 {
        self.root_rebuilds
    }

    pub fn running_mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum_y / self.n as f64
        }
    }

    /// Population variance of the absorbed targets.
    pub fn running_variance(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let m = self.running_mean();
        (self.sum_y2 / self.n as f64 - m * m).max(0.0)
    }

    /// `Wᵀy` as accumulated so far.
    pub fn wty(&self) -> &DVector<f64> {
        &self.wty
    }

    pub fn sum_y2(&self) -> f64 {
        self.sum_y2
    }

    /// The exact `WᵀW` as a dense matrix.
    pub fn wtw(&self) -> DMatrix<f64> {
        let m = self.config.grid_points;
        let mut s = DMatrix::zeros(m, m);
        for i in 0..m {
            for d in 0..4 {
                if i + d < m {
                    s[(i, i + d)] = self.band[(i, d)];
                    s[(i + d, i)] = self.band[(i, d)];
                }
            }
        }
        s
    }

    /// `‖L Lᵀ - WᵀW‖_F / ‖WᵀW‖_F`.
    pub fn root_residual(&self) -> f64 {
        let s = self.wtw();
        let norm = s.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.l * self.l.transpose() - s).norm() / norm
    }

    /// Root residual measured through the kernel,
    /// `‖A^½ (L Lᵀ - WᵀW) A^½‖_F / ‖A^½ WᵀW A^½‖_F`.
    ///
    /// This is the error that reaches predictions; directions of `WᵀW`
    /// that the kernel barely sees are cheap to drop.
    pub fn kernel_root_residual(&self) -> f64 {
        let s = self.wtw();
        let d = &self.l * self.l.transpose() - &s;
        let frob2 = |x: &DMatrix<f64>| {
            let ax = &self.kuu * x;
            (&ax * &ax).trace().max(0.0)
        };
        let norm = frob2(&s);
        if norm == 0.0 {
            return 0.0;
        }
        (frob2(&d) / norm).sqrt()
    }

    fn centered_az(&self) -> DVector<f64> {
        &self.a_wty - &self.a_w1 * self.running_mean()
    }

    /// Recomputes `a`, `b` and the mean weights from `Q`'s factor.
    fn refresh_cache(&mut self) {
        let s2 = self.params.noise_var;
        let az = self.centered_az();
        self.a_vec = self.l.tr_mul(&az) / s2;
        self.b_vec = chol_solve(&self.q_chol, &self.a_vec);
        self.alpha = (az - &self.al * &self.b_vec) / s2;
    }

    /// Factorizes `Q`, rebuilding the root from the exact `WᵀW` if needed.
    fn factor_q(&mut self) -> bool {
        if let Some(c) = cholesky_lower(&self.q) {
            self.q_chol = c;
            return false;
        }
        self.rebuild_root();
        self.root_rebuilds += 1;
        true
    }

    /// Exact root of `WᵀW` from its eigendecomposition, dropping null
    /// directions.
    pub fn full_root(&self) -> DMatrix<f64> {
        let (vals, vecs) = sorted_eigen(self.wtw());
        let top = vals.first().copied().unwrap_or(0.0);
        let keep = vals.iter().take_while(|&&v| v > 1e-12 * top && v > 0.0).count();
        DMatrix::from_fn(self.config.grid_points, keep, |i, c| vecs[(i, c)] * vals[c].sqrt())
    }

    /// Replaces `L` with the rank-`r` root of the exact `WᵀW` that best
    /// preserves `Lᵀ A L`, and recomputes everything that depends on it.
    pub fn rebuild_root(&mut self) {
        let root = self.full_root();
        let (_, vecs) = sorted_eigen(root.tr_mul(&(&self.kuu * &root)));
        let keep = root.ncols().min(self.config.rank);
        self.l = &root * vecs.columns(0, keep);
        self.recompute_from_root();
    }

    fn recompute_from_root(&mut self) {
        let s2 = self.params.noise_var;
        self.al = &self.kuu * &self.l;
        let k = self.l.ncols();
        let mut q = self.l.tr_mul(&self.al) / s2;
        for i in 0..k {
            q[(i, i)] += 1.0;
        }
        self.q = 0.5 * (&q + q.transpose());
        // Q = I + PSD, so this only fails on garbage input
        self.q_chol = cholesky_lower(&self.q).unwrap_or_else(|| DMatrix::identity(k, k));
        self.refresh_cache();
    }

    /// Absorbs one observation `y` (seconds) at time of day `x` (hours).
    pub fn update(&mut self, x: f64, y: f64) -> Result<UpdateReport> {
        if !y.is_finite() || !x.is_finite() {
            return Err(Error::invalid("non-finite observation"));
        }
        let w = interpolation_weights(self.config.grid_points, x)?;
        if w.clamped {
            self.clamped_inputs += 1;
        }
        let m = self.config.grid_points;
        let s2 = self.params.noise_var;

        self.n += 1;
        self.sum_y += y;
        self.sum_y2 += y * y;
        let mut wd = DVector::zeros(m);
        for (i, wi) in w.iter() {
            self.wty[i] += wi * y;
            self.w1[i] += wi;
            wd[i] = wi;
            for (j, wj) in w.iter() {
                if j >= i {
                    self.band[(i, j - i)] += wi * wj;
                }
            }
        }
        // A w touches four columns of A
        let mut aw = DVector::zeros(m);
        for (i, wi) in w.iter() {
            aw.axpy(wi, &self.kuu.column(i), 1.0);
        }
        self.a_wty.axpy(y, &aw, 1.0);
        self.a_w1.axpy(1.0, &aw, 1.0);

        // bordered root [L w] and Q
        let k = self.l.ncols();
        let c = self.l.tr_mul(&aw) / s2;
        let d = 1.0 + w.dot(&aw) / s2;
        let mut l2 = self.l.clone().insert_column(k, 0.0);
        l2.set_column(k, &wd);
        let mut al2 = self.al.clone().insert_column(k, 0.0);
        al2.set_column(k, &aw);
        let mut q2 = DMatrix::zeros(k + 1, k + 1);
        q2.view_mut((0, 0), (k, k)).copy_from(&self.q);
        for i in 0..k {
            q2[(i, k)] = c[i];
            q2[(k, i)] = c[i];
        }
        q2[(k, k)] = d;

        if k + 1 > self.config.rank {
            // a rank-deficient L' drops its null direction losslessly;
            // otherwise keep the top-r eigendirections of L'ᵀAL'
            let (gram_vals, gram_vecs) = sorted_eigen(l2.tr_mul(&l2));
            let lossless = gram_vals[self.config.rank] <= 1e-12 * gram_vals[0].max(f64::MIN_POSITIVE);
            let (_, vecs) = if lossless { (gram_vals, gram_vecs) } else { sorted_eigen(l2.tr_mul(&al2)) };
            let v = vecs.columns(0, self.config.rank).into_owned();
            self.l = &l2 * &v;
            self.al = &al2 * &v;
            let q = v.tr_mul(&q2) * &v;
            self.q = 0.5 * (&q + q.transpose());
        } else {
            self.l = l2;
            self.al = al2;
            self.q = q2;
        }
        let root_rebuilt = self.factor_q();
        self.refresh_cache();

        self.updates_since_refresh += 1;
        let mut refreshed = false;
        if self.config.refresh_every > 0 && self.updates_since_refresh >= self.config.refresh_every as u64 {
            self.refresh()?;
            refreshed = true;
        }
        Ok(UpdateReport { clamped: w.clamped, root_rebuilt, refreshed })
    }

    /// Predictive law at `x` hours, including observation noise.
    pub fn predict(&self, x: f64) -> Gaussian {
        if self.n == 0 {
            return Gaussian::new(0.0, self.params.prior_variance());
        }
        let Ok(w) = interpolation_weights(self.config.grid_points, x) else {
            return Gaussian::new(f64::NAN, f64::NAN);
        };
        let mean = self.running_mean() + w.dot(&self.alpha);
        // w*ᵀ A w*
        let mut prior = 0.0;
        for (i, wi) in w.iter() {
            for (j, wj) in w.iter() {
                prior += wi * wj * self.kuu[(i, j)];
            }
        }
        let k = self.l.ncols();
        let p = DVector::from_fn(k, |c, _| w.iter().map(|(i, wi)| wi * self.al[(i, c)]).sum::<f64>());
        let reduction = if k == 0 { 0.0 } else { p.dot(&chol_solve(&self.q_chol, &p)) / self.params.noise_var };
        let f_var = (prior - reduction).max(0.0);
        Gaussian::new(mean, f_var + self.params.noise_var)
    }

    /// Marginal log-likelihood of the centered targets under the SKI kernel.
    pub fn mll(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let ybar = self.running_mean();
        let z = &self.wty - &self.w1 * ybar;
        let az = self.centered_az();
        self.mll_parts(z.dot(&az), &self.a_vec, &self.q_chol, self.params.noise_var)
    }

    fn mll_parts(&self, z_az: f64, a: &DVector<f64>, q_chol: &DMatrix<f64>, s2: f64) -> f64 {
        let n = self.n as f64;
        let ybar = self.running_mean();
        let yty = (self.sum_y2 - n * ybar * ybar).max(0.0);
        let aqa = if a.is_empty() { 0.0 } else { a.dot(&chol_solve(q_chol, a)) };
        let logdet_q: f64 = (0..q_chol.nrows()).map(|i| q_chol[(i, i)].ln()).sum::<f64>() * 2.0;
        let quad = (yty - z_az / s2 + aqa) / s2;
        -0.5 * quad - 0.5 * (n * s2.ln() + logdet_q) - 0.5 * n * (2.0 * PI).ln()
    }

    /// MLL of the current data under `p` with the exact (untruncated) root.
    pub fn mll_with(&self, p: &KernelParams) -> Option<f64> {
        self.mll_with_root(p, &self.full_root())
    }

    fn mll_with_root(&self, p: &KernelParams, root: &DMatrix<f64>) -> Option<f64> {
        if self.n == 0 || p.validate().is_err() {
            return None;
        }
        let s2 = p.noise_var;
        let kuu = kernel_gram(p, self.config.grid_points);
        let al = &kuu * root;
        let mut q = root.tr_mul(&al) / s2;
        for i in 0..root.ncols() {
            q[(i, i)] += 1.0;
        }
        let q_chol = cholesky_lower(&(0.5 * (&q + q.transpose())))?;
        let z = &self.wty - &self.w1 * self.running_mean();
        let az = &kuu * &z;
        let a = root.tr_mul(&az) / s2;
        let v = self.mll_parts(z.dot(&az), &a, &q_chol, s2);
        v.is_finite().then_some(v)
    }

    /// Replaces the hyperparameters and rebuilds every cached quantity.
    pub fn set_params(&mut self, p: KernelParams) -> Result<()> {
        p.validate()?;
        self.params = p;
        self.kuu = kernel_gram(&p, self.config.grid_points);
        let m = self.config.grid_points;
        let mut a_wty = DVector::zeros(m);
        let mut a_w1 = DVector::zeros(m);
        a_wty.gemv(1.0, &self.kuu, &self.wty, 0.0);
        a_w1.gemv(1.0, &self.kuu, &self.w1, 0.0);
        self.a_wty = a_wty;
        self.a_w1 = a_w1;
        // the truncated root is chosen with respect to A
        self.rebuild_root();
        Ok(())
    }

    /// Takes gradient-ascent steps in log-parameter space on the MLL with
    /// the exact root of `WᵀW`, then re-roots. Every accepted step
    /// increases that MLL; the report carries its first and last values.
    pub fn refresh(&mut self) -> Result<RefreshReport> {
        self.updates_since_refresh = 0;
        if self.n < 2 {
            self.rebuild_root();
            let v = self.mll();
            return Ok(RefreshReport { mll_before: v, mll_after: v, steps: 0 });
        }
        let root = self.full_root();
        let var = self.running_variance();
        let scale = if var > 0.0 { var } else { 1.0 };
        let floor = (self.config.floor_fraction * scale).ln();
        let lo = [floor, self.config.spacing().max(0.01).ln(), floor];
        let hi = [(1e4 * scale).ln(), 1000f64.ln(), (1e4 * scale).ln()];
        let clamp = |t: [f64; 3]| -> [f64; 3] {
            let mut o = t;
            for i in 0..3 {
                o[i] = t[i].clamp(lo[i], hi[i]);
            }
            o
        };
        let eval = |t: [f64; 3]| self.mll_with_root(&KernelParams::from_log(t), &root);

        let mut theta = clamp(self.params.to_log());
        let Some(mut f) = eval(theta) else {
            self.rebuild_root();
            let v = self.mll();
            return Ok(RefreshReport { mll_before: v, mll_after: v, steps: 0 });
        };
        let before = f;
        let mut steps = 0;
        const H: f64 = 1e-4;
        for _ in 0..self.config.refresh_steps {
            let mut g = [0.0; 3];
            for i in 0..3 {
                let mut up = theta;
                let mut dn = theta;
                up[i] += H;
                dn[i] -= H;
                match (eval(up), eval(dn)) {
                    (Some(a), Some(b)) => g[i] = (a - b) / (2.0 * H),
                    _ => g[i] = 0.0,
                }
            }
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax < 1e-8 {
                break;
            }
            let mut step = 1.0 / gmax;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = clamp([theta[0] + step * g[0], theta[1] + step * g[1], theta[2] + step * g[2]]);
                if let Some(fc) = eval(cand) {
                    if fc > f {
                        theta = cand;
                        f = fc;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            steps += 1;
        }
        if steps > 0 {
            self.set_params(KernelParams::from_log(theta))?;
        } else {
            self.rebuild_root();
        }
        Ok(RefreshReport { mll_before: before, mll_after: f, steps })
    }
}

/// Row-major `(rows, cols, data)` encoding for nalgebra containers.
mod dense {
    use alloc::vec::Vec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Raw {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub mod matrix {
        use super::*;
        use nalgebra::DMatrix;

        pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
            let data = m.transpose().as_slice().to_vec();
            Raw { rows: m.nrows(), cols: m.ncols(), data }.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
            let r = Raw::deserialize(d)?;
            if r.rows * r.cols != r.data.len() {
                return Err(serde::de::Error::custom("matrix shape does not match data length"));
            }
            Ok(DMatrix::from_row_slice(r.rows, r.cols, &r.data))
        }
    }

    pub mod vector {
        use super::*;
        use nalgebra::DVector;

        pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.as_slice().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
            Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
        }
    }
}

impl TravelTimeModel for SkiState {
    fn predict(&self, hour: f64) -> Gaussian {
        SkiState::predict(self, hour)
    }
}
