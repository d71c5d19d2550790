//! Normality checks for per-edge travel-time samples: standardization,
//! Q-Q and P-P points, the one-sample Kolmogorov-Smirnov test against the
//! standard normal, and a histogram KL divergence compared with a baseline
//! drawn from pairs of genuinely normal samples.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub standardized: bool,
}

impl SampleSet {
    pub fn raw(values: Vec<f64>) -> Self {
        SampleSet { values, standardized: false }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `(x - mean) / std` with the population standard deviation.
pub fn standardize(xs: &[f64]) -> Result<SampleSet> {
    if xs.len() < 2 {
        return Err(Error::invalid("standardize needs at least two values"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("standardize needs finite values"));
    }
    let m = math::mean(xs);
    let sd = math::population_variance(xs).sqrt();
    if !(sd > 0.0) {
        return Err(Error::invalid("cannot standardize a constant sample"));
    }
    Ok(SampleSet { values: xs.iter().map(|x| (x - m) / sd).collect(), standardized: true })
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `(Φ⁻¹((i - ½)/n), x₍ᵢ₎)` for the sorted sample.
pub fn qq_points(xs: &SampleSet) -> Vec<(f64, f64)> {
    let n = xs.len() as f64;
    sorted(&xs.values)
        .into_iter()
        .enumerate()
        .map(|(i, x)| (math::norm_quantile((i as f64 + 0.5) / n), x))
        .collect()
}

/// `(Φ(x₍ᵢ₎), (i - ½)/n)` for the sorted sample.
pub fn pp_points(xs: &SampleSet) -> Vec<(f64, f64)> {
    let n = xs.len() as f64;
    sorted(&xs.values)
        .into_iter()
        .enumerate()
        .map(|(i, x)| (math::norm_cdf(x), (i as f64 + 0.5) / n))
        .collect()
}

/// Equal-width histogram over `[lo, hi]`: `(left edge, right edge, count)`.
pub fn histogram(xs: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<(f64, f64, usize)> {
    let counts = bin_counts(xs, bins, lo, hi);
    let w = (hi - lo) / bins as f64;
    counts.into_iter().enumerate().map(|(b, c)| (lo + b as f64 * w, lo + (b + 1) as f64 * w, c)).collect()
}

fn bin_counts(xs: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<usize> {
    let mut counts = alloc::vec![0usize; bins];
    let span = hi - lo;
    for &x in xs {
        let b = if span > 0.0 { ((x - lo) / span * bins as f64).floor() } else { 0.0 };
        counts[(b.max(0.0) as usize).min(bins - 1)] += 1;
    }
    counts
}

/// Significance level for [`KsResult::reject`].
pub const KS_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub d: f64,
    pub p_value: f64,
    /// Normality rejected at [`KS_ALPHA`].
    pub reject: bool,
}

/// One-sample KS test of `xs` against the standard normal.
pub fn ks_test(xs: &SampleSet) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(Error::invalid("KS test needs at least one value"));
    }
    let ys = sorted(&xs.values);
    let n = ys.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let f = math::norm_cdf(y);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let p_value = ks_p_value(d, ys.len());
    Ok(KsResult { n: ys.len(), d, p_value, reject: p_value < KS_ALPHA })
}

/// Asymptotic p-value with the `√n + 0.12 + 0.11/√n` scaling.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// `P[K > λ]` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // small-λ form converges where the alternating series does not
        let c = core::f64::consts::PI * core::f64::consts::PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=6 {
            let j = (2 * k - 1) as f64;
            s += (-j * j * c).exp();
        }
        return (1.0 - (2.0 * core::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Pseudo-count added to every histogram bin.
pub const KL_PSEUDO_COUNT: f64 = 0.5;

/// Bin count for samples of size `n`: `⌈log₂ n + 1⌉`.
pub fn kl_bins(n: usize) -> usize {
    ((n.max(1) as f64).log2() + 1.0).ceil().max(1.0) as usize
}

/// Histogram estimate of `KL(xs ‖ ys)` in nats.
///
/// Both samples share equal-width bins over the pooled range; each bin gets
/// [`KL_PSEUDO_COUNT`] so empty bins stay finite.
pub fn kl_divergence(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::invalid("KL divergence needs two non-empty samples"));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in xs.iter().chain(ys) {
        if !v.is_finite() {
            return Err(Error::invalid("KL divergence needs finite values"));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let bins = kl_bins(xs.len().max(ys.len()));
    let cx = bin_counts(xs, bins, lo, hi);
    let cy = bin_counts(ys, bins, lo, hi);
    let zx = xs.len() as f64 + KL_PSEUDO_COUNT * bins as f64;
    let zy = ys.len() as f64 + KL_PSEUDO_COUNT * bins as f64;
    let mut kl = 0.0;
    for (a, b) in cx.iter().zip(&cy) {
        let p = (*a as f64 + KL_PSEUDO_COUNT) / zx;
        let q = (*b as f64 + KL_PSEUDO_COUNT) / zy;
        kl += p * (p / q).ln();
    }
    Ok(kl.max(0.0))
}

fn normal_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// KL between two independent standard-normal samples of one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlBaseline {
    pub size: usize,
    pub iterations: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub p95: f64,
}

impl KlBaseline {
    pub fn contains(&self, kl: f64) -> bool {
        kl >= self.min && kl <= self.max
    }
}

pub fn kl_baseline(size: usize, iterations: usize, seed: u64) -> Result<KlBaseline> {
    if size == 0 || iterations == 0 {
        return Err(Error::invalid("baseline needs a positive size and iteration count"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (size as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut v = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let a = normal_sample(&mut rng, size);
        let b = normal_sample(&mut rng, size);
        v.push(kl_divergence(&a, &b)?);
    }
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(KlBaseline {
        size,
        iterations,
        min: v[0],
        mean: math::mean(&v),
        max: v[iterations - 1],
        p95: math::quantile_sorted(&v, 0.95),
    })
}

/// Published baseline at size 100 (min, mean, max), carried in reports for
/// comparison.
pub const REFERENCE_BASELINE_100: (f64, f64, f64) = (0.0006, 0.036, 0.432);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeKl {
    pub label: String,
    pub n: usize,
    pub kl: f64,
    pub inside_envelope: bool,
    pub above_p95: bool,
    pub ks: KsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeKlReport {
    pub iterations: usize,
    pub seed: u64,
    pub baselines: Vec<KlBaseline>,
    pub edges: Vec<EdgeKl>,
    /// Edges whose KL lies inside the baseline min-max envelope.
    pub inside_fraction: f64,
    /// Edges whose KL exceeds the baseline 95th percentile.
    pub above_p95_fraction: f64,
    pub median_ks_p: f64,
    pub reference_100: (f64, f64, f64),
}

/// Compares each edge's standardized sample with a fresh normal sample of
/// the same size, against the normal-vs-normal baseline at that size.
pub fn relative_kld_experiment(edges: &[(String, Vec<f64>)], iterations: usize, seed: u64) -> Result<RelativeKlReport> {
    let mut baselines: BTreeMap<usize, KlBaseline> = BTreeMap::new();
    let mut out = Vec::with_capacity(edges.len());
    for (k, (label, xs)) in edges.iter().enumerate() {
        let s = standardize(xs)?;
        let n = s.len();
        if !baselines.contains_key(&n) {
            baselines.insert(n, kl_baseline(n, iterations, seed)?);
        }
        let base = &baselines[&n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 + k as u64));
        let fresh = normal_sample(&mut rng, n);
        let kl = kl_divergence(&s.values, &fresh)?;
        out.push(EdgeKl {
            label: label.clone(),
            n,
            kl,
            inside_envelope: base.contains(kl),
            above_p95: kl > base.p95,
            ks: ks_test(&s)?,
        });
    }
    let m = out.len().max(1) as f64;
    let ps: Vec<f64> = out.iter().map(|e| e.ks.p_value).collect();
    Ok(RelativeKlReport {
        iterations,
        seed,
        inside_fraction: out.iter().filter(|e| e.inside_envelope).count() as f64 / m,
        above_p95_fraction: out.iter().filter(|e| e.above_p95).count() as f64 / m,
        median_ks_p: if ps.is_empty() { f64::NAN } else { math::median(&ps) },
        baselines: baselines.into_values().collect(),
        edges: out,
        reference_100: REFERENCE_BASELINE_100,
    })
}
