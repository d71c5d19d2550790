//! Time-dependent correlation between edges from hourly median travel times.
//!
//! Correlations are computed across days within an hour bin when per-day
//! medians are available for enough days, otherwise across the two 24-hour
//! median profiles. Covariances are the correlation scaled by the two
//! predictive standard deviations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeKey;
use crate::ingest::TravelTimeSample;
use crate::math;
use crate::time;

/// Hourly median travel times of one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaVector {
    pub edge: EdgeKey,
    /// Median per hour bin; interpolated where `interpolated` is set.
    pub medians: [f64; 24],
    pub counts: [u32; 24],
    pub interpolated: [bool; 24],
    /// Per-day medians, `None` where the day has no sample in that hour.
    pub per_day: BTreeMap<i64, [Option<f64>; 24]>,
}

/// Builds the ETA vector of `edge` from its samples. Empty hours are filled
/// by linear interpolation between the nearest non-empty hours (held
/// constant past the first and last) and flagged.
pub fn build_eta_vector(samples: &[TravelTimeSample], edge: EdgeKey) -> Result<EtaVector> {
    let mut bins: [Vec<f64>; 24] = Default::default();
    let mut days: BTreeMap<i64, [Vec<f64>; 24]> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.edge == edge) {
        let h = time::hour_bin(s.depart_hour);
        bins[h].push(s.duration_s);
        days.entry(s.day).or_default()[h].push(s.duration_s);
    }
    let counts: [u32; 24] = core::array::from_fn(|h| bins[h].len() as u32);
    let filled: Vec<usize> = (0..24).filter(|&h| counts[h] > 0).collect();
    if filled.is_empty() {
        return Err(Error::InsufficientData(format!("edge {edge} has no samples")));
    }
    let raw: [f64; 24] = core::array::from_fn(|h| if counts[h] > 0 { math::median(&bins[h]) } else { f64::NAN });
    let mut medians = raw;
    let mut interpolated = [false; 24];
    for h in 0..24 {
        if counts[h] > 0 {
            continue;
        }
        interpolated[h] = true;
        let prev = filled.iter().rev().find(|&&k| k < h);
        let next = filled.iter().find(|&&k| k > h);
        medians[h] = match (prev, next) {
            (Some(&a), Some(&b)) => raw[a] + (raw[b] - raw[a]) * (h - a) as f64 / (b - a) as f64,
            (Some(&a), None) => raw[a],
            (None, Some(&b)) => raw[b],
            (None, None) => unreachable!("at least one bin is filled"),
        };
    }
    let per_day = days
        .into_iter()
        .map(|(d, b)| (d, core::array::from_fn(|h| (!b[h].is_empty()).then(|| math::median(&b[h])))))
        .collect();
    Ok(EtaVector { edge, medians, counts, interpolated, per_day })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pearson {
    pub r: f64,
    /// One input was constant; `r` is reported as 0.
    pub degenerate: bool,
}

/// Sample Pearson correlation, clamped to `[-1, 1]`.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<Pearson> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("vectors differ in length ({} vs {})", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData("correlation needs at least 3 pairs".into()));
    }
    let (mx, my) = (math::mean(x), math::mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // relative test so that tiny rounding noise around a constant does not
    // masquerade as signal
    let tiny = |s: f64, m: f64| s <= 1e-24 * (x.len() as f64) * m.abs().max(1.0).powi(2);
    if tiny(sxx, mx) || tiny(syy, my) {
        return Ok(Pearson { r: 0.0, degenerate: true });
    }
    Ok(Pearson { r: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0), degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrSource {
    /// Across days within the aligned hour bins.
    AcrossDays,
    /// Across the two 24-hour median profiles.
    WholeVector,
    /// Same edge at the same hour.
    Identity,
    /// Constant input; reported as 0.
    Degenerate,
    /// No data for one of the edges; reported as 0.
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub source: CorrSource,
    /// Number of days (or hours, for the whole-vector fallback) used.
    pub support: usize,
}

impl Correlation {
    pub const MISSING: Correlation = Correlation { r: 0.0, source: CorrSource::Missing, support: 0 };

    pub fn is_flagged(&self) -> bool {
        matches!(self.source, CorrSource::Degenerate | CorrSource::Missing)
    }
}

/// Correlation of `a` at hour bin `ha` with `b` at hour bin `hb`.
pub fn correlation(a: &EtaVector, ha: usize, b: &EtaVector, hb: usize, min_days: usize) -> Correlation {
    if a.edge == b.edge && ha == hb {
        return Correlation { r: 1.0, source: CorrSource::Identity, support: 0 };
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (d, row) in &a.per_day {
        if let (Some(x), Some(Some(y))) = (row[ha], b.per_day.get(d).map(|r| r[hb])) {
            xs.push(x);
            ys.push(y);
        }
    }
    let (p, source, support) = if xs.len() >= min_days.max(3) {
        (pearson_corr(&xs, &ys), CorrSource::AcrossDays, xs.len())
    } else {
        (pearson_corr(&a.medians, &b.medians), CorrSource::WholeVector, 24)
    };
    match p {
        Ok(p) if p.degenerate => Correlation { r: 0.0, source: CorrSource::Degenerate, support },
        Ok(p) => Correlation { r: p.r, source, support },
        Err(_) => Correlation::MISSING,
    }
}

/// Largest-magnitude covariance admissible for the given variances.
pub fn clip_covariance(var1: f64, var2: f64, cov: f64) -> f64 {
    let lim = (var1.max(0.0) * var2.max(0.0)).sqrt();
    cov.clamp(-lim, lim)
}

/// Covariance between two edge travel times at given departure hours.
pub trait CovarianceSource {
    /// Correlation of `e1` departing at `t1` hours with `e2` at `t2` hours.
    fn correlation(&self, e1: EdgeKey, t1: f64, e2: EdgeKey, t2: f64) -> Correlation;

    /// `corr · σ1 · σ2`.
    fn covariance(&self, e1: EdgeKey, t1: f64, sd1: f64, e2: EdgeKey, t2: f64, sd2: f64) -> f64 {
        self.correlation(e1, t1, e2, t2).r * sd1 * sd2
    }
}

impl<T: CovarianceSource + ?Sized> CovarianceSource for &T {
    fn correlation(&self, e1: EdgeKey, t1: f64, e2: EdgeKey, t2: f64) -> Correlation {
        (**self).correlation(e1, t1, e2, t2)
    }
}

/// Every distinct edge (or hour) pair uncorrelated.
#[derive(Debug, Clone, Copy, Default)]
pub struct Independent;

impl CovarianceSource for Independent {
    fn correlation(&self, e1: EdgeKey, t1: f64, e2: EdgeKey, t2: f64) -> Correlation {
        if e1 == e2 && time::hour_bin(t1) == time::hour_bin(t2) {
            Correlation { r: 1.0, source: CorrSource::Identity, support: 0 }
        } else {
            Correlation::MISSING
        }
    }
}

/// Correlations computed on demand from ETA vectors.
#[derive(Debug, Clone, Default)]
pub struct EtaCorrelations {
    pub vectors: BTreeMap<EdgeKey, EtaVector>,
    /// Minimum common days for the across-days estimate.
    pub min_days: usize,
}

impl EtaCorrelations {
    pub fn new(vectors: BTreeMap<EdgeKey, EtaVector>) -> Self {
        EtaCorrelations { vectors, min_days: 3 }
    }

    /// Builds ETA vectors for every edge with samples.
    pub fn from_samples(samples: &[TravelTimeSample]) -> Self {
        let mut edges: Vec<EdgeKey> = samples.iter().map(|s| s.edge).collect();
        edges.sort();
        edges.dedup();
        let grouped = crate::ingest::by_edge(samples);
        let vectors = edges
            .into_iter()
            .filter_map(|e| {
                let own: Vec<TravelTimeSample> = grouped[&e].iter().map(|s| (*s).clone()).collect();
                build_eta_vector(&own, e).ok().map(|v| (e, v))
            })
            .collect();
        Self::new(vectors)
    }
}

impl CovarianceSource for EtaCorrelations {
    fn correlation(&self, e1: EdgeKey, t1: f64, e2: EdgeKey, t2: f64) -> Correlation {
        let (h1, h2) = (time::hour_bin(t1), time::hour_bin(t2));
        if e1 == e2 && h1 == h2 {
            return Correlation { r: 1.0, source: CorrSource::Identity, support: 0 };
        }
        match (self.vectors.get(&e1), self.vectors.get(&e2)) {
            (Some(a), Some(b)) => correlation(a, h1, b, h2, self.min_days),
            _ => Correlation::MISSING,
        }
    }
}
