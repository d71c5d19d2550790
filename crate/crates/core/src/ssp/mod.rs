//! Stochastic shortest paths over Gaussian edge laws.
//!
//! A candidate path (at most one transfer) gets a Gaussian travel-time law
//! by summing its legs, each evaluated at the mean time the rider reaches
//! it, plus twice the legs' covariance. Candidates are compared by their
//! optimality index, the probability of being strictly fastest when the
//! candidates are treated as independent.

pub mod evaluate;
pub mod plan;

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::corr::{self, CovarianceSource};
use crate::error::{Error, Result};
use crate::gp::ModelSource;
use crate::graph::{EdgeKey, PathCandidate};
use crate::math::{self, Gaussian};
use crate::time;

pub use evaluate::{evaluate_static_vs_stochastic, EvaluationReport, Query, Schedule, Timetable};
pub use plan::{ranked_paths, replan, BusEta, EtaFeed, PlanResult, PlannerConfig, RankedPath, Replan};

/// Fraction of `μ²` used as variance when composition leaves none.
pub const VARIANCE_FLOOR_FRACTION: f64 = 0.01;

/// One leg of a composed path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegLaw {
    pub edge: EdgeKey,
    /// Epoch seconds at which the leg is entered.
    pub enter_ts: f64,
    pub law: Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDistribution {
    pub candidate: PathCandidate,
    /// Epoch seconds the trip starts.
    pub tau0: f64,
    pub mean: f64,
    pub var: f64,
    pub legs: Vec<LegLaw>,
    pub cross_cov: f64,
    /// The assembled variance was not positive and was floored.
    pub floored: bool,
    /// The cross-covariance came from a fallback (missing or degenerate).
    pub corr_flagged: bool,
}

impl PathDistribution {
    pub fn law(&self) -> Gaussian {
        Gaussian::new(self.mean, self.var)
    }

    pub fn std(&self) -> f64 {
        self.var.max(0.0).sqrt()
    }
}

/// Sum of leg laws with one covariance term; floors a non-positive result.
pub(crate) fn compose(candidate: &PathCandidate, tau0: f64, legs: Vec<LegLaw>, corr: &dyn CovarianceSource) -> PathDistribution {
    let mean: f64 = legs.iter().map(|l| l.law.mean).sum();
    let mut var: f64 = legs.iter().map(|l| l.law.var).sum();
    let mut cross_cov = 0.0;
    let mut corr_flagged = false;
    if legs.len() == 2 {
        let (a, b) = (&legs[0], &legs[1]);
        let c = corr.correlation(a.edge, time::hour_of_day(a.enter_ts), b.edge, time::hour_of_day(b.enter_ts));
        corr_flagged = c.is_flagged();
        cross_cov = corr::clip_covariance(a.law.var, b.law.var, c.r * a.law.std() * b.law.std());
        var += 2.0 * cross_cov;
    }
    let floored = !(var > 0.0);
    if floored {
        var = VARIANCE_FLOOR_FRACTION * mean * mean;
    }
    PathDistribution { candidate: candidate.clone(), tau0, mean, var, legs, cross_cov, floored, corr_flagged }
}

/// Travel-time law of `cand` for a rider starting at epoch second `tau0`.
///
/// The first leg is evaluated at `tau0`, the second at `tau0` plus the first
/// leg's mean.
pub fn path_distribution(
    cand: &PathCandidate,
    tau0: f64,
    models: &dyn ModelSource,
    corr: &dyn CovarianceSource,
) -> Result<PathDistribution> {
    let mut legs = Vec::with_capacity(cand.legs.len());
    let mut t = tau0;
    for &edge in &cand.legs {
        let model = models.model(edge).ok_or_else(|| Error::unknown("edge model", format!("{edge}")))?;
        let law = model.predict(time::hour_of_day(t));
        if !(law.mean.is_finite() && law.var.is_finite() && law.var >= 0.0) {
            return Err(Error::numerical(format!("edge {edge} predicted an invalid law {law:?}")));
        }
        legs.push(LegLaw { edge, enter_ts: t, law });
        t += law.mean;
    }
    Ok(compose(cand, tau0, legs, corr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityIndices {
    /// Integrated indices before normalization.
    pub raw: Vec<f64>,
    /// Indices rescaled to sum to one, for reporting.
    pub normalized: Vec<f64>,
    pub sum: f64,
    /// Trapezoid nodes used in the accepted pass.
    pub nodes: usize,
}

/// Tolerance on `ΣC - 1` before an integration pass is rejected.
pub const PARTITION_TOLERANCE: f64 = 0.02;
const HALF_WIDTH: f64 = 8.0;
const MAX_DOUBLINGS: usize = 4;

/// One trapezoid pass for every index.
///
/// Path `j`'s index is integrated in its own standard score:
/// `C_j = ∫ φ(z) Π_{i≠j} [1 - Φ((μ_j + σ_j z - μ_i) / σ_i)] dz` over
/// `[-8, 8]`, which puts every node where `f_j` has mass regardless of how
/// the candidates' spreads compare.
fn integrate(laws: &[Gaussian], nodes: usize) -> Vec<f64> {
    let h = 2.0 * HALF_WIDTH / (nodes - 1) as f64;
    let sd: Vec<f64> = laws.iter().map(|g| g.std()).collect();
    (0..laws.len())
        .map(|j| {
            let mut acc = 0.0;
            for k in 0..nodes {
                let z = -HALF_WIDTH + k as f64 * h;
                let x = laws[j].mean + sd[j] * z;
                let mut f = math::norm_pdf(z);
                for (i, g) in laws.iter().enumerate() {
                    if i != j {
                        f *= math::norm_sf((x - g.mean) / sd[i]);
                    }
                }
                let w = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
                acc += w * f;
            }
            acc * h
        })
        .collect()
}

/// Probability of each law being the strict minimum, assuming independence.
///
/// Starts with `nodes` trapezoid nodes and doubles up to four times while
/// `|ΣC - 1|` exceeds [`PARTITION_TOLERANCE`].
pub fn optimality_indices(laws: &[Gaussian], nodes: usize) -> Result<OptimalityIndices> {
    if laws.is_empty() {
        return Err(Error::invalid("optimality indices need at least one path"));
    }
    if nodes < 3 {
        return Err(Error::config("at least 3 integration nodes required"));
    }
    if let Some(g) = laws.iter().find(|g| !(g.var > 0.0 && g.var.is_finite() && g.mean.is_finite())) {
        return Err(Error::invalid(format!("path law {g:?} must have finite mean and positive variance")));
    }
    if laws.len() == 1 {
        return Ok(OptimalityIndices { raw: alloc::vec![1.0], normalized: alloc::vec![1.0], sum: 1.0, nodes });
    }
    let mut n = nodes;
    for _ in 0..=MAX_DOUBLINGS {
        let raw = integrate(laws, n);
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() <= PARTITION_TOLERANCE {
            let normalized = raw.iter().map(|c| c / sum).collect();
            return Ok(OptimalityIndices { raw, normalized, sum, nodes: n });
        }
        n = 2 * n - 1;
    }
    Err(Error::numerical("optimality indices do not sum to one at the finest integration grid"))
}

/// Relative width of the band around the best index.
pub const SELECTION_BAND: f64 = 0.01;

/// Index of the candidate to suggest: among indices within 1% of the best,
/// the smallest standard deviation, then the smallest mean, then the first.
pub fn select_shortest(index: &[f64], std: &[f64], mean: &[f64]) -> Option<usize> {
    let best = index.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return None;
    }
    let mut pick: Option<usize> = None;
    for j in 0..index.len() {
        if index[j] < (1.0 - SELECTION_BAND) * best {
            continue;
        }
        pick = match pick {
            None => Some(j),
            Some(p) => {
                let better = std[j] < std[p] || (std[j] == std[p] && mean[j] < mean[p]);
                Some(if better { j } else { p })
            }
        };
    }
    pick
}

/// Probability that the rider (arriving per `current`) is at the stop no
/// later than the bus (arriving per `next_bus`).
pub fn transfer_probability(current: Gaussian, next_bus: Gaussian) -> f64 {
    let var = current.var.max(0.0) + next_bus.var.max(0.0);
    if var == 0.0 {
        return if current.mean <= next_bus.mean { 1.0 } else { 0.0 };
    }
    math::norm_cdf((next_bus.mean - current.mean) / var.sqrt())
}
