//! Ranking candidate paths with bus arrival estimates, and replanning.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{compose, optimality_indices, select_shortest, transfer_probability, LegLaw, PathDistribution};
use crate::corr::CovarianceSource;
use crate::error::{Error, Result};
use crate::gp::ModelSource;
use crate::graph::{enumerate_paths, EdgeKey, EnumerateOptions, PathCandidate, RouteIx, StopIx, TransitGraph};
use crate::math::Gaussian;
use crate::time;

/// An upcoming bus at a stop. `std` is zero for a deterministic estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusEta {
    /// Epoch seconds.
    pub t: f64,
    #[serde(default)]
    pub std: f64,
}

impl BusEta {
    pub fn law(&self) -> Gaussian {
        Gaussian::new(self.t, self.std * self.std)
    }
}

/// Upcoming arrivals per `(stop, route)`, sorted by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EtaFeed {
    arrivals: BTreeMap<(StopIx, RouteIx), Vec<BusEta>>,
}

impl EtaFeed {
    pub fn new() -> Self {
        EtaFeed::default()
    }

    pub fn insert(&mut self, stop: StopIx, route: RouteIx, mut etas: Vec<BusEta>) -> Result<()> {
        if etas.iter().any(|e| !e.t.is_finite() || !(e.std >= 0.0)) {
            return Err(Error::invalid("bus ETAs need finite times and non-negative std"));
        }
        etas.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.arrivals.entry((stop, route)).or_default().extend(etas);
        self.arrivals.get_mut(&(stop, route)).expect("just inserted").sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(())
    }

    pub fn get(&self, stop: StopIx, route: RouteIx) -> Option<&[BusEta]> {
        self.arrivals.get(&(stop, route)).map(|v| v.as_slice())
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(StopIx, RouteIx), &Vec<BusEta>)> {
        self.arrivals.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Initial trapezoid nodes for the optimality integral.
    pub integration_nodes: usize,
    /// A bus counts as catchable when the rider is at the stop before it
    /// with at least this probability.
    pub feasibility_threshold: f64,
    /// Headway used for `(stop, route)` pairs missing from the ETA feed; the
    /// wait is half of it.
    pub default_headway_s: f64,
    /// Per-route headway overrides, by route id.
    #[serde(default)]
    pub headways_s: BTreeMap<String, f64>,
    pub hub_transfers_only: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            integration_nodes: 4096,
            feasibility_threshold: 0.5,
            default_headway_s: 600.0,
            headways_s: BTreeMap::new(),
            hub_transfers_only: true,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.integration_nodes < 3 {
            return Err(Error::config("integration_nodes must be at least 3"));
        }
        if !(self.feasibility_threshold > 0.0 && self.feasibility_threshold <= 1.0) {
            return Err(Error::config("feasibility_threshold must lie in (0, 1]"));
        }
        if !(self.default_headway_s >= 0.0) || self.headways_s.values().any(|h| !(*h >= 0.0)) {
            return Err(Error::config("headways must be non-negative"));
        }
        Ok(())
    }

    fn headway(&self, g: &TransitGraph, r: RouteIx) -> f64 {
        self.headways_s.get(&g.route(r).id).copied().unwrap_or(self.default_headway_s)
    }
}

/// The bus a rider boards for one leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boarding {
    pub route: RouteIx,
    pub stop: StopIx,
    pub eta: BusEta,
    /// Whether the ETA came from the headway fallback.
    pub from_headway: bool,
    /// Probability the rider reaches the stop before this bus.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPath {
    pub candidate: PathCandidate,
    /// Optimality index as integrated.
    pub index: f64,
    /// Index rescaled so the plan's indices sum to one.
    pub index_normalized: f64,
    /// Door-to-door law including waits, in seconds from departure.
    pub total: Gaussian,
    /// Law of the in-vehicle legs alone.
    pub travel: PathDistribution,
    pub wait_s: f64,
    /// Product of the boarding probabilities.
    pub feasibility: f64,
    pub boardings: Vec<Boarding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub origin: StopIx,
    pub destination: StopIx,
    pub tau0: f64,
    /// Candidates sorted by decreasing optimality index.
    pub ranked: Vec<RankedPath>,
    /// Position in `ranked` of the suggested path.
    pub selected: Option<usize>,
    /// Why nothing was selected.
    pub reason: Option<String>,
    /// Some candidates share a leg, so the independence premise is strained.
    pub overlapping: bool,
    pub integration_nodes: usize,
}

impl PlanResult {
    fn empty(origin: StopIx, destination: StopIx, tau0: f64, reason: String) -> Self {
        PlanResult {
            origin,
            destination,
            tau0,
            ranked: Vec::new(),
            selected: None,
            reason: Some(reason),
            overlapping: false,
            integration_nodes: 0,
        }
    }

    pub fn best(&self) -> Option<&RankedPath> {
        self.selected.map(|i| &self.ranked[i])
    }

    pub fn find(&self, cand: &PathCandidate) -> Option<&RankedPath> {
        self.ranked.iter().find(|r| &r.candidate == cand)
    }
}

/// Earliest catchable bus over the routes serving `edge`, for a rider whose
/// arrival at the stop follows `rider`.
fn board(
    g: &TransitGraph,
    edge: EdgeKey,
    rider: Gaussian,
    eta: &EtaFeed,
    cfg: &PlannerConfig,
) -> Option<Boarding> {
    let ride = g.ride_edge(edge)?;
    let mut best: Option<Boarding> = None;
    for &r in &ride.routes {
        let option = match eta.get(edge.tail, r) {
            Some(buses) => buses.iter().find_map(|b| {
                let p = transfer_probability(rider, b.law());
                (p >= cfg.feasibility_threshold).then_some(Boarding {
                    route: r,
                    stop: edge.tail,
                    eta: *b,
                    from_headway: false,
                    probability: p,
                })
            }),
            None => {
                let b = BusEta { t: rider.mean + 0.5 * cfg.headway(g, r), std: 0.0 };
                Some(Boarding {
                    route: r,
                    stop: edge.tail,
                    eta: b,
                    from_headway: true,
                    probability: transfer_probability(rider, b.law()),
                })
            }
        };
        if let Some(o) = option {
            if best.map_or(true, |b| o.eta.t < b.eta.t) {
                best = Some(o);
            }
        }
    }
    best
}

/// Door-to-door law of one candidate, or `None` if some leg has no
/// catchable bus.
fn evaluate_candidate(
    g: &TransitGraph,
    cand: &PathCandidate,
    tau0: f64,
    models: &dyn ModelSource,
    corr: &dyn CovarianceSource,
    eta: &EtaFeed,
    cfg: &PlannerConfig,
) -> Result<Option<(PathDistribution, Vec<Boarding>)>> {
    let mut rider = Gaussian::point(tau0);
    let mut legs = Vec::with_capacity(cand.legs.len());
    let mut boardings = Vec::with_capacity(cand.legs.len());
    for &edge in &cand.legs {
        let Some(b) = board(g, edge, rider, eta, cfg) else {
            return Ok(None);
        };
        let model = models.model(edge).ok_or_else(|| Error::unknown("edge model", format!("{edge}")))?;
        let law = model.predict(time::hour_of_day(b.eta.t));
        if !(law.mean.is_finite() && law.var.is_finite() && law.var >= 0.0) {
            return Err(Error::numerical(format!("edge {edge} predicted an invalid law {law:?}")));
        }
        legs.push(LegLaw { edge, enter_ts: b.eta.t, law });
        rider = Gaussian::new(b.eta.t + law.mean, law.var + b.eta.std * b.eta.std);
        boardings.push(b);
    }
    Ok(Some((compose(cand, tau0, legs, corr), boardings)))
}

/// Ranks every candidate from `s` to `t` for a rider at `s` at epoch second
/// `tau0`.
///
/// Each leg boards the earliest bus the rider catches with probability at
/// least the configured threshold. The door-to-door time runs from `tau0`
/// to the mean boarding time of the last leg plus that leg's law, and its
/// variance is the in-vehicle variance plus the boarded buses' ETA
/// variances.
pub fn ranked_paths(
    g: &TransitGraph,
    s: StopIx,
    t: StopIx,
    tau0: f64,
    models: &dyn ModelSource,
    corr: &dyn CovarianceSource,
    eta: &EtaFeed,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    cfg.validate()?;
    let cands = enumerate_paths(g, s, t, EnumerateOptions { hub_transfers_only: cfg.hub_transfers_only })?;
    rank_candidates(g, s, t, tau0, &cands, models, corr, eta, cfg)
}

#[allow(clippy::too_many_arguments)]
fn rank_candidates(
    g: &TransitGraph,
    s: StopIx,
    t: StopIx,
    tau0: f64,
    cands: &[PathCandidate],
    models: &dyn ModelSource,
    corr: &dyn CovarianceSource,
    eta: &EtaFeed,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    if cands.is_empty() {
        return Ok(PlanResult::empty(s, t, tau0, "no path with at most one transfer".into()));
    }
    let mut rows = Vec::new();
    for c in cands {
        if let Some((travel, boardings)) = evaluate_candidate(g, c, tau0, models, corr, eta, cfg)? {
            let last = boardings[boardings.len() - 1];
            let last_leg = travel.legs[travel.legs.len() - 1].law;
            let in_vehicle = travel.mean;
            let mean = last.eta.t - tau0 + last_leg.mean;
            let eta_var: f64 = boardings.iter().map(|b| b.eta.std * b.eta.std).sum();
            let total = Gaussian::new(mean, travel.var + eta_var);
            let feasibility = boardings.iter().map(|b| b.probability).product();
            rows.push((total, mean - in_vehicle, feasibility, travel, boardings));
        }
    }
    if rows.is_empty() {
        return Ok(PlanResult::empty(s, t, tau0, "no candidate has a catchable bus".into()));
    }
    let laws: Vec<Gaussian> = rows.iter().map(|r| r.0).collect();
    let idx = optimality_indices(&laws, cfg.integration_nodes)?;
    let mut ranked: Vec<RankedPath> = rows
        .into_iter()
        .enumerate()
        .map(|(j, (total, wait_s, feasibility, travel, boardings))| RankedPath {
            candidate: travel.candidate.clone(),
            index: idx.raw[j],
            index_normalized: idx.normalized[j],
            total,
            travel,
            wait_s,
            feasibility,
            boardings,
        })
        .collect();
    // stable, so equal indices keep enumeration order
    ranked.sort_by(|a, b| b.index.total_cmp(&a.index));
    let index: Vec<f64> = ranked.iter().map(|r| r.index).collect();
    let std: Vec<f64> = ranked.iter().map(|r| r.total.std()).collect();
    let mean: Vec<f64> = ranked.iter().map(|r| r.total.mean).collect();
    let selected = select_shortest(&index, &std, &mean);

    let mut overlapping = false;
    for (i, a) in ranked.iter().enumerate() {
        for b in &ranked[i + 1..] {
            overlapping |= a.candidate.legs.iter().any(|l| b.candidate.legs.contains(l));
        }
    }
    Ok(PlanResult {
        origin: s,
        destination: t,
        tau0,
        ranked,
        selected,
        reason: None,
        overlapping,
        integration_nodes: idx.nodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replan {
    pub plan: PlanResult,
    /// What is left of the active path from the current stop.
    pub remaining: Option<PathCandidate>,
    pub recommended: Option<PathCandidate>,
    pub switch: bool,
}

/// Rest of `path` for a rider standing at `at`, if `at` lies on it.
fn remaining_path(g: &TransitGraph, path: &PathCandidate, at: StopIx) -> Option<PathCandidate> {
    let dest = path.destination();
    if at == path.origin() {
        return Some(path.clone());
    }
    let on_leg = |leg: EdgeKey| -> bool {
        g.ride_edge(leg).is_some_and(|e| {
            e.routes.iter().any(|&r| {
                let st = &g.route(r).stops;
                let (Some(i), Some(j)) = (st.iter().position(|&x| x == leg.tail), st.iter().rposition(|&x| x == leg.head))
                else {
                    return false;
                };
                st[i..=j].contains(&at)
            })
        })
    };
    match path.transfer {
        None => on_leg(path.legs[0]).then(|| PathCandidate::direct(EdgeKey::new(at, dest))),
        Some(v) if at == v => Some(PathCandidate::direct(path.legs[1])),
        Some(v) => {
            if on_leg(path.legs[0]) {
                Some(PathCandidate::via(EdgeKey::new(at, v), path.legs[1]))
            } else if on_leg(path.legs[1]) {
                Some(PathCandidate::direct(EdgeKey::new(at, dest)))
            } else {
                None
            }
        }
    }
}

/// Re-ranks from the rider's current stop and recommends a switch when the
/// best alternative's index is outside the 1% band of what is left of the
/// current path.
#[allow(clippy::too_many_arguments)]
pub fn replan(
    g: &TransitGraph,
    current: &PathCandidate,
    at: StopIx,
    now: f64,
    models: &dyn ModelSource,
    corr: &dyn CovarianceSource,
    eta: &EtaFeed,
    cfg: &PlannerConfig,
) -> Result<Replan> {
    cfg.validate()?;
    current.validate(g)?;
    let dest = current.destination();
    if at == dest {
        return Ok(Replan {
            plan: PlanResult::empty(at, dest, now, "already at the destination".into()),
            remaining: None,
            recommended: None,
            switch: false,
        });
    }
    let remaining = remaining_path(g, current, at)
        .ok_or_else(|| Error::invalid(format!("stop {} is not on the active path", g.stop(at).id)))?;
    let mut cands = enumerate_paths(g, at, dest, EnumerateOptions { hub_transfers_only: true })?;
    if !cands.contains(&remaining) {
        cands.push(remaining.clone());
    }
    let plan = rank_candidates(g, at, dest, now, &cands, models, corr, eta, cfg)?;
    let best = plan.best().map(|b| (b.candidate.clone(), b.index));
    let rem_index = plan.find(&remaining).map(|r| r.index);
    let (recommended, switch) = match (best, rem_index) {
        (Some((b, bi)), Some(ri)) => {
            if b != remaining && ri < (1.0 - super::SELECTION_BAND) * bi {
                (Some(b), true)
            } else {
                (Some(remaining.clone()), false)
            }
        }
        // the current path has no catchable bus left
        (Some((b, _)), None) => (Some(b.clone()), b != remaining),
        (None, _) => (None, false),
    };
    Ok(Replan { plan, remaining: Some(remaining), recommended, switch })
}
