//! Command bodies without the file handling, so tests can drive them
//! directly.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stochtransit_core::corr::{EtaCorrelations, EtaVector};
use stochtransit_core::gaussianity::{self, RelativeKlReport};
use stochtransit_core::gp::batch::{self, EdgeModel, FitStatus, GpFitConfig, NetworkPrior};
use stochtransit_core::gp::online::SkiState;
use stochtransit_core::gp::KernelParams;
use stochtransit_core::graph::{enumerate_paths, EdgeKey, EnumerateOptions, StopIx, TransitGraph};
use stochtransit_core::ingest::TravelTimeSample;
use stochtransit_core::math;
use stochtransit_core::sim::TripRecord;
use stochtransit_core::ssp::evaluate::{Query, ScheduledTrip};
use stochtransit_core::ssp::{PlanResult, Schedule};
use stochtransit_core::time::{self, SECONDS_PER_DAY};

use crate::config::{GaussianityConfig, OnlineConfig};
use crate::error::{Error, Result};
use crate::io::models::{Backend, EdgeEntry, ModelSet};
use crate::io::samples::edge_name;

/// Per-edge training data in departure order: `(hours, seconds)`.
pub fn training_data(samples: &[TravelTimeSample]) -> BTreeMap<EdgeKey, (Vec<f64>, Vec<f64>)> {
    let mut grouped: BTreeMap<EdgeKey, Vec<&TravelTimeSample>> = BTreeMap::new();
    for s in samples {
        grouped.entry(s.edge).or_default().push(s);
    }
    grouped
        .into_iter()
        .map(|(e, mut v)| {
            v.sort_by_key(|s| s.depart_ts);
            (e, (v.iter().map(|s| s.depart_hour).collect(), v.iter().map(|s| s.duration_s).collect()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFitSummary {
    pub tail: String,
    pub head: String,
    pub samples: usize,
    /// Batch fit outcome, or `streamed` for an online state.
    pub status: String,
    pub params: KernelParams,
    pub mean_s: f64,
    pub mll: Option<f64>,
    pub subsampled_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub backend: Backend,
    pub edges: Vec<EdgeFitSummary>,
    pub prior: NetworkPrior,
    pub warnings: Vec<String>,
}

struct Fitted {
    entry: EdgeEntry,
    /// Batch model used for the network prior.
    reference: Option<EdgeModel>,
    mll: Option<f64>,
    subsampled_out: usize,
}

fn edge_seed(seed: u64, e: EdgeKey) -> u64 {
    seed ^ ((e.tail.0 as u64) << 32 | e.head.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn fit_one(x: &[f64], y: &[f64], gp: &GpFitConfig, online: Option<&OnlineConfig>) -> Result<Fitted> {
    match online {
        None => {
            let out = batch::fit(x, y, gp)?;
            let ok = matches!(out.model.status(), FitStatus::Converged | FitStatus::MaxIterations);
            Ok(Fitted {
                entry: EdgeEntry::Batch(out.model.clone()),
                reference: ok.then_some(out.model),
                mll: out.mll.is_finite().then_some(out.mll),
                subsampled_out: out.subsampled_out,
            })
        }
        Some(o) => {
            let k = o.warm_start.max(gp.min_samples).min(x.len());
            let warm = batch::fit(&x[..k], &y[..k], gp)?;
            let mut s = SkiState::new(*warm.model.params(), o.ski())?;
            for (&xi, &yi) in x.iter().zip(y) {
                s.update(xi, yi)?;
            }
            let ok = matches!(warm.model.status(), FitStatus::Converged | FitStatus::MaxIterations);
            let mll = s.mll();
            Ok(Fitted {
                entry: EdgeEntry::Online(s),
                reference: ok.then_some(warm.model),
                mll: mll.is_finite().then_some(mll),
                subsampled_out: 0,
            })
        }
    }
}

/// Fits every ride edge of `g`. Edges with at least `gp.min_samples`
/// samples are fitted in parallel; sparser edges inherit the network prior
/// and edges without samples get the prior mean, each with a warning.
/// With `online` set, fitted edges are streamed into SKI states whose
/// hyperparameters come from a batch fit on the first samples.
pub fn fit_models(
    g: &TransitGraph,
    samples: &[TravelTimeSample],
    gp: &GpFitConfig,
    online: Option<&OnlineConfig>,
) -> Result<(ModelSet, FitSummary)> {
    gp.validate()?;
    if samples.is_empty() {
        return Err(stochtransit_core::Error::InsufficientData("no travel-time samples to fit".into()).into());
    }
    let data = training_data(samples);
    let edges: Vec<EdgeKey> = g.ride_edges().iter().map(|e| e.key()).collect();
    let empty = (Vec::new(), Vec::new());
    let get = |e: &EdgeKey| data.get(e).unwrap_or(&empty);

    let eligible: Vec<EdgeKey> = edges.iter().copied().filter(|e| get(e).0.len() >= gp.min_samples).collect();
    let fitted: Vec<(EdgeKey, Result<Fitted>)> = eligible
        .par_iter()
        .map(|&e| {
            let cfg = GpFitConfig { seed: edge_seed(gp.seed, e), ..gp.clone() };
            let (x, y) = get(&e);
            (e, fit_one(x, y, &cfg, online))
        })
        .collect();

    let mut warnings = Vec::new();
    let name = |e: EdgeKey| {
        let (t, h) = edge_name(g, e);
        format!("{t}->{h}")
    };
    let mut done: BTreeMap<EdgeKey, Fitted> = BTreeMap::new();
    for (e, r) in fitted {
        match r {
            Ok(f) => {
                if let EdgeEntry::Batch(m) = &f.entry {
                    if m.status() == FitStatus::Fallback {
                        warnings.push(format!("{}: every optimizer start failed, default hyperparameters", name(e)));
                    }
                }
                done.insert(e, f);
            }
            Err(err) => warnings.push(format!("{}: fit failed ({err}), using the network prior", name(e))),
        }
    }

    let refs: Vec<&EdgeModel> = done.values().filter_map(|f| f.reference.as_ref()).collect();
    let prior = match batch::network_prior(&refs) {
        Some(p) => p,
        None => {
            let y: Vec<f64> = samples.iter().map(|s| s.duration_s).collect();
            let var = math::population_variance(&y);
            let var = if var > 0.0 { var } else { 1.0 };
            warnings.push("no edge could be fitted; pooled defaults serve as the network prior".into());
            NetworkPrior { params: KernelParams::new(0.5 * var, 2.0, 0.5 * var)?, mean: math::mean(&y) }
        }
    };

    let mut out = BTreeMap::new();
    let mut summaries = Vec::with_capacity(edges.len());
    for e in edges {
        let (x, y) = get(&e);
        let (tail, head) = edge_name(g, e);
        let (entry, mll, subsampled_out) = match done.remove(&e) {
            Some(f) => (f.entry, f.mll, f.subsampled_out),
            None => {
                let m = batch::inherit(x, y, &prior)?;
                if x.is_empty() {
                    warnings.push(format!("{}: no samples, network prior hyperparameters and mean", name(e)));
                } else if x.len() < gp.min_samples {
                    warnings.push(format!(
                        "{}: {} samples (< {}), network prior hyperparameters",
                        name(e),
                        x.len(),
                        gp.min_samples
                    ));
                }
                (EdgeEntry::Batch(m), None, 0)
            }
        };
        let (status, params, mean_s) = match &entry {
            EdgeEntry::Batch(m) => (status_name(m.status()), *m.params(), m.mean()),
            EdgeEntry::Online(s) => ("streamed".to_string(), *s.params(), s.running_mean()),
        };
        summaries.push(EdgeFitSummary { tail, head, samples: x.len(), status, params, mean_s, mll, subsampled_out });
        out.insert(e, entry);
    }
    let backend = if online.is_some() { Backend::Online } else { Backend::Batch };
    Ok((ModelSet { backend, edges: out }, FitSummary { backend, edges: summaries, prior, warnings }))
}

fn status_name(s: FitStatus) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn eta_vectors(samples: &[TravelTimeSample]) -> BTreeMap<EdgeKey, EtaVector> {
    EtaCorrelations::from_samples(samples).vectors
}

/// Published timetable derived from realized trips: trips of a route are
/// grouped by their departure second of day, and each stop time is the
/// median over days.
pub fn schedule_from_records(g: &TransitGraph, records: &[TripRecord]) -> Result<Schedule> {
    let mut groups: BTreeMap<(String, i64), Vec<&TripRecord>> = BTreeMap::new();
    for r in records {
        let Some(&first) = r.arrivals.first() else { continue };
        let tod = (first - r.day as f64 * SECONDS_PER_DAY).round() as i64;
        groups.entry((r.route.clone(), tod)).or_default().push(r);
    }
    let mut trips = Vec::with_capacity(groups.len());
    for ((route_id, tod), rs) in groups {
        let route = g.route_ix(&route_id).ok_or_else(|| stochtransit_core::Error::unknown("route", route_id.clone()))?;
        let n = g.route(route).stops.len();
        if rs.iter().any(|r| r.arrivals.len() != n) {
            return Err(Error::input(format!("trip of route {route_id} does not match the route length")));
        }
        let times = (0..n)
            .map(|i| {
                let v: Vec<f64> = rs.iter().map(|r| r.arrivals[i] - r.day as f64 * SECONDS_PER_DAY).collect();
                Some(math::median(&v))
            })
            .collect();
        trips.push(ScheduledTrip { route, trip_id: format!("{route_id}-{tod}"), times });
    }
    Ok(Schedule { trips })
}

/// `count` queries between random pairs with at least one candidate path,
/// departing uniformly within `[from_h, to_h)` on a random day in `days`.
pub fn random_queries(
    g: &TransitGraph,
    count: usize,
    days: std::ops::RangeInclusive<i64>,
    from_h: f64,
    to_h: f64,
    seed: u64,
) -> Result<Vec<Query>> {
    let n = g.num_stops();
    let mut pairs = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let (s, t) = (StopIx(s as u32), StopIx(t as u32));
            if !enumerate_paths(g, s, t, EnumerateOptions::default())?.is_empty() {
                pairs.push((s, t));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::input("no stop pair is connected"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let (origin, destination) = pairs[rng.random_range(0..pairs.len())];
            let day = rng.random_range(days.clone());
            let h = rng.random_range(from_h..to_h);
            Query { origin, destination, tau0: time::day_start(day) + h * 3600.0 }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardingView {
    pub route: String,
    pub stop: String,
    pub bus_ts: f64,
    pub bus_std_s: f64,
    pub from_headway: bool,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub stops: Vec<String>,
    pub transfer: Option<String>,
    pub index: f64,
    pub index_normalized: f64,
    /// Door-to-door time from departure, waits included.
    pub mean_s: f64,
    pub std_s: f64,
    pub expected_arrival_ts: f64,
    pub travel_mean_s: f64,
    pub travel_std_s: f64,
    pub cross_cov: f64,
    pub wait_s: f64,
    pub feasibility: f64,
    pub boardings: Vec<BoardingView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanView {
    pub origin: String,
    pub destination: String,
    pub depart_ts: f64,
    pub depart_hour: f64,
    pub backend: Backend,
    pub selected: Option<usize>,
    pub reason: Option<String>,
    pub overlapping: bool,
    pub integration_nodes: usize,
    pub index_sum: f64,
    pub elapsed_ms: f64,
    pub candidates: Vec<CandidateView>,
}

impl PlanView {
    pub fn new(g: &TransitGraph, p: &PlanResult, backend: Backend, elapsed_ms: f64) -> Self {
        let id = |s: StopIx| g.stop(s).id.clone();
        let candidates = p
            .ranked
            .iter()
            .map(|r| {
                let mut stops = vec![id(r.candidate.origin())];
                stops.extend(r.candidate.transfer.map(id));
                stops.push(id(r.candidate.destination()));
                CandidateView {
                    stops,
                    transfer: r.candidate.transfer.map(id),
                    index: r.index,
                    index_normalized: r.index_normalized,
                    mean_s: r.total.mean,
                    std_s: r.total.std(),
                    expected_arrival_ts: p.tau0 + r.total.mean,
                    travel_mean_s: r.travel.mean,
                    travel_std_s: r.travel.std(),
                    cross_cov: r.travel.cross_cov,
                    wait_s: r.wait_s,
                    feasibility: r.feasibility,
                    boardings: r
                        .boardings
                        .iter()
                        .map(|b| BoardingView {
                            route: g.route(b.route).id.clone(),
                            stop: id(b.stop),
                            bus_ts: b.eta.t,
                            bus_std_s: b.eta.std,
                            from_headway: b.from_headway,
                            probability: b.probability,
                        })
                        .collect(),
                }
            })
            .collect();
        PlanView {
            origin: id(p.origin),
            destination: id(p.destination),
            depart_ts: p.tau0,
            depart_hour: time::hour_of_day(p.tau0),
            backend,
            selected: p.selected,
            reason: p.reason.clone(),
            overlapping: p.overlapping,
            integration_nodes: p.integration_nodes,
            index_sum: p.ranked.iter().map(|r| r.index).sum(),
            elapsed_ms,
            candidates,
        }
    }
}

/// Plot data for one (edge, hour) group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPlots {
    pub label: String,
    pub qq: Vec<(f64, f64)>,
    pub pp: Vec<(f64, f64)>,
    pub histogram: Vec<(f64, f64, usize)>,
}

/// Normality evidence per (edge, hour) group with at least
/// `cfg.min_samples` samples.
pub fn gaussianity_suite(
    g: &TransitGraph,
    samples: &[TravelTimeSample],
    cfg: &GaussianityConfig,
    seed: u64,
) -> Result<(RelativeKlReport, Vec<GroupPlots>)> {
    let mut groups: BTreeMap<(EdgeKey, usize), Vec<f64>> = BTreeMap::new();
    for s in samples {
        groups.entry((s.edge, time::hour_bin(s.depart_hour))).or_default().push(s.duration_s);
    }
    let mut sets = Vec::new();
    let mut plots = Vec::new();
    for ((e, h), v) in groups {
        if v.len() < cfg.min_samples {
            continue;
        }
        let Ok(z) = gaussianity::standardize(&v) else { continue };
        let (t, hd) = edge_name(g, e);
        let label = format!("{t}->{hd}@{h:02}");
        let bins = gaussianity::kl_bins(z.len());
        let (lo, hi) = z.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        plots.push(GroupPlots {
            label: label.clone(),
            qq: gaussianity::qq_points(&z),
            pp: gaussianity::pp_points(&z),
            histogram: gaussianity::histogram(&z.values, bins, lo, hi),
        });
        sets.push((label, v));
    }
    if sets.is_empty() {
        return Err(stochtransit_core::Error::InsufficientData(format!(
            "no (edge, hour) group has {} non-constant samples",
            cfg.min_samples
        ))
        .into());
    }
    Ok((gaussianity::relative_kld_experiment(&sets, cfg.iterations, seed)?, plots))
}
