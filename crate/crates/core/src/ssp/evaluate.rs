//! Replaying plans against what the buses actually did.
//!
//! The static planner picks, among the same candidates, the path that
//! arrives first according to the published schedule. The stochastic
//! planner picks by optimality index. Both choices are then ridden on the
//! realized timetable: the rider boards the first bus of a serving route
//! that reaches the stop at or after them, and the door-to-door time
//! includes every wait.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::plan::{ranked_paths, EtaFeed, PlannerConfig};
use crate::corr::CovarianceSource;
use crate::error::{Error, Result};
use crate::gp::ModelSource;
use crate::graph::{enumerate_paths, EnumerateOptions, PathCandidate, RouteIx, StopIx, TransitGraph};
use crate::sim::TripRecord;
use crate::time::{self, SECONDS_PER_DAY};

/// One run of a route with its stop times (epoch seconds) per route
/// position, `None` where unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedTrip {
    pub route: RouteIx,
    pub times: Vec<Option<f64>>,
}

/// A set of timed trips with lookup by route.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timetable {
    by_route: BTreeMap<RouteIx, Vec<TimedTrip>>,
}

impl Timetable {
    pub fn new(trips: Vec<TimedTrip>) -> Self {
        let mut by_route: BTreeMap<RouteIx, Vec<TimedTrip>> = BTreeMap::new();
        for t in trips {
            by_route.entry(t.route).or_default().push(t);
        }
        Timetable { by_route }
    }

    /// Realized timetable from simulated trips.
    pub fn from_records(g: &TransitGraph, records: &[TripRecord]) -> Result<Self> {
        let mut trips = Vec::with_capacity(records.len());
        for r in records {
            let route = g.route_ix(&r.route).ok_or_else(|| Error::unknown("route", r.route.clone()))?;
            if r.arrivals.len() != g.route(route).stops.len() {
                return Err(Error::invalid("trip record length does not match its route"));
            }
            trips.push(TimedTrip { route, times: r.arrivals.iter().map(|&t| Some(t)).collect() });
        }
        Ok(Self::new(trips))
    }

    pub fn len(&self) -> usize {
        self.by_route.values().map(|v| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Earliest ride from `from` to `to` on one of `routes` boarding at or
    /// after `after`: `(boarding time, arrival time)`.
    pub fn next_ride(&self, g: &TransitGraph, routes: &[RouteIx], from: StopIx, to: StopIx, after: f64) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for &r in routes {
            let stops = &g.route(r).stops;
            let Some(i) = stops.iter().position(|&s| s == from) else { continue };
            let Some(j) = stops[i + 1..].iter().position(|&s| s == to).map(|k| k + i + 1) else { continue };
            for trip in self.by_route.get(&r).into_iter().flatten() {
                let (Some(a), Some(b)) = (trip.times[i], trip.times[j]) else { continue };
                if a >= after && b > a && best.is_none_or(|(ba, _)| a < ba) {
                    best = Some((a, b));
                }
            }
        }
        best
    }

    /// Arrival at the destination riding `path` from `start`.
    pub fn ride(&self, g: &TransitGraph, path: &PathCandidate, start: f64) -> Option<f64> {
        let mut t = start;
        for leg in &path.legs {
            let routes = &g.ride_edge(*leg)?.routes;
            t = self.next_ride(g, routes, leg.tail, leg.head, t)?.1;
        }
        Some(t)
    }
}

/// Published daily schedule: stop times in seconds after midnight.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub trips: Vec<ScheduledTrip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTrip {
    pub route: RouteIx,
    pub trip_id: String,
    /// Seconds after midnight per route position.
    pub times: Vec<Option<f64>>,
}

impl Schedule {
    /// The schedule repeated on each day index in `days`.
    pub fn expand(&self, days: core::ops::RangeInclusive<i64>) -> Timetable {
        let mut out = Vec::new();
        for d in days {
            let base = d as f64 * SECONDS_PER_DAY;
            for t in &self.trips {
                out.push(TimedTrip { route: t.route, times: t.times.iter().map(|x| x.map(|s| base + s)).collect() });
            }
        }
        Timetable::new(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub origin: StopIx,
    pub destination: StopIx,
    /// Epoch seconds.
    pub tau0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query: Query,
    pub stochastic_path: PathCandidate,
    pub static_path: PathCandidate,
    pub stochastic_s: f64,
    pub static_s: f64,
    /// `static - stochastic`; positive when the stochastic choice was faster.
    pub savings_s: f64,
}

/// Mean optimality index of one candidate in one hour bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodPoint {
    pub origin: StopIx,
    pub destination: StopIx,
    pub candidate: PathCandidate,
    pub hour: usize,
    pub index: f64,
    pub queries: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub outcomes: Vec<QueryOutcome>,
    /// Queries without a plan or without realized rides.
    pub skipped: usize,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub mean_savings_s: f64,
    /// Mean of `savings / static time`.
    pub mean_relative_savings: f64,
    pub curves: Vec<LikelihoodPoint>,
}

impl EvaluationReport {
    /// Fraction of evaluated queries where the stochastic choice was
    /// strictly faster.
    pub fn win_fraction(&self) -> f64 {
        if self.outcomes.is_empty() {
            0.0
        } else {
            self.wins as f64 / self.outcomes.len() as f64
        }
    }
}

/// Candidate that arrives first on the schedule; ties keep enumeration
/// order.
pub fn static_choice(g: &TransitGraph, scheduled: &Timetable, cands: &[PathCandidate], tau0: f64) -> Option<PathCandidate> {
    let mut best: Option<(f64, &PathCandidate)> = None;
    for c in cands {
        if let Some(a) = scheduled.ride(g, c, tau0) {
            if best.is_none_or(|(b, _)| a < b) {
                best = Some((a, c));
            }
        }
    }
    best.map(|(_, c)| c.clone())
}

/// Compares the two planners on every query.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_static_vs_stochastic(
    g: &TransitGraph,
    models: &dyn ModelSource,
    corr: &dyn CovarianceSource,
    eta: &EtaFeed,
    cfg: &PlannerConfig,
    schedule: &Schedule,
    realized: &Timetable,
    queries: &[Query],
) -> Result<EvaluationReport> {
    cfg.validate()?;
    let mut report = EvaluationReport::default();
    let mut curve_acc: BTreeMap<(StopIx, StopIx, PathCandidate, usize), (f64, usize)> = BTreeMap::new();
    let opts = EnumerateOptions { hub_transfers_only: cfg.hub_transfers_only };
    for q in queries {
        let plan = ranked_paths(g, q.origin, q.destination, q.tau0, models, corr, eta, cfg)?;
        let hour = time::hour_bin(time::hour_of_day(q.tau0));
        for r in &plan.ranked {
            let e = curve_acc.entry((q.origin, q.destination, r.candidate.clone(), hour)).or_insert((0.0, 0));
            e.0 += r.index_normalized;
            e.1 += 1;
        }
        let day = time::day_index(q.tau0);
        let scheduled = schedule.expand(day..=day + 1);
        let cands = enumerate_paths(g, q.origin, q.destination, opts)?;
        let (Some(best), Some(stat)) = (plan.best(), static_choice(g, &scheduled, &cands, q.tau0)) else {
            report.skipped += 1;
            continue;
        };
        let (Some(a), Some(b)) = (realized.ride(g, &best.candidate, q.tau0), realized.ride(g, &stat, q.tau0)) else {
            report.skipped += 1;
            continue;
        };
        let (stochastic_s, static_s) = (a - q.tau0, b - q.tau0);
        let savings_s = static_s - stochastic_s;
        if savings_s > 0.0 {
            report.wins += 1;
        } else if savings_s < 0.0 {
            report.losses += 1;
        } else {
            report.ties += 1;
        }
        report.outcomes.push(QueryOutcome {
            query: *q,
            stochastic_path: best.candidate.clone(),
            static_path: stat,
            stochastic_s,
            static_s,
            savings_s,
        });
    }
    let n = report.outcomes.len() as f64;
    if n > 0.0 {
        report.mean_savings_s = report.outcomes.iter().map(|o| o.savings_s).sum::<f64>() / n;
        report.mean_relative_savings = report.outcomes.iter().map(|o| o.savings_s / o.static_s).sum::<f64>() / n;
    }
    report.curves = curve_acc
        .into_iter()
        .map(|((origin, destination, candidate, hour), (sum, k))| LikelihoodPoint {
            origin,
            destination,
            candidate,
            hour,
            index: sum / k as f64,
            queries: k,
        })
        .collect();
    Ok(report)
}

/// Per-candidate hourly curves for one origin-destination pair, keyed by
/// the transfer stop (`None` for the direct ride).
pub fn curves_for(
    report: &EvaluationReport,
    origin: StopIx,
    destination: StopIx,
) -> BTreeMap<Option<StopIx>, [Option<f64>; 24]> {
    let mut out: BTreeMap<Option<StopIx>, [Option<f64>; 24]> = BTreeMap::new();
    for p in report.curves.iter().filter(|p| p.origin == origin && p.destination == destination) {
        out.entry(p.candidate.transfer).or_insert([None; 24])[p.hour] = Some(p.index);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::example_network;
    use crate::graph::EdgeKey;

    #[test]
    fn rides_board_the_first_bus_after_arrival() {
        let g = example_network();
        let blue = g.route_ix("blue").unwrap();
        let red = g.route_ix("red").unwrap();
        let tt = Timetable::new(alloc::vec![
            TimedTrip { route: blue, times: alloc::vec![Some(100.0), Some(200.0), Some(300.0), Some(400.0)] },
            TimedTrip { route: blue, times: alloc::vec![Some(50.0), Some(150.0), None, Some(350.0)] },
            TimedTrip { route: red, times: alloc::vec![Some(210.0), Some(260.0)] },
        ]);
        let (vs, v1, vt) = (g.stop_ix("vs").unwrap(), g.stop_ix("v1").unwrap(), g.stop_ix("vt").unwrap());
        assert_eq!(tt.next_ride(&g, &[blue], vs, vt, 60.0), Some((100.0, 400.0)));
        assert_eq!(tt.next_ride(&g, &[blue], vs, vt, 0.0), Some((50.0, 350.0)));
        let via = PathCandidate::via(EdgeKey::new(vs, v1), EdgeKey::new(v1, vt));
        // the blue bus reaches v1 first, even though red would arrive sooner
        assert_eq!(tt.ride(&g, &via, 60.0), Some(400.0));
        assert_eq!(tt.ride(&g, &via, 120.0), None);
    }

    #[test]
    fn schedule_expands_per_day() {
        let s = Schedule {
            trips: alloc::vec![ScheduledTrip { route: RouteIx(0), trip_id: "t".into(), times: alloc::vec![Some(3600.0), None] }],
        };
        let tt = s.expand(2..=3);
        assert_eq!(tt.len(), 2);
        assert_eq!(tt.by_route[&RouteIx(0)][1].times[0], Some(3.0 * 86_400.0 + 3600.0));
    }
}
