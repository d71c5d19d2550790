//! From raw GPS pings to per-edge travel-time samples.
//!
//! Pings are deduplicated, grouped into trips per vehicle, and each stop's
//! arrival is taken as the ping closest to it. Stops whose closest ping is
//! farther than the approach limit are left unresolved, and a sample is
//! produced for every ride edge whose two endpoint arrivals resolved. The
//! duration is arrival-to-arrival, so time spent standing at the upstream
//! stop is part of the edge.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKey, RouteIx, Stop, TransitGraph};
use crate::time;

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsPing {
    pub vid: String,
    pub rid: String,
    /// Epoch seconds.
    pub ts: i64,
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

impl GpsPing {
    pub fn validate(&self) -> Result<()> {
        if self.ts <= 0 {
            return Err(Error::invalid("ping timestamp must be positive"));
        }
        if !((-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)) {
            return Err(Error::invalid("ping coordinates out of range"));
        }
        Ok(())
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Arrivals whose closest ping is farther than this are discarded.
    pub max_approach_m: f64,
    /// A vehicle gap longer than this starts a new trip.
    pub trip_gap_s: i64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { max_approach_m: 100.0, trip_gap_s: 900 }
    }
}

/// Pings of one vehicle on one run of one route, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub vid: String,
    pub rid: String,
    pub pings: Vec<GpsPing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub ts: i64,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeSample {
    pub edge: EdgeKey,
    pub duration_s: f64,
    /// Epoch seconds of the upstream arrival.
    pub depart_ts: i64,
    /// Time of day of the upstream arrival, `[0, 24)`.
    pub depart_hour: f64,
    /// Day index (days since the epoch) of the upstream arrival.
    pub day: i64,
    pub approach_tail_m: f64,
    pub approach_head_m: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestDiagnostics {
    pub pings: u64,
    pub invalid_pings: u64,
    pub duplicate_pings: u64,
    pub unknown_route_pings: u64,
    pub trips: u64,
    /// Stop visits looked up across all known-route trips.
    pub arrivals_attempted: u64,
    pub arrivals_resolved: u64,
    /// Closest ping farther than the approach limit.
    pub arrivals_too_far: u64,
    pub samples: u64,
    /// Pairs whose downstream arrival was not later than the upstream one.
    pub nonpositive_dropped: u64,
    /// Trips that produced at least one sample.
    pub trips_with_samples: u64,
    /// Mean closest-approach distance over resolved arrivals.
    pub mean_approach_m: f64,
}

impl IngestDiagnostics {
    /// Fraction of trips passing the approach filter for at least one edge.
    pub fn trip_coverage(&self) -> f64 {
        if self.trips == 0 {
            0.0
        } else {
            self.trips_with_samples as f64 / self.trips as f64
        }
    }

    pub fn arrival_coverage(&self) -> f64 {
        if self.arrivals_attempted == 0 {
            0.0
        } else {
            self.arrivals_resolved as f64 / self.arrivals_attempted as f64
        }
    }
}

/// Drops invalid pings and repeated `(vid, ts)` pairs (first one wins),
/// then sorts by vehicle and time.
pub fn dedupe_and_sort(pings: Vec<GpsPing>, diag: &mut IngestDiagnostics) -> Vec<GpsPing> {
    diag.pings += pings.len() as u64;
    let mut seen: BTreeMap<(String, i64), GpsPing> = BTreeMap::new();
    for p in pings {
        if p.validate().is_err() {
            diag.invalid_pings += 1;
            continue;
        }
        let key = (p.vid.clone(), p.ts);
        if seen.contains_key(&key) {
            diag.duplicate_pings += 1;
        } else {
            seen.insert(key, p);
        }
    }
    seen.into_values().collect()
}

/// Splits vehicle-sorted pings into trips at route changes and at gaps
/// longer than `gap_s`.
pub fn segment_trips(sorted: Vec<GpsPing>, gap_s: i64) -> Vec<Trip> {
    let mut trips: Vec<Trip> = Vec::new();
    for p in sorted {
        let split = match trips.last() {
            Some(t) => {
                let last = t.pings.last().expect("trips are never empty");
                t.vid != p.vid || t.rid != p.rid || p.ts - last.ts > gap_s
            }
            None => true,
        };
        if split {
            trips.push(Trip { vid: p.vid.clone(), rid: p.rid.clone(), pings: Vec::new() });
        }
        trips.last_mut().expect("just pushed").pings.push(p);
    }
    trips
}

/// Time of the ping closest to `stop`, if within `max_m` meters.
///
/// Ties go to the earliest ping.
pub fn estimate_arrival_time(pings: &[GpsPing], stop: &Stop, max_m: f64) -> Option<Arrival> {
    let mut best: Option<Arrival> = None;
    for p in pings {
        let d = haversine_m(p.lat, p.lon, stop.lat, stop.lon);
        let better = match best {
            None => true,
            Some(b) => d < b.distance_m || (d == b.distance_m && p.ts < b.ts),
        };
        if better {
            best = Some(Arrival { ts: p.ts, distance_m: d });
        }
    }
    best.filter(|b| b.distance_m <= max_m)
}

/// Samples from one trip on route `route`, for every ride edge of the
/// route (or only those accepted by `keep`).
pub fn trip_samples(
    g: &TransitGraph,
    route: RouteIx,
    trip: &Trip,
    cfg: &IngestConfig,
    keep: &dyn Fn(EdgeKey) -> bool,
    diag: &mut IngestDiagnostics,
) -> Vec<TravelTimeSample> {
    let stops = &g.route(route).stops;
    let arrivals: Vec<Option<Arrival>> = stops
        .iter()
        .map(|&s| {
            diag.arrivals_attempted += 1;
            let a = estimate_arrival_time(&trip.pings, g.stop(s), cfg.max_approach_m);
            match a {
                Some(a) => {
                    diag.arrivals_resolved += 1;
                    diag.mean_approach_m += a.distance_m;
                }
                None => diag.arrivals_too_far += 1,
            }
            a
        })
        .collect();

    let mut out = Vec::new();
    for i in 0..stops.len() {
        let Some(a) = arrivals[i] else { continue };
        for j in i + 1..stops.len() {
            let Some(b) = arrivals[j] else { continue };
            let edge = EdgeKey::new(stops[i], stops[j]);
            if stops[i] == stops[j] || !keep(edge) {
                continue;
            }
            let duration = (b.ts - a.ts) as f64;
            if duration <= 0.0 {
                diag.nonpositive_dropped += 1;
                continue;
            }
            out.push(TravelTimeSample {
                edge,
                duration_s: duration,
                depart_ts: a.ts,
                depart_hour: time::hour_of_day(a.ts as f64),
                day: time::day_index(a.ts as f64),
                approach_tail_m: a.distance_m,
                approach_head_m: b.distance_m,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub samples: Vec<TravelTimeSample>,
    pub diagnostics: IngestDiagnostics,
}

/// Full pipeline from raw pings to samples, sorted by
/// `(edge, depart_ts)`.
pub fn extract_travel_times(
    pings: Vec<GpsPing>,
    g: &TransitGraph,
    cfg: &IngestConfig,
    keep: &dyn Fn(EdgeKey) -> bool,
) -> Extraction {
    let mut diag = IngestDiagnostics::default();
    let sorted = dedupe_and_sort(pings, &mut diag);
    let trips = segment_trips(sorted, cfg.trip_gap_s);
    let mut samples = Vec::new();
    for trip in &trips {
        let Some(route) = g.route_ix(&trip.rid) else {
            diag.unknown_route_pings += trip.pings.len() as u64;
            continue;
        };
        diag.trips += 1;
        let s = trip_samples(g, route, trip, cfg, keep, &mut diag);
        if !s.is_empty() {
            diag.trips_with_samples += 1;
        }
        samples.extend(s);
    }
    finish(&mut samples, &mut diag);
    Extraction { samples, diagnostics: diag }
}

/// Sorts samples deterministically and finalizes the mean approach.
pub fn finish(samples: &mut [TravelTimeSample], diag: &mut IngestDiagnostics) {
    samples.sort_by(|a, b| (a.edge, a.depart_ts).cmp(&(b.edge, b.depart_ts)));
    diag.samples = samples.len() as u64;
    if diag.arrivals_resolved > 0 {
        diag.mean_approach_m /= diag.arrivals_resolved as f64;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinnedSample {
    pub duration_s: f64,
    pub day: i64,
}

/// Durations of one edge grouped by the hour of departure.
pub fn hourly_samples(samples: &[TravelTimeSample], edge: EdgeKey) -> [Vec<BinnedSample>; 24] {
    let mut bins: [Vec<BinnedSample>; 24] = Default::default();
    for s in samples.iter().filter(|s| s.edge == edge) {
        bins[time::hour_bin(s.depart_hour)].push(BinnedSample { duration_s: s.duration_s, day: s.day });
    }
    bins
}

/// Samples grouped per edge, preserving order.
pub fn by_edge(samples: &[TravelTimeSample]) -> BTreeMap<EdgeKey, Vec<&TravelTimeSample>> {
    let mut m: BTreeMap<EdgeKey, Vec<&TravelTimeSample>> = BTreeMap::new();
    for s in samples {
        m.entry(s.edge).or_default().push(s);
    }
    m
}
