//! Synthetic GPS feeds from known travel-time laws.
//!
//! Every segment (consecutive stop pair) carries a ground-truth law: a
//! piecewise-linear mean and standard deviation over the day and optional
//! per-hour correlations with other segments. A trip draws correlated
//! standard normals for its segments, then walks the route: at each stop the
//! bus stands still for `dwell_s`, then moves in a straight line to the next
//! stop so that the arrival-to-arrival time equals the drawn duration.
//! Vehicles ping every `ping_period_s` with a random phase, optional drops
//! and optional position noise.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKey, RouteDef, Stop, StopIx, TransitGraph};
use crate::ingest::GpsPing;
use crate::time::{self, SECONDS_PER_DAY, SECONDS_PER_HOUR};

/// Lower bound applied to drawn durations.
pub const MIN_DURATION_S: f64 = 30.0;

/// Piecewise-linear function of the hour of day, constant beyond its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile(pub Vec<(f64, f64)>);

impl Profile {
    pub fn constant(v: f64) -> Self {
        Profile(alloc::vec![(0.0, v)])
    }

    /// `base` with triangular peaks of height `extra` at 8:00 and 18:00,
    /// each two hours wide at the base on either side.
    pub fn rush_hour(base: f64, extra: f64) -> Self {
        Profile(alloc::vec![
            (0.0, base),
            (6.0, base),
            (8.0, base + extra),
            (10.0, base),
            (16.0, base),
            (18.0, base + extra),
            (20.0, base),
            (24.0, base),
        ])
    }

    pub fn eval(&self, hour: f64) -> f64 {
        let k = &self.0;
        if hour <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if hour <= x1 {
                return if x1 > x0 { y0 + (y1 - y0) * (hour - x0) / (x1 - x0) } else { y1 };
            }
        }
        k[k.len() - 1].1
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::config(format!("{what} profile has no knots")));
        }
        if self.0.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::config(format!("{what} profile knots must be sorted by hour")));
        }
        if self.0.iter().any(|(h, v)| !h.is_finite() || !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::config(format!("{what} profile values must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCorrelation {
    pub other: EdgeKey,
    /// One coefficient for every hour, or 24 hourly coefficients.
    pub by_hour: Vec<f64>,
}

impl EdgeCorrelation {
    pub fn at(&self, hour: f64) -> f64 {
        if self.by_hour.len() == 1 {
            self.by_hour[0]
        } else {
            self.by_hour[time::hour_bin(hour)]
        }
    }
}

/// Ground-truth travel-time law of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEdgeLaw {
    pub edge: EdgeKey,
    pub mean_s: Profile,
    pub std_s: Profile,
    #[serde(default)]
    pub correlations: Vec<EdgeCorrelation>,
}

impl GroundTruthEdgeLaw {
    pub fn new(edge: EdgeKey, mean_s: Profile, std_s: Profile) -> Self {
        GroundTruthEdgeLaw { edge, mean_s, std_s, correlations: Vec::new() }
    }

    pub fn with_correlation(mut self, other: EdgeKey, by_hour: Vec<f64>) -> Self {
        self.correlations.push(EdgeCorrelation { other, by_hour });
        self
    }

    fn validate(&self) -> Result<()> {
        self.mean_s.validate("mean")?;
        self.std_s.validate("std")?;
        for c in &self.correlations {
            if !(c.by_hour.len() == 1 || c.by_hour.len() == 24) {
                return Err(Error::config("correlation needs 1 or 24 coefficients"));
            }
            if c.by_hour.iter().any(|r| !(-1.0..=1.0).contains(r)) {
                return Err(Error::config("correlation coefficients must lie in [-1, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub ping_period_s: f64,
    pub drop_prob: f64,
    pub position_noise_m: f64,
    pub trips_per_route_per_day: usize,
    pub days: usize,
    pub seed: u64,
    /// Day index (days since the epoch) of the first simulated day.
    pub start_day: i64,
    /// Trips depart evenly over `[service_start_h, service_end_h)`.
    pub service_start_h: f64,
    pub service_end_h: f64,
    /// Explicit departure hours per route id, overriding the even spread.
    #[serde(default)]
    pub departures_h: BTreeMap<String, Vec<f64>>,
    /// Time a bus stands at each stop; part of the following edge's time.
    pub dwell_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ping_period_s: 10.0,
            drop_prob: 0.0,
            position_noise_m: 0.0,
            trips_per_route_per_day: 16,
            days: 30,
            seed: 0,
            start_day: 19_000,
            service_start_h: 6.0,
            service_end_h: 22.0,
            departures_h: BTreeMap::new(),
            dwell_s: 20.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ping_period_s > 0.0) {
            return Err(Error::config("ping period must be positive"));
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::config("drop probability must lie in [0, 1]"));
        }
        if !(self.position_noise_m >= 0.0) {
            return Err(Error::config("position noise must be non-negative"));
        }
        if !(self.dwell_s >= 0.0 && self.dwell_s < MIN_DURATION_S) {
            return Err(Error::config(format!("dwell must lie in [0, {MIN_DURATION_S}) seconds")));
        }
        if !(0.0 <= self.service_start_h && self.service_start_h < self.service_end_h && self.service_end_h <= 24.0) {
            return Err(Error::config("service window must satisfy 0 <= start < end <= 24"));
        }
        if self.start_day < 1 {
            return Err(Error::config("start_day must be positive"));
        }
        Ok(())
    }

    fn departures(&self, route: &str) -> Vec<f64> {
        if let Some(d) = self.departures_h.get(route) {
            return d.clone();
        }
        let n = self.trips_per_route_per_day;
        let span = self.service_end_h - self.service_start_h;
        (0..n).map(|k| self.service_start_h + span * k as f64 / n as f64).collect()
    }
}

/// What actually happened on one simulated trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub vid: String,
    pub route: String,
    pub day: i64,
    /// True epoch-second arrival at each stop of the route.
    pub arrivals: Vec<f64>,
}

impl TripRecord {
    /// Arrival-to-arrival time between route positions `i < j`.
    pub fn duration(&self, i: usize, j: usize) -> f64 {
        self.arrivals[j] - self.arrivals[i]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOutput {
    /// Sorted by `(ts, vid)`.
    pub pings: Vec<GpsPing>,
    pub trips: Vec<TripRecord>,
}

/// Correlation matrix for the given segments at `hour`, projected onto the
/// PSD cone (eigenvalues floored at 0, unit diagonal restored).
pub fn correlation_matrix(laws: &BTreeMap<EdgeKey, &GroundTruthEdgeLaw>, edges: &[EdgeKey], hour: f64) -> DMatrix<f64> {
    let k = edges.len();
    let lookup = |a: EdgeKey, b: EdgeKey| -> Option<f64> {
        laws.get(&a).and_then(|l| l.correlations.iter().find(|c| c.other == b)).map(|c| c.at(hour))
    };
    let mut c = DMatrix::identity(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let (a, b) = (edges[i], edges[j]);
            let r = if a == b { Some(1.0) } else { lookup(a, b).or_else(|| lookup(b, a)) };
            let r = r.unwrap_or(0.0);
            c[(i, j)] = r;
            c[(j, i)] = r;
        }
    }
    project_correlation(c)
}

/// Nearest-ish correlation matrix by eigenvalue flooring and rescaling.
pub fn project_correlation(c: DMatrix<f64>) -> DMatrix<f64> {
    let k = c.nrows();
    let eig = SymmetricEigen::new(c.clone());
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return c;
    }
    let mut d = DMatrix::zeros(k, k);
    for i in 0..k {
        d[(i, i)] = eig.eigenvalues[i].max(0.0);
    }
    let p = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    DMatrix::from_fn(k, k, |i, j| {
        let s = (p[(i, i)] * p[(j, j)]).sqrt();
        if i == j {
            1.0
        } else if s > 0.0 {
            p[(i, j)] / s
        } else {
            0.0
        }
    })
}

/// Lower factor `L` with `L Lᵀ = C` for a PSD `C` (zero columns where
/// `C` is singular).
fn psd_factor(c: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = c.clone().cholesky() {
        return ch.unpack();
    }
    let eig = SymmetricEigen::new(c.clone());
    let k = c.nrows();
    DMatrix::from_fn(k, k, |i, j| eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt())
}

fn meters_to_degrees(lat: f64, north_m: f64, east_m: f64) -> (f64, f64) {
    let dlat = north_m / 111_195.0;
    let dlon = east_m / (111_195.0 * lat.to_radians().cos().max(1e-6));
    (dlat, dlon)
}

/// Position at time `t` given the stop sequence and true arrivals.
fn position(stops: &[&Stop], arrivals: &[f64], dwell: f64, t: f64) -> (f64, f64) {
    let last = stops.len() - 1;
    for i in 0..last {
        let leave = arrivals[i] + dwell;
        if t < leave {
            return (stops[i].lat, stops[i].lon);
        }
        if t < arrivals[i + 1] {
            let f = (t - leave) / (arrivals[i + 1] - leave);
            let (a, b) = (stops[i], stops[i + 1]);
            return (a.lat + f * (b.lat - a.lat), a.lon + f * (b.lon - a.lon));
        }
    }
    (stops[last].lat, stops[last].lon)
}

/// Simulates every route of `g` for `cfg.days` days.
///
/// `laws` must cover every segment of the graph. Identical inputs give
/// identical output.
pub fn simulate_feed(g: &TransitGraph, laws: &[GroundTruthEdgeLaw], cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let mut by_edge: BTreeMap<EdgeKey, &GroundTruthEdgeLaw> = BTreeMap::new();
    for l in laws {
        l.validate()?;
        if by_edge.insert(l.edge, l).is_some() {
            return Err(Error::config(format!("duplicate law for edge {}", l.edge)));
        }
    }
    for e in g.segments() {
        if !by_edge.contains_key(&e.key()) {
            return Err(Error::config(format!(
                "no ground-truth law for segment {} -> {}",
                g.stop(e.tail).id,
                g.stop(e.head).id
            )));
        }
    }

    let mut out = SimOutput::default();
    for d in 0..cfg.days {
        let day = cfg.start_day + d as i64;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (day as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for route in g.routes() {
            let segs: Vec<EdgeKey> = route.stops.windows(2).map(|w| EdgeKey::new(w[0], w[1])).collect();
            let stops: Vec<&Stop> = route.stops.iter().map(|&s| g.stop(s)).collect();
            for (k, dep_h) in cfg.departures(&route.id).into_iter().enumerate() {
                let vid = format!("{}-{}", route.id, k);
                let t0 = day as f64 * SECONDS_PER_DAY + dep_h * SECONDS_PER_HOUR;

                let c = correlation_matrix(&by_edge, &segs, dep_h);
                let lf = psd_factor(&c);
                let z0: Vec<f64> = (0..segs.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut arrivals = Vec::with_capacity(stops.len());
                arrivals.push(t0);
                for (i, e) in segs.iter().enumerate() {
                    let z: f64 = (0..=i).map(|j| lf[(i, j)] * z0[j]).sum();
                    let t = arrivals[i];
                    let law = by_edge[e];
                    let h = time::hour_of_day(t);
                    let dur = (law.mean_s.eval(h) + law.std_s.eval(h) * z).max(MIN_DURATION_S);
                    arrivals.push(t + dur);
                }

                let end = arrivals[arrivals.len() - 1] + cfg.dwell_s;
                let phase = rng.random::<f64>() * cfg.ping_period_s;
                let mut t = t0 + phase;
                while t <= end {
                    let ts = t.round();
                    let keep = cfg.drop_prob == 0.0 || rng.random::<f64>() >= cfg.drop_prob;
                    if keep {
                        let (mut lat, mut lon) = position(&stops, &arrivals, cfg.dwell_s, ts);
                        if cfg.position_noise_m > 0.0 {
                            let n: f64 = StandardNormal.sample(&mut rng);
                            let e: f64 = StandardNormal.sample(&mut rng);
                            let (dlat, dlon) = meters_to_degrees(lat, n * cfg.position_noise_m, e * cfg.position_noise_m);
                            lat += dlat;
                            lon += dlon;
                        }
                        out.pings.push(GpsPing { vid: vid.clone(), rid: route.id.clone(), ts: ts as i64, lat, lon, speed: None });
                    }
                    t += cfg.ping_period_s;
                }
                out.trips.push(TripRecord { vid, route: route.id.clone(), day, arrivals });
            }
        }
    }
    out.pings.sort_by(|a, b| (a.ts, &a.vid).cmp(&(b.ts, &b.vid)));
    Ok(out)
}

/// Stops laid out on a jittered grid around `(lat0, lon0)` with roughly
/// `spacing_m` between neighbours, ids `s0`, `s1`, ...
pub fn grid_stops(n: usize, lat0: f64, lon0: f64, spacing_m: f64, seed: u64) -> Vec<Stop> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt().ceil().max(1.0) as usize;
    (0..n)
        .map(|i| {
            let (r, c) = (i / side, i % side);
            let jn = (rng.random::<f64>() - 0.5) * 0.3 * spacing_m;
            let je = (rng.random::<f64>() - 0.5) * 0.3 * spacing_m;
            let (dlat, dlon) = meters_to_degrees(lat0, r as f64 * spacing_m + jn, c as f64 * spacing_m + je);
            Stop { id: format!("s{i}"), name: String::new(), lat: lat0 + dlat, lon: lon0 + dlon }
        })
        .collect()
}

/// Random network: `routes` routes, each a random simple stop sequence of
/// `min_len..=max_len` stops drawn from `stops` grid stops.
pub fn random_network(stops: usize, routes: usize, min_len: usize, max_len: usize, seed: u64) -> Result<TransitGraph> {
    if stops < 2 || min_len < 2 || max_len < min_len || max_len > stops {
        return Err(Error::config("need 2 <= min_len <= max_len <= stops"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = grid_stops(stops, 28.6, 77.2, 800.0, seed.wrapping_add(1));
    let defs: Vec<RouteDef> = (0..routes)
        .map(|r| {
            let len = rng.random_range(min_len..=max_len);
            let mut pool: Vec<usize> = (0..stops).collect();
            let mut seq = Vec::with_capacity(len);
            for _ in 0..len {
                let i = rng.random_range(0..pool.len());
                seq.push(all[pool.swap_remove(i)].id.clone());
            }
            RouteDef { id: format!("r{r}"), stops: seq }
        })
        .collect();
    TransitGraph::build(all, &defs)
}

/// Laws with rush-hour means proportional to straight-line distance.
pub fn default_laws(g: &TransitGraph, speed_mps: f64, rush_extra: f64, cv: f64) -> Vec<GroundTruthEdgeLaw> {
    g.segments()
        .iter()
        .map(|e| {
            let (a, b) = (g.stop(e.tail), g.stop(e.head));
            let d = crate::ingest::haversine_m(a.lat, a.lon, b.lat, b.lon);
            let base = (d / speed_mps).max(2.0 * MIN_DURATION_S);
            GroundTruthEdgeLaw::new(e.key(), Profile::rush_hour(base, rush_extra * base), Profile::constant(cv * base))
        })
        .collect()
}

/// Position of `s` on route `route`, if served.
pub fn route_position(g: &TransitGraph, route: &str, s: StopIx) -> Option<usize> {
    g.route_ix(route).and_then(|r| g.route(r).stops.iter().position(|&x| x == s))
}
