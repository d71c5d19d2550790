//! A small synthetic city whose best transfer point changes with the hour.
//!
//! Riders go from `s` to `t` through hub `ha` or hub `hb`. Both legs via
//! `ha` are fast at night and congested from early morning to evening;
//! the legs via `hb` take the same time all day. Feeder routes into each
//! hub make both of them transfer points. The published timetable assumes
//! free flow, so a planner reading only the timetable always goes via `ha`.

use std::collections::BTreeMap;

use stochtransit_core::graph::{EdgeKey, RouteDef, Stop, StopIx, TransitGraph};
use stochtransit_core::sim::{GroundTruthEdgeLaw, Profile, SimConfig};
use stochtransit_core::ssp::evaluate::ScheduledTrip;
use stochtransit_core::ssp::Schedule;

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct World {
    pub graph: TransitGraph,
    pub laws: Vec<GroundTruthEdgeLaw>,
    pub origin: StopIx,
    pub destination: StopIx,
    /// The hub that is faster only off-peak, and the steady one.
    pub peaky_hub: StopIx,
    pub steady_hub: StopIx,
}

/// `quiet` before `ramp_up.0` and after `ramp_down.1`, `busy` between
/// `ramp_up.1` and `ramp_down.0`, linear in between.
fn plateau(quiet: f64, busy: f64, ramp_up: (f64, f64), ramp_down: (f64, f64)) -> Profile {
    Profile(vec![(0.0, quiet), (ramp_up.0, quiet), (ramp_up.1, busy), (ramp_down.0, busy), (ramp_down.1, quiet), (24.0, quiet)])
}

fn stop(id: &str, north_m: f64, east_m: f64) -> Stop {
    let (lat0, lon0) = (28.6_f64, 77.2_f64);
    let dlat = north_m / 111_195.0;
    let dlon = east_m / (111_195.0 * lat0.to_radians().cos());
    Stop { id: id.into(), name: String::new(), lat: lat0 + dlat, lon: lon0 + dlon }
}

pub fn crossing_world() -> Result<World> {
    let stops = vec![
        stop("s", 0.0, 0.0),
        stop("ha", 2000.0, 1500.0),
        stop("hb", -2000.0, 1500.0),
        stop("t", 0.0, 3000.0),
        stop("fa", 3500.0, 500.0),
        stop("fb", -3500.0, 500.0),
    ];
    let route = |id: &str, s: &[&str]| RouteDef { id: id.into(), stops: s.iter().map(|x| x.to_string()).collect() };
    let routes = vec![
        route("a1", &["s", "ha"]),
        route("a2", &["ha", "t"]),
        route("b1", &["s", "hb"]),
        route("b2", &["hb", "t"]),
        route("fa", &["fa", "ha"]),
        route("fb", &["fb", "hb"]),
    ];
    let g = TransitGraph::build(stops, &routes)?;
    let ix = |id: &str| g.stop_ix(id).expect("stop exists");
    let edge = |a: &str, b: &str| EdgeKey::new(ix(a), ix(b));
    let peaky = || plateau(300.0, 900.0, (6.5, 8.0), (19.5, 21.0));
    let steady = || Profile::constant(500.0);
    let law = |e: EdgeKey, mean: Profile| {
        let std = Profile(mean.0.iter().map(|&(h, v)| (h, 0.08 * v)).collect());
        GroundTruthEdgeLaw::new(e, mean, std)
    };
    let laws = vec![
        law(edge("s", "ha"), peaky()),
        law(edge("ha", "t"), peaky()),
        law(edge("s", "hb"), steady()),
        law(edge("hb", "t"), steady()),
        law(edge("fa", "ha"), Profile::constant(400.0)),
        law(edge("fb", "hb"), Profile::constant(400.0)),
    ];
    Ok(World { origin: ix("s"), destination: ix("t"), peaky_hub: ix("ha"), steady_hub: ix("hb"), laws, graph: g })
}

/// Departures every `headway_min` minutes over `[from_h, to_h)` on every
/// route of `g`.
pub fn departures(g: &TransitGraph, from_h: f64, to_h: f64, headway_min: f64) -> BTreeMap<String, Vec<f64>> {
    let step = headway_min / 60.0;
    let n = ((to_h - from_h) / step).ceil() as usize;
    let hours: Vec<f64> = (0..n).map(|k| from_h + k as f64 * step).filter(|h| *h < to_h).collect();
    g.routes().iter().map(|r| (r.id.clone(), hours.clone())).collect()
}

/// Simulation settings for the world with the given departures.
pub fn sim_config(g: &TransitGraph, days: usize, start_day: i64, headway_min: f64, seed: u64) -> SimConfig {
    SimConfig {
        days,
        start_day,
        seed,
        departures_h: departures(g, 6.0, 22.0, headway_min),
        ..SimConfig::default()
    }
}

/// Timetable built from each segment's smallest mean travel time (dwell
/// included), for the departures in `cfg`.
pub fn free_flow_schedule(g: &TransitGraph, laws: &[GroundTruthEdgeLaw], cfg: &SimConfig) -> Schedule {
    let fastest: BTreeMap<EdgeKey, f64> =
        laws.iter().map(|l| (l.edge, l.mean_s.0.iter().map(|k| k.1).fold(f64::INFINITY, f64::min))).collect();
    let mut trips = Vec::new();
    for r in g.routes() {
        let route = g.route_ix(&r.id).expect("route of the graph");
        let Some(hours) = cfg.departures_h.get(&r.id) else { continue };
        for (k, &h) in hours.iter().enumerate() {
            let mut t = h * 3600.0;
            let mut times = vec![Some(t)];
            for w in r.stops.windows(2) {
                t += fastest.get(&EdgeKey::new(w[0], w[1])).copied().unwrap_or(f64::NAN);
                times.push(Some(t));
            }
            trips.push(ScheduledTrip { route, trip_id: format!("{}-{k}", r.id), times });
        }
    }
    Schedule { trips }
}
