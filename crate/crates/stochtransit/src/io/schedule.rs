//! Published timetables as CSV: `route,trip_id,stop,arrival`, where
//! `arrival` is `HH:MM:SS` (hours may run past 24) or plain seconds after
//! midnight. Stops a trip does not list are treated as not served.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stochtransit_core::graph::TransitGraph;
use stochtransit_core::ssp::evaluate::{Schedule, ScheduledTrip};

use super::{read_csv, write_csv};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    route: String,
    trip_id: String,
    stop: String,
    arrival: String,
}

pub fn parse_clock(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return (v.is_finite() && v >= 0.0).then_some(v);
    }
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return None;
    }
    let h: u32 = parts[0].parse().ok()?;
    let m: u32 = parts[1].parse().ok()?;
    let sec: f64 = parts[2].parse().ok()?;
    (m < 60 && (0.0..60.0).contains(&sec)).then(|| h as f64 * 3600.0 + m as f64 * 60.0 + sec)
}

pub fn format_clock(s: f64) -> String {
    let ms = (s * 1000.0).round() as u64;
    let whole = ms / 1000;
    let (h, m, sec) = (whole / 3600, (whole / 60) % 60, whole % 60);
    match ms % 1000 {
        0 => format!("{h:02}:{m:02}:{sec:02}"),
        frac => format!("{h:02}:{m:02}:{sec:02}.{frac:03}"),
    }
}

pub fn read_schedule(path: &Path, g: &TransitGraph) -> Result<Schedule> {
    let rows: Vec<Row> = read_csv(path)?;
    let mut trips: BTreeMap<(String, String), ScheduledTrip> = BTreeMap::new();
    let mut cursor: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (i, r) in rows.into_iter().enumerate() {
        let bad = |m: String| Error::parse(path, format!("row {}: {m}", i + 1));
        let route = g.route_ix(&r.route).ok_or_else(|| bad(format!("unknown route {}", r.route)))?;
        let stop = g.stop_ix(&r.stop).ok_or_else(|| bad(format!("unknown stop {}", r.stop)))?;
        let t = parse_clock(&r.arrival).ok_or_else(|| bad(format!("bad arrival time {}", r.arrival)))?;
        let key = (r.route.clone(), r.trip_id.clone());
        let stops = &g.route(route).stops;
        let from = cursor.get(&key).copied().unwrap_or(0);
        let pos = stops[from..]
            .iter()
            .position(|&s| s == stop)
            .map(|p| p + from)
            .ok_or_else(|| bad(format!("stop {} out of order on route {}", r.stop, r.route)))?;
        cursor.insert(key.clone(), pos + 1);
        let trip = trips
            .entry(key)
            .or_insert_with(|| ScheduledTrip { route, trip_id: r.trip_id.clone(), times: vec![None; stops.len()] });
        trip.times[pos] = Some(t);
    }
    Ok(Schedule { trips: trips.into_values().collect() })
}

pub fn write_schedule(path: &Path, g: &TransitGraph, s: &Schedule) -> Result<()> {
    let rows = s.trips.iter().flat_map(|t| {
        let route = g.route(t.route);
        t.times.iter().enumerate().filter_map(move |(i, x)| {
            x.map(|x| Row {
                route: route.id.clone(),
                trip_id: t.trip_id.clone(),
                stop: g.stop(route.stops[i]).id.clone(),
                arrival: format_clock(x),
            })
        })
    });
    write_csv(path, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_formats() {
        assert_eq!(parse_clock("07:05:30"), Some(25_530.0));
        assert_eq!(parse_clock("25:00:00"), Some(90_000.0));
        assert_eq!(parse_clock("3600"), Some(3600.0));
        assert_eq!(parse_clock("7:65:00"), None);
        assert_eq!(parse_clock("-5"), None);
        assert_eq!(format_clock(25_530.0), "07:05:30");
        assert_eq!(parse_clock(&format_clock(3723.25)), Some(3723.25));
        assert_eq!(format_clock(27_599.9999), "07:40:00");
    }
}
