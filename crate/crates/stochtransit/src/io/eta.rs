//! Hourly ETA vectors and live bus-arrival feeds.
//!
//! ETA vectors: `eta_vectors.csv` with one row per (edge, hour)
//! `tail,head,hour,median_s,count,interpolated`, and a companion
//! `eta_per_day.csv` with `tail,head,day,hour,median_s` for each day-hour
//! that had samples.
//!
//! Bus arrivals: JSON `[{"stop": id, "route": id, "arrivals": [{"t": epoch s, "std": s}]}]`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stochtransit_core::corr::EtaVector;
use stochtransit_core::graph::{EdgeKey, TransitGraph};
use stochtransit_core::ssp::{BusEta, EtaFeed};

use super::samples::{edge_name, resolve_edge};
use super::{read_csv, read_json, write_csv, write_json};
use crate::error::{Error, Result};

pub const VECTORS_FILE: &str = "eta_vectors.csv";
pub const PER_DAY_FILE: &str = "eta_per_day.csv";

#[derive(Debug, Serialize, Deserialize)]
struct VectorRow {
    tail: String,
    head: String,
    hour: usize,
    median_s: f64,
    count: u32,
    interpolated: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct DayRow {
    tail: String,
    head: String,
    day: i64,
    hour: usize,
    median_s: f64,
}

pub fn write_eta_vectors(dir: &Path, g: &TransitGraph, vectors: &BTreeMap<EdgeKey, EtaVector>) -> Result<()> {
    let mut rows = Vec::new();
    let mut days = Vec::new();
    for v in vectors.values() {
        let (tail, head) = edge_name(g, v.edge);
        for h in 0..24 {
            rows.push(VectorRow {
                tail: tail.clone(),
                head: head.clone(),
                hour: h,
                median_s: v.medians[h],
                count: v.counts[h],
                interpolated: v.interpolated[h],
            });
        }
        for (&day, meds) in &v.per_day {
            for (h, m) in meds.iter().enumerate() {
                if let Some(m) = m {
                    days.push(DayRow { tail: tail.clone(), head: head.clone(), day, hour: h, median_s: *m });
                }
            }
        }
    }
    write_csv(&dir.join(VECTORS_FILE), rows)?;
    write_csv(&dir.join(PER_DAY_FILE), days)
}

/// Reads ETA vectors; the per-day file is optional.
pub fn read_eta_vectors(dir: &Path, g: &TransitGraph) -> Result<BTreeMap<EdgeKey, EtaVector>> {
    let path = dir.join(VECTORS_FILE);
    let rows: Vec<VectorRow> = read_csv(&path)?;
    let mut out: BTreeMap<EdgeKey, EtaVector> = BTreeMap::new();
    for r in rows {
        let edge = resolve_edge(g, &r.tail, &r.head).map_err(|e| Error::parse(&path, e))?;
        if r.hour >= 24 {
            return Err(Error::parse(&path, format!("hour {} out of range", r.hour)));
        }
        let v = out.entry(edge).or_insert_with(|| EtaVector {
            edge,
            medians: [f64::NAN; 24],
            counts: [0; 24],
            interpolated: [false; 24],
            per_day: BTreeMap::new(),
        });
        v.medians[r.hour] = r.median_s;
        v.counts[r.hour] = r.count;
        v.interpolated[r.hour] = r.interpolated;
    }
    if let Some((e, _)) = out.iter().find(|(_, v)| v.medians.iter().any(|m| !m.is_finite())) {
        let (t, h) = edge_name(g, *e);
        return Err(Error::parse(&path, format!("edge {t}->{h} does not list all 24 hours")));
    }
    let day_path = dir.join(PER_DAY_FILE);
    if day_path.exists() {
        let rows: Vec<DayRow> = read_csv(&day_path)?;
        for r in rows {
            let edge = resolve_edge(g, &r.tail, &r.head).map_err(|e| Error::parse(&day_path, e))?;
            let Some(v) = out.get_mut(&edge) else { continue };
            if r.hour < 24 {
                v.per_day.entry(r.day).or_insert([None; 24])[r.hour] = Some(r.median_s);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaEntry {
    pub stop: String,
    pub route: String,
    pub arrivals: Vec<BusEta>,
}

pub fn eta_feed_from_entries(g: &TransitGraph, entries: &[EtaEntry]) -> Result<EtaFeed> {
    let mut feed = EtaFeed::new();
    for e in entries {
        let stop = g.require_stop(&e.stop)?;
        let route = g.route_ix(&e.route).ok_or_else(|| stochtransit_core::Error::unknown("route", e.route.clone()))?;
        if !g.route(route).stops.contains(&stop) {
            return Err(Error::input(format!("route {} does not serve stop {}", e.route, e.stop)));
        }
        feed.insert(stop, route, e.arrivals.clone())?;
    }
    Ok(feed)
}

pub fn read_eta_feed(path: &Path, g: &TransitGraph) -> Result<EtaFeed> {
    let entries: Vec<EtaEntry> = read_json(path)?;
    eta_feed_from_entries(g, &entries).map_err(|e| match e {
        Error::Core(c) => Error::parse(path, c),
        other => other,
    })
}

pub fn write_eta_feed(path: &Path, g: &TransitGraph, feed: &EtaFeed) -> Result<()> {
    let entries: Vec<EtaEntry> = feed
        .iter()
        .map(|(&(s, r), v)| EtaEntry { stop: g.stop(s).id.clone(), route: g.route(r).id.clone(), arrivals: v.clone() })
        .collect();
    write_json(path, &entries)
}
