//! Travel-time samples as CSV, one row per sample, edges named by stop id:
//! `tail,head,duration_s,depart_ts,depart_hour,day,approach_tail_m,approach_head_m`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stochtransit_core::graph::{EdgeKey, TransitGraph};
use stochtransit_core::ingest::TravelTimeSample;

use super::{read_csv, write_csv};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    tail: String,
    head: String,
    duration_s: f64,
    depart_ts: i64,
    depart_hour: f64,
    day: i64,
    approach_tail_m: f64,
    approach_head_m: f64,
}

pub fn edge_name(g: &TransitGraph, e: EdgeKey) -> (String, String) {
    (g.stop(e.tail).id.clone(), g.stop(e.head).id.clone())
}

/// Resolves a `(tail id, head id)` pair to a ride edge of `g`.
pub fn resolve_edge(g: &TransitGraph, tail: &str, head: &str) -> Result<EdgeKey> {
    let e = EdgeKey::new(g.require_stop(tail)?, g.require_stop(head)?);
    if g.ride_edge(e).is_none() {
        return Err(Error::input(format!("no route rides from {tail} to {head}")));
    }
    Ok(e)
}

pub fn write_samples(path: &Path, g: &TransitGraph, samples: &[TravelTimeSample]) -> Result<()> {
    write_csv(
        path,
        samples.iter().map(|s| {
            let (tail, head) = edge_name(g, s.edge);
            Row {
                tail,
                head,
                duration_s: s.duration_s,
                depart_ts: s.depart_ts,
                depart_hour: s.depart_hour,
                day: s.day,
                approach_tail_m: s.approach_tail_m,
                approach_head_m: s.approach_head_m,
            }
        }),
    )
}

pub fn read_samples(path: &Path, g: &TransitGraph) -> Result<Vec<TravelTimeSample>> {
    let rows: Vec<Row> = read_csv(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let edge = resolve_edge(g, &r.tail, &r.head).map_err(|e| Error::parse(path, format!("row {}: {e}", i + 1)))?;
            if !(r.duration_s > 0.0) || !(0.0..24.0).contains(&r.depart_hour) {
                return Err(Error::parse(path, format!("row {}: duration must be positive and hour in [0, 24)", i + 1)));
            }
            Ok(TravelTimeSample {
                edge,
                duration_s: r.duration_s,
                depart_ts: r.depart_ts,
                depart_hour: r.depart_hour,
                day: r.day,
                approach_tail_m: r.approach_tail_m,
                approach_head_m: r.approach_head_m,
            })
        })
        .collect()
}
