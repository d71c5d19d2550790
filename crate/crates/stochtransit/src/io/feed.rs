//! GPS feeds as JSON lines:
//! `{"vid": str, "rid": str, "ts": int, "lat": float, "lon": float, "speed": float?}`.
//!
//! Lines that do not parse are skipped and counted rather than failing the
//! whole feed.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use stochtransit_core::ingest::GpsPing;
use stochtransit_core::sim::TripRecord;

use super::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedStats {
    pub lines: u64,
    pub blank: u64,
    pub malformed: u64,
    /// 1-based numbers of the first few malformed lines.
    pub first_malformed: Vec<u64>,
}

const KEEP_MALFORMED: usize = 10;

/// Reads the feed line by line.
pub fn read_feed(path: &Path) -> Result<(Vec<GpsPing>, FeedStats)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_feed_from(BufReader::new(f), path)
}

pub fn read_feed_from(r: impl BufRead, path: &Path) -> Result<(Vec<GpsPing>, FeedStats)> {
    let mut stats = FeedStats::default();
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        stats.lines += 1;
        let t = line.trim();
        if t.is_empty() {
            stats.blank += 1;
            continue;
        }
        match serde_json::from_str::<GpsPing>(t) {
            Ok(p) => out.push(p),
            Err(_) => {
                stats.malformed += 1;
                if stats.first_malformed.len() < KEEP_MALFORMED {
                    stats.first_malformed.push(stats.lines);
                }
            }
        }
    }
    Ok((out, stats))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_atomic(path, |w| {
        for p in items {
            serde_json::to_writer(&mut *w, p).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn write_feed(path: &Path, pings: &[GpsPing]) -> Result<()> {
    write_jsonl(path, pings)
}

/// Simulated ground truth, one trip per line.
pub fn write_trips(path: &Path, trips: &[TripRecord]) -> Result<()> {
    write_jsonl(path, trips)
}

pub fn read_trips(path: &Path) -> Result<Vec<TripRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}
