//! Network files.
//!
//! Two layouts are read:
//!
//! * a JSON file `{"stops": [{"id", "name", "lat", "lon"}], "routes": [{"id", "stops": [stop ids]}]}`;
//! * a directory holding a GTFS-style `stops.txt` (`stop_id`, `stop_name`,
//!   `stop_lat`, `stop_lon`; other columns ignored) and `route_stops.txt`
//!   (`route_id`, `stop_sequence`, `stop_id`) giving each route's ordered
//!   stops. Route ids are expected to encode direction.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stochtransit_core::graph::{RouteDef, Stop, TransitGraph};

use super::{read_csv, read_json, sha256_hex, write_json};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub stops: Vec<Stop>,
    pub routes: Vec<RouteDef>,
}

impl NetworkFile {
    pub fn from_graph(g: &TransitGraph) -> Self {
        let stops = g.stops().to_vec();
        let routes = g
            .routes()
            .iter()
            .map(|r| RouteDef { id: r.id.clone(), stops: r.stops.iter().map(|&s| g.stop(s).id.clone()).collect() })
            .collect();
        NetworkFile { stops, routes }
    }

    pub fn build(&self) -> Result<TransitGraph> {
        Ok(TransitGraph::build(self.stops.clone(), &self.routes)?)
    }

    /// Content hash identifying the network in the store.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("network serializes"))
    }
}

#[derive(Debug, Deserialize)]
struct GtfsStop {
    stop_id: String,
    #[serde(default)]
    stop_name: String,
    stop_lat: f64,
    stop_lon: f64,
}

#[derive(Debug, Deserialize)]
struct GtfsRouteStop {
    route_id: String,
    stop_sequence: u32,
    stop_id: String,
}

pub fn read_gtfs(dir: &Path) -> Result<NetworkFile> {
    let stops: Vec<GtfsStop> = read_csv(&dir.join("stops.txt"))?;
    let seq: Vec<GtfsRouteStop> = read_csv(&dir.join("route_stops.txt"))?;
    let mut by_route: BTreeMap<String, Vec<(u32, String)>> = BTreeMap::new();
    for r in seq {
        by_route.entry(r.route_id).or_default().push((r.stop_sequence, r.stop_id));
    }
    let mut routes = Vec::with_capacity(by_route.len());
    for (id, mut s) in by_route {
        s.sort();
        if s.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::parse(dir.join("route_stops.txt"), format!("route {id} repeats a stop_sequence")));
        }
        routes.push(RouteDef { id, stops: s.into_iter().map(|(_, stop)| stop).collect() });
    }
    let stops = stops.into_iter().map(|s| Stop { id: s.stop_id, name: s.stop_name, lat: s.stop_lat, lon: s.stop_lon }).collect();
    Ok(NetworkFile { stops, routes })
}

pub fn write_gtfs(dir: &Path, net: &NetworkFile) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("stops.txt");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::parse(&path, e))?;
    w.write_record(["stop_id", "stop_name", "stop_lat", "stop_lon"]).map_err(|e| Error::parse(&path, e))?;
    for s in &net.stops {
        w.write_record([s.id.clone(), s.name.clone(), s.lat.to_string(), s.lon.to_string()]).map_err(|e| Error::parse(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let path = dir.join("route_stops.txt");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::parse(&path, e))?;
    w.write_record(["route_id", "stop_sequence", "stop_id"]).map_err(|e| Error::parse(&path, e))?;
    for r in &net.routes {
        for (i, s) in r.stops.iter().enumerate() {
            w.write_record([r.id.clone(), (i + 1).to_string(), s.clone()]).map_err(|e| Error::parse(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Reads a JSON network file or a GTFS-style directory.
pub fn load_network(path: &Path) -> Result<NetworkFile> {
    if path.is_dir() {
        read_gtfs(path)
    } else {
        read_json(path)
    }
}

pub fn save_network(path: &Path, net: &NetworkFile) -> Result<()> {
    write_json(path, net)
}
