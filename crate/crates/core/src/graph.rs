//! Transit network graph.
//!
//! Two edge sets are derived from the route definitions:
//!
//! * **segments**: consecutive stop pairs of every route. These describe the
//!   physical network and drive hub classification.
//! * **ride edges**: every ordered pair `(a, b)` such that some route visits
//!   `b` after `a`, i.e. `b` is reachable from `a` without a transfer.
//!   Candidate paths are built from ride edges, and travel-time models are
//!   fitted per ride edge.
//!
//! In both sets parallel routes between the same ordered stop pair collapse
//! onto a single edge that remembers the route ids serving it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StopIx(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RouteIx(pub u32);

impl StopIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RouteIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered stop pair identifying a directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub tail: StopIx,
    pub head: StopIx,
}

impl EdgeKey {
    pub const fn new(tail: StopIx, head: StopIx) -> Self {
        EdgeKey { tail, head }
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.tail.0, self.head.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// A route as an ordered list of stop ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteDef {
    pub id: String,
    pub stops: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub id: String,
    pub stops: Vec<StopIx>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub tail: StopIx,
    pub head: StopIx,
    /// Routes serving this stop pair, sorted and non-empty.
    pub routes: Vec<RouteIx>,
}

impl Edge {
    pub fn key(&self) -> EdgeKey {
        EdgeKey::new(self.tail, self.head)
    }
}

#[derive(Debug, Clone)]
pub struct TransitGraph {
    stops: Vec<Stop>,
    stop_lookup: BTreeMap<String, StopIx>,
    routes: Vec<Route>,
    route_lookup: BTreeMap<String, RouteIx>,
    segments: Vec<Edge>,
    rides: Vec<Edge>,
    seg_in: Vec<Vec<StopIx>>,
    seg_out: Vec<Vec<StopIx>>,
    ride_out: Vec<Vec<usize>>,
    hub: Vec<bool>,
}

fn collapse(pairs: BTreeMap<EdgeKey, BTreeSet<RouteIx>>) -> Vec<Edge> {
    pairs
        .into_iter()
        .map(|(k, routes)| Edge { tail: k.tail, head: k.head, routes: routes.into_iter().collect() })
        .collect()
}

impl TransitGraph {
    /// Builds the graph from stops and routes.
    ///
    /// Rejects duplicate ids, out-of-range coordinates, routes shorter than
    /// two stops, routes referencing unknown stops and immediate stop
    /// repetitions (self loops).
    pub fn build(stops: Vec<Stop>, routes: &[RouteDef]) -> Result<Self> {
        let mut stop_lookup = BTreeMap::new();
        for (i, s) in stops.iter().enumerate() {
            if !(s.lat.is_finite() && (-90.0..=90.0).contains(&s.lat)) {
                return Err(Error::invalid(format!("stop `{}` latitude {} out of range", s.id, s.lat)));
            }
            if !(s.lon.is_finite() && (-180.0..=180.0).contains(&s.lon)) {
                return Err(Error::invalid(format!("stop `{}` longitude {} out of range", s.id, s.lon)));
            }
            if stop_lookup.insert(s.id.clone(), StopIx(i as u32)).is_some() {
                return Err(Error::invalid(format!("duplicate stop id `{}`", s.id)));
            }
        }

        let mut route_lookup = BTreeMap::new();
        let mut resolved = Vec::with_capacity(routes.len());
        for (ri, r) in routes.iter().enumerate() {
            if route_lookup.insert(r.id.clone(), RouteIx(ri as u32)).is_some() {
                return Err(Error::invalid(format!("duplicate route id `{}`", r.id)));
            }
            if r.stops.len() < 2 {
                return Err(Error::invalid(format!("route `{}` has fewer than two stops", r.id)));
            }
            let mut seq = Vec::with_capacity(r.stops.len());
            for sid in &r.stops {
                let ix = *stop_lookup.get(sid).ok_or_else(|| {
                    Error::invalid(format!("route `{}` references unknown stop `{}`", r.id, sid))
                })?;
                if seq.last() == Some(&ix) {
                    return Err(Error::invalid(format!(
                        "route `{}` repeats stop `{}` consecutively",
                        r.id, sid
                    )));
                }
                seq.push(ix);
            }
            resolved.push(Route { id: r.id.clone(), stops: seq });
        }

        let mut seg_pairs: BTreeMap<EdgeKey, BTreeSet<RouteIx>> = BTreeMap::new();
        let mut ride_pairs: BTreeMap<EdgeKey, BTreeSet<RouteIx>> = BTreeMap::new();
        for (ri, r) in resolved.iter().enumerate() {
            let rix = RouteIx(ri as u32);
            for w in r.stops.windows(2) {
                seg_pairs.entry(EdgeKey::new(w[0], w[1])).or_default().insert(rix);
            }
            for i in 0..r.stops.len() {
                for j in i + 1..r.stops.len() {
                    if r.stops[i] != r.stops[j] {
                        ride_pairs.entry(EdgeKey::new(r.stops[i], r.stops[j])).or_default().insert(rix);
                    }
                }
            }
        }
        let segments = collapse(seg_pairs);
        let rides = collapse(ride_pairs);

        let n = stops.len();
        let mut seg_in = alloc::vec![Vec::new(); n];
        let mut seg_out = alloc::vec![Vec::new(); n];
        for e in &segments {
            seg_out[e.tail.index()].push(e.head);
            seg_in[e.head.index()].push(e.tail);
        }
        for v in seg_in.iter_mut().chain(seg_out.iter_mut()) {
            v.sort();
            v.dedup();
        }
        let mut ride_out = alloc::vec![Vec::new(); n];
        for (i, e) in rides.iter().enumerate() {
            ride_out[e.tail.index()].push(i);
        }

        let mut g = TransitGraph {
            stops,
            stop_lookup,
            routes: resolved,
            route_lookup,
            segments,
            rides,
            seg_in,
            seg_out,
            ride_out,
            hub: Vec::new(),
        };
        g.hub = (0..n).map(|i| g.hub_rule(StopIx(i as u32))).collect();
        Ok(g)
    }

    // Non-hub iff exactly one distinct upstream and one distinct downstream
    // neighbour; sources, sinks and isolated stops count as hubs.
    fn hub_rule(&self, s: StopIx) -> bool {
        !(self.seg_in[s.index()].len() == 1 && self.seg_out[s.index()].len() == 1)
    }

    /// Recomputes the hub set from the segment adjacency.
    pub fn classify_hubs(&self) -> BTreeSet<StopIx> {
        (0..self.stops.len() as u32).map(StopIx).filter(|&s| self.hub_rule(s)).collect()
    }

    pub fn is_hub(&self, s: StopIx) -> bool {
        self.hub[s.index()]
    }

    pub fn num_stops(&self) -> usize {
        self.stops.len()
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    pub fn stop(&self, s: StopIx) -> &Stop {
        &self.stops[s.index()]
    }

    pub fn stop_ix(&self, id: &str) -> Option<StopIx> {
        self.stop_lookup.get(id).copied()
    }

    pub fn require_stop(&self, id: &str) -> Result<StopIx> {
        self.stop_ix(id).ok_or_else(|| Error::unknown("stop", id))
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn route(&self, r: RouteIx) -> &Route {
        &self.routes[r.index()]
    }

    pub fn route_ix(&self, id: &str) -> Option<RouteIx> {
        self.route_lookup.get(id).copied()
    }

    /// Consecutive-stop edges, sorted by key.
    pub fn segments(&self) -> &[Edge] {
        &self.segments
    }

    /// No-transfer reachability edges, sorted by key.
    pub fn ride_edges(&self) -> &[Edge] {
        &self.rides
    }

    pub fn segment(&self, key: EdgeKey) -> Option<&Edge> {
        self.segments.binary_search_by(|e| e.key().cmp(&key)).ok().map(|i| &self.segments[i])
    }

    pub fn ride_edge(&self, key: EdgeKey) -> Option<&Edge> {
        self.rides.binary_search_by(|e| e.key().cmp(&key)).ok().map(|i| &self.rides[i])
    }

    /// Ride edges leaving `s`, ordered by head.
    pub fn rides_from(&self, s: StopIx) -> impl Iterator<Item = &Edge> + '_ {
        self.ride_out[s.index()].iter().map(move |&i| &self.rides[i])
    }

    pub fn segment_in_neighbors(&self, s: StopIx) -> &[StopIx] {
        &self.seg_in[s.index()]
    }

    pub fn segment_out_neighbors(&self, s: StopIx) -> &[StopIx] {
        &self.seg_out[s.index()]
    }

    fn check_stop(&self, s: StopIx) -> Result<()> {
        if s.index() < self.stops.len() {
            Ok(())
        } else {
            Err(Error::unknown("stop", format!("#{}", s.0)))
        }
    }
}

/// Path with at most one transfer, expressed over ride edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathCandidate {
    pub legs: Vec<EdgeKey>,
    pub transfer: Option<StopIx>,
}

impl PathCandidate {
    pub fn direct(leg: EdgeKey) -> Self {
        PathCandidate { legs: alloc::vec![leg], transfer: None }
    }

    pub fn via(first: EdgeKey, second: EdgeKey) -> Self {
        debug_assert_eq!(first.head, second.tail);
        PathCandidate { legs: alloc::vec![first, second], transfer: Some(first.head) }
    }

    pub fn origin(&self) -> StopIx {
        self.legs[0].tail
    }

    pub fn destination(&self) -> StopIx {
        self.legs[self.legs.len() - 1].head
    }

    pub fn is_direct(&self) -> bool {
        self.transfer.is_none()
    }

    /// Checks contiguity and the transfer-stop invariant against `g`.
    pub fn validate(&self, g: &TransitGraph) -> Result<()> {
        let ok_shape = match (self.legs.len(), self.transfer) {
            (1, None) => true,
            (2, Some(v)) => self.legs[0].head == v && self.legs[1].tail == v,
            _ => false,
        };
        if !ok_shape {
            return Err(Error::invalid("path legs are not contiguous or transfer stop mismatches"));
        }
        for leg in &self.legs {
            if g.ride_edge(*leg).is_none() {
                return Err(Error::unknown("edge", format!("{leg}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerateOptions {
    /// Only consider hub stops as transfer points.
    pub hub_transfers_only: bool,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions { hub_transfers_only: true }
    }
}

/// Candidate paths from `s` to `t` with at most one transfer.
///
/// The direct ride edge comes first when it exists, followed by one
/// candidate per admissible transfer stop in stop order. Direct paths are
/// never subject to the hub filter.
pub fn enumerate_paths(
    g: &TransitGraph,
    s: StopIx,
    t: StopIx,
    opts: EnumerateOptions,
) -> Result<Vec<PathCandidate>> {
    g.check_stop(s)?;
    g.check_stop(t)?;
    if s == t {
        return Err(Error::invalid("source and target stops are identical"));
    }
    let mut out = Vec::new();
    if g.ride_edge(EdgeKey::new(s, t)).is_some() {
        out.push(PathCandidate::direct(EdgeKey::new(s, t)));
    }
    for first in g.rides_from(s) {
        let v = first.head;
        if v == t || (opts.hub_transfers_only && !g.is_hub(v)) {
            continue;
        }
        let second = EdgeKey::new(v, t);
        if g.ride_edge(second).is_some() {
            out.push(PathCandidate::via(first.key(), second));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityStats {
    /// Mean fraction of other stops reachable without a transfer.
    pub direct: f64,
    /// Mean fraction of other stops reachable with at most one transfer.
    pub one_transfer: f64,
}

/// Averages, over all source stops, how much of the network is reachable
/// directly and with at most one transfer (at any stop).
pub fn reachability_stats(g: &TransitGraph) -> Result<ReachabilityStats> {
    let n = g.num_stops();
    if n < 2 {
        return Err(Error::InsufficientData("reachability needs at least two stops".into()));
    }
    let mut direct_sum = 0.0;
    let mut one_sum = 0.0;
    let mut seen = alloc::vec![false; n];
    for s in 0..n {
        let s = StopIx(s as u32);
        seen.iter_mut().for_each(|x| *x = false);
        let mut direct = 0usize;
        for e in g.rides_from(s) {
            if !seen[e.head.index()] {
                seen[e.head.index()] = true;
                direct += 1;
            }
        }
        let mut one = direct;
        for e in g.rides_from(s) {
            for e2 in g.rides_from(e.head) {
                let h = e2.head.index();
                if h != s.index() && !seen[h] {
                    seen[h] = true;
                    one += 1;
                }
            }
        }
        direct_sum += direct as f64 / (n - 1) as f64;
        one_sum += one as f64 / (n - 1) as f64;
    }
    Ok(ReachabilityStats { direct: direct_sum / n as f64, one_transfer: one_sum / n as f64 })
}
