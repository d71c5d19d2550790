//! Model store: one JSON file per edge.
//!
//! ```text
//! {
//!   "format": "stochtransit-edge-model", "version": 1,
//!   "tail": stop id, "head": stop id,
//!   "summary": {"samples", "params": {...}, "mean_s", "status", "hours": [min, max]},
//!   "batch": {params, mean, x, y, status}      // batch backend
//!   "online": {versioned SKI state}             // online backend
//! }
//! ```
//!
//! Exactly one of `batch` and `online` is present.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stochtransit_core::gp::batch::{EdgeModel, EdgeModelRecord, FitStatus};
use stochtransit_core::gp::online::SkiState;
use stochtransit_core::gp::{KernelParams, ModelSource, TravelTimeModel};
use stochtransit_core::graph::{EdgeKey, TransitGraph};
use stochtransit_core::Gaussian;

use super::samples::{edge_name, resolve_edge};
use super::{read_json, sha256_hex, write_json};
use crate::error::{Error, Result};

pub const FORMAT: &str = "stochtransit-edge-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Batch,
    Online,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Batch => "batch",
            Backend::Online => "online",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub samples: u64,
    pub params: KernelParams,
    pub mean_s: f64,
    /// Batch fit outcome; absent for streamed states.
    pub status: Option<FitStatus>,
    /// Range of training departure hours.
    pub hours: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub tail: String,
    pub head: String,
    pub summary: ModelSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<EdgeModelRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub online: Option<SkiState>,
}

/// Model of one edge. The online backend keeps batch models for edges too
/// sparse to stream.
#[derive(Debug, Clone)]
pub enum EdgeEntry {
    Batch(EdgeModel),
    Online(SkiState),
}

impl TravelTimeModel for EdgeEntry {
    fn predict(&self, hour: f64) -> Gaussian {
        match self {
            EdgeEntry::Batch(m) => m.posterior(hour),
            EdgeEntry::Online(s) => s.predict(hour),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelSet {
    pub backend: Backend,
    pub edges: BTreeMap<EdgeKey, EdgeEntry>,
}

impl ModelSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

impl ModelSource for ModelSet {
    fn model(&self, edge: EdgeKey) -> Option<&dyn TravelTimeModel> {
        self.edges.get(&edge).map(|m| m as &dyn TravelTimeModel)
    }
}

/// File name for an edge: sanitized ids plus a short hash so distinct ids
/// never collide.
pub fn model_file_name(tail: &str, head: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
    };
    let h = sha256_hex(format!("{tail}\u{0}{head}").as_bytes());
    format!("{}__{}__{}.json", clean(tail), clean(head), &h[..8])
}

/// Whether `name` has the shape produced by [`model_file_name`].
pub fn is_model_file_name(name: &str) -> bool {
    let Some(stem) = name.strip_suffix(".json") else { return false };
    let Some((edge, hash)) = stem.rsplit_once("__") else { return false };
    edge.contains("__") && hash.len() == 8 && hash.bytes().all(|b| b.is_ascii_hexdigit())
}

fn summary_of(x: &[f64], params: KernelParams, mean: f64, status: FitStatus, n: u64) -> ModelSummary {
    let hours = (!x.is_empty()).then(|| {
        x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    });
    ModelSummary { samples: n, params, mean_s: mean, status: Some(status), hours }
}

pub fn batch_file(g: &TransitGraph, edge: EdgeKey, m: &EdgeModel, samples: u64) -> ModelFile {
    let (tail, head) = edge_name(g, edge);
    ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        tail,
        head,
        summary: summary_of(m.inputs(), *m.params(), m.mean(), m.status(), samples),
        batch: Some(m.record()),
        online: None,
    }
}

pub fn online_file(g: &TransitGraph, edge: EdgeKey, s: &SkiState, hours: Option<(f64, f64)>) -> ModelFile {
    let (tail, head) = edge_name(g, edge);
    ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        tail,
        head,
        summary: ModelSummary { samples: s.len(), params: *s.params(), mean_s: s.running_mean(), status: None, hours },
        batch: None,
        online: Some(s.clone()),
    }
}

pub fn write_model(dir: &Path, f: &ModelFile) -> Result<PathBuf> {
    let path = dir.join(model_file_name(&f.tail, &f.head));
    write_json(&path, f)?;
    Ok(path)
}

pub fn read_model_file(path: &Path) -> Result<ModelFile> {
    let f: ModelFile = read_json(path)?;
    if f.format != FORMAT || f.version != VERSION {
        return Err(Error::parse(path, format!("unsupported model file {} v{}", f.format, f.version)));
    }
    if f.batch.is_some() == f.online.is_some() {
        return Err(Error::parse(path, "model file must hold exactly one of `batch` and `online`"));
    }
    Ok(f)
}

/// Loads every model file in `dir`, ignoring other files. The set counts
/// as online when any edge holds an online state.
pub fn read_models(dir: &Path, g: &TransitGraph) -> Result<ModelSet> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(is_model_file_name))
        .collect();
    paths.sort();
    let mut edges = BTreeMap::new();
    for p in paths {
        let f = read_model_file(&p)?;
        let edge = resolve_edge(g, &f.tail, &f.head).map_err(|e| Error::parse(&p, e))?;
        let entry = if let Some(rec) = f.batch {
            EdgeEntry::Batch(EdgeModel::from_record(rec).map_err(|e| Error::parse(&p, e))?)
        } else {
            let s = f.online.expect("checked by read_model_file");
            s.check_version().map_err(|e| Error::parse(&p, e))?;
            EdgeEntry::Online(s)
        };
        if edges.insert(edge, entry).is_some() {
            return Err(Error::parse(&p, "duplicate model for this edge"));
        }
    }
    if edges.is_empty() {
        return Err(Error::input(format!("no model files in {}", dir.display())));
    }
    let backend = if edges.values().any(|e| matches!(e, EdgeEntry::Online(_))) { Backend::Online } else { Backend::Batch };
    Ok(ModelSet { backend, edges })
}

/// `hours` is only used for online states; batch models carry their inputs.
pub fn entry_file(g: &TransitGraph, edge: EdgeKey, e: &EdgeEntry, samples: u64, hours: Option<(f64, f64)>) -> ModelFile {
    match e {
        EdgeEntry::Batch(m) => batch_file(g, edge, m, samples),
        EdgeEntry::Online(s) => online_file(g, edge, s, hours),
    }
}
