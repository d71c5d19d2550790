//! Run configuration, read from TOML. Every section is optional and falls
//! back to its defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stochtransit_core::gp::batch::GpFitConfig;
use stochtransit_core::gp::online::SkiConfig;
use stochtransit_core::ingest::IngestConfig;
use stochtransit_core::sim::SimConfig;
use stochtransit_core::ssp::PlannerConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub network: Option<PathBuf>,
    pub feed: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub eta: Option<PathBuf>,
}

/// Ground-truth laws for `simulate` when none are given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LawConfig {
    pub speed_mps: f64,
    /// Rush-hour peak as a fraction of the free-flow time.
    pub rush_extra: f64,
    /// Standard deviation as a fraction of the free-flow time.
    pub cv: f64,
}

impl Default for LawConfig {
    fn default() -> Self {
        LawConfig { speed_mps: 6.0, rush_extra: 0.5, cv: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    pub grid_points: usize,
    pub rank: usize,
    pub refresh_every: usize,
    pub refresh_steps: usize,
    pub floor_fraction: f64,
    /// Samples used for the batch fit that seeds the hyperparameters.
    pub warm_start: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        let s = SkiConfig::default();
        OnlineConfig {
            grid_points: s.grid_points,
            rank: s.rank,
            refresh_every: s.refresh_every,
            refresh_steps: s.refresh_steps,
            floor_fraction: s.floor_fraction,
            warm_start: 200,
        }
    }
}

impl OnlineConfig {
    pub fn ski(&self) -> SkiConfig {
        SkiConfig {
            grid_points: self.grid_points,
            rank: self.rank,
            refresh_every: self.refresh_every,
            refresh_steps: self.refresh_steps,
            floor_fraction: self.floor_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrConfig {
    /// Common days required for an across-days correlation.
    pub min_days: usize,
}

impl Default for CorrConfig {
    fn default() -> Self {
        CorrConfig { min_days: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    /// Fraction of the time-ordered stream held out at the end.
    pub test_fraction: f64,
    /// Share of the seen data the batch reference trains on.
    pub batch_fraction: f64,
    pub report_every: usize,
    /// Cap on batch reference training points.
    pub batch_max_train: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig { test_fraction: 0.05, batch_fraction: 0.8, report_every: 250, batch_max_train: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianityConfig {
    pub iterations: usize,
    /// Edges with fewer samples are left out.
    pub min_samples: usize,
}

impl Default for GaussianityConfig {
    fn default() -> Self {
        GaussianityConfig { iterations: 10_000, min_samples: 65 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub paths: Paths,
    pub sim: SimConfig,
    pub laws: LawConfig,
    pub ingest: IngestConfig,
    pub gp: GpFitConfig,
    pub online: OnlineConfig,
    pub corr: CorrConfig,
    pub planner: PlannerConfig,
    pub replay: ReplayConfig,
    pub gaussianity: GaussianityConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Input(m) => Error::parse(path, m),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::input(e.message().to_string()))?;
        let seed = cfg.seed;
        let cfg = cfg.with_seed(seed);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies the global seed to the sections that take one; it overrides
    /// any seed set inside a section.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sim.seed = seed;
        self.gp.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.gp.validate()?;
        self.online.ski().validate()?;
        if self.online.warm_start < 2 {
            return Err(Error::input("online: warm_start must be at least 2"));
        }
        self.planner.validate()?;
        let l = &self.laws;
        if !(l.speed_mps > 0.0 && l.rush_extra >= 0.0 && l.cv > 0.0) {
            return Err(Error::input("laws: speed_mps and cv must be positive, rush_extra non-negative"));
        }
        if !(self.ingest.max_approach_m > 0.0 && self.ingest.trip_gap_s > 0) {
            return Err(Error::input("ingest: max_approach_m and trip_gap_s must be positive"));
        }
        let r = &self.replay;
        if !(r.test_fraction > 0.0 && r.test_fraction < 1.0 && r.batch_fraction > 0.0 && r.batch_fraction < 1.0) {
            return Err(Error::input("replay: fractions must lie in (0, 1)"));
        }
        if r.report_every == 0 || r.batch_max_train < 2 {
            return Err(Error::input("replay: report_every must be positive and batch_max_train >= 2"));
        }
        if self.gaussianity.iterations == 0 || self.gaussianity.min_samples < 2 {
            return Err(Error::input("gaussianity: iterations must be positive and min_samples >= 2"));
        }
        if self.corr.min_days < 3 {
            return Err(Error::input("corr: min_days must be at least 3"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = Config::from_toml("seed = 4\n[planner]\ndefault_headway_s = 300.0\n[online]\nrank = 16\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.planner.default_headway_s, 300.0);
        assert_eq!(c.planner.integration_nodes, 4096);
        assert_eq!(c.online.rank, 16);
        assert_eq!(c.online.grid_points, 128);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml("sede = 1").is_err());
        assert!(Config::from_toml("[planner]\nheadway = 3").is_err());
        assert!(Config::from_toml("[online]\nrnak = 3").is_err());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(Config::from_toml("[online]\nrank = 500").is_err());
        assert!(Config::from_toml("[sim]\ndrop_prob = 1.5").is_err());
        assert!(Config::from_toml("[replay]\ntest_fraction = 0.0").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let b = Config::default().with_seed(9);
        assert_eq!(a.hash(), Config::default().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
