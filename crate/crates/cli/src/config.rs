//! Experiment configuration: sectioned `key = value` text, parsed as TOML.
//!
//! Every section and key is optional; missing values take the defaults below.
//! Unknown keys are rejected so typos surface as config errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pulse_atlas::pulse::SeedPattern;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed for every sampled check (reversibility, Kantorovich).
    pub seed: u64,
    pub model: ModelConfig,
    pub domain: DomainConfig,
    pub pulse: PulseConfig,
    pub continuation: ContinuationConfig,
    pub stability: StabilityConfig,
    pub map_analysis: MapConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d: f64,
    pub mu_start: f64,
    /// Parameter interval `J`; branches leaving it end at a window edge.
    pub interval: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub half_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    /// Alternating plateau and gap lengths, odd count.
    pub lengths: Vec<usize>,
    pub seed_pattern: SeedPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub max_periods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub enabled: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub enabled: bool,
    pub mu_grid: MuGrid,
    pub section_offset: f64,
}

/// `points` equally spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl MuGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| if i + 1 == self.points { self.stop } else { self.start + h * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Plot,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { d: 0.1, mu_start: 0.5, interval: [0.05, 0.95] }
    }
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { half_width: pulse_atlas::pulse::DEFAULT_HALF_WIDTH }
    }
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self { lengths: vec![5], seed_pattern: SeedPattern::Sharp }
    }
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self { ds: 0.02, ds_min: 1e-8, ds_max: 0.1, max_steps: 20_000, max_periods: 6 }
    }
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { enabled: true, margin: pulse_atlas::stability::DEFAULT_MARGIN }
    }
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { enabled: false, mu_grid: MuGrid { start: 0.2, stop: 0.8, points: 400 }, section_offset: 0.05 }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("pulse-atlas-out"), formats: vec![Format::Csv, Format::Json, Format::Plot] }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        let m = &self.model;
        let [lo, hi] = m.interval;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(format!("model.interval must satisfy 0 < lo < hi < 1, got [{lo}, {hi}]"));
        }
        if !(m.d > 0.0 && m.d.is_finite()) {
            return Err(format!("model.d must be positive, got {}", m.d));
        }
        if !(lo < m.mu_start && m.mu_start < hi) {
            return Err(format!("model.mu_start {} lies outside the interval", m.mu_start));
        }
        if self.domain.half_width == 0 {
            return Err("domain.half_width must be positive".into());
        }
        let p = &self.pulse;
        if p.lengths.is_empty() || p.lengths.len().is_multiple_of(2) || p.lengths.contains(&0) {
            return Err(format!("pulse.lengths must be an odd number of positive lengths, got {:?}", p.lengths));
        }
        let c = &self.continuation;
        if !(c.ds_min > 0.0 && c.ds_min <= c.ds && c.ds <= c.ds_max) {
            return Err(format!("continuation steps must satisfy 0 < ds_min <= ds <= ds_max, got {} {} {}", c.ds_min, c.ds, c.ds_max));
        }
        if c.max_steps < 2 {
            return Err("continuation.max_steps must be at least 2".into());
        }
        if !(self.stability.margin > 0.0) {
            return Err(format!("stability.margin must be positive, got {}", self.stability.margin));
        }
        let g = &self.map_analysis.mu_grid;
        if g.points == 0 || !(0.0 < g.start && g.start <= g.stop && g.stop < 1.0) {
            return Err(format!("map_analysis.mu_grid must lie in (0, 1) with start <= stop and points > 0, got {g:?}"));
        }
        if g.points > 1 && g.start == g.stop {
            return Err("map_analysis.mu_grid with several points needs start < stop".into());
        }
        if !(self.map_analysis.section_offset > 0.0 && self.map_analysis.section_offset < 1.0) {
            return Err(format!("map_analysis.section_offset must lie in (0, 1), got {}", self.map_analysis.section_offset));
        }
        let f = &self.output.formats;
        if f.contains(&Format::Plot) && !f.contains(&Format::Csv) {
            return Err("output.formats: plot scripts are built from the branch CSV files, add \"csv\"".into());
        }
        Ok(())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    /// SHA-256 of the canonical JSON form, so formatting and comments in the
    /// config text do not change it. The output directory is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        let canonical = serde_json::to_vec(&c).expect("config serializes");
        hex(&Sha256::digest(&canonical))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn sections_and_keys() {
        let cfg = ExperimentConfig::parse(
            "seed = 9\n[model]\nd = 0.05\n[pulse]\nlengths = [5, 7, 5]\nseed_pattern = \"interface\"\n\
             [map_analysis]\nenabled = true\nmu_grid = { start = 0.3, stop = 0.7, points = 5 }\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.model.d, 0.05);
        assert_eq!(cfg.pulse.lengths, [5, 7, 5]);
        assert_eq!(cfg.pulse.seed_pattern, SeedPattern::Interface);
        let grid = cfg.map_analysis.mu_grid.values();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[4], 0.7);
        for (g, want) in grid.iter().zip([0.3, 0.4, 0.5, 0.6, 0.7]) {
            assert!((g - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[model]\ninterval = [0.5, 1.2]",
            "[model]\nd = -1",
            "[pulse]\nlengths = [5, 7]",
            "[continuation]\nds_min = 0.5",
            "[model]\nmu = 0.3",
            "[output]\nformats = [\"plot\"]",
            "[stability]\nmargin = 0",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_ignores_layout() {
        let a = ExperimentConfig::parse("[model]\nd = 0.1\n").unwrap();
        let b = ExperimentConfig::parse("# comment\n\n[model]\n  d=0.1").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), ExperimentConfig::parse("[model]\nd = 0.2").unwrap().hash());
        let c = ExperimentConfig::parse("[model]\nd = 0.1\n[output]\ndirectory = \"elsewhere\"").unwrap();
        assert_eq!(a.hash(), c.hash());
    }
}
