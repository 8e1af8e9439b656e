//! Experiment configuration.
//!
//! Every section is optional and every field falls back to its default, so an
//! empty JSON object is a valid config. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context};
use serde::{Deserialize, Serialize};
use tdcim_core::analysis::{DseSpec, MonteCarloSpec, PatternKind, VddScaling};
use tdcim_core::array::{ArrayConfig, EnergyParams, Fidelity};
use tdcim_core::cell::Solver;
use tdcim_core::chain::ChainConfig;
use tdcim_core::device::FeFetParams;
use tdcim_core::fabric::FabricConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub rows: usize,
    pub cols: usize,
    pub v_read: f64,
    pub solver: Solver,
    pub fidelity: Fidelity,
    pub energy: EnergyParams,
    /// Seed of the device-variation stream used when programming cells.
    pub seed: u64,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            rows: 32,
            cols: 32,
            v_read: 1.0,
            solver: Solver::RailReferenced,
            fidelity: Fidelity::Divider,
            energy: EnergyParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_trials: usize,
    pub sigma_vth: f64,
    pub v_read_sweep: Vec<f64>,
    pub chain_lengths: Vec<usize>,
    pub sense_margin: f64,
    pub seed: u64,
    /// Stored/input generator for the chain study.
    pub pattern: PatternKind,
}

impl Default for McSection {
    fn default() -> Self {
        let s = MonteCarloSpec::default();
        Self {
            n_trials: s.n_trials,
            sigma_vth: s.sigma_vth,
            v_read_sweep: s.v_read_sweep,
            chain_lengths: s.chain_lengths,
            sense_margin: s.sense_margin,
            seed: s.seed,
            pattern: PatternKind::CamFlips,
        }
    }
}

impl McSection {
    pub fn spec(&self) -> MonteCarloSpec {
        MonteCarloSpec {
            n_trials: self.n_trials,
            sigma_vth: self.sigma_vth,
            v_read_sweep: self.v_read_sweep.clone(),
            chain_lengths: self.chain_lengths.clone(),
            sense_margin: self.sense_margin,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdcSection {
    pub n_features: usize,
    pub dim: usize,
    pub quant_bits: u32,
    pub seed: u64,
    /// CSV dataset; a synthetic one is generated when absent.
    pub dataset: Option<PathBuf>,
    /// Leading fraction of the examples used for training.
    pub train_fraction: f64,
    pub n_classes: usize,
    pub per_class: usize,
    pub spread: f64,
    /// Tile pool size for the benchmark report.
    pub tiles: usize,
    pub task: String,
}

impl Default for HdcSection {
    fn default() -> Self {
        Self {
            n_features: 16,
            dim: 512,
            quant_bits: 4,
            seed: 1,
            dataset: None,
            train_fraction: 0.5,
            n_classes: 2,
            per_class: 100,
            spread: 0.1,
            tiles: 16,
            task: "synthetic".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// When set, replaces the array, Monte Carlo and HDC seeds.
    pub seed: Option<u64>,
    pub device: FeFetParams,
    pub chain: ChainConfig,
    pub array: ArraySection,
    pub mc: McSection,
    pub dse: DseSpec,
    pub vdd_scaling: VddScaling,
    pub hdc: HdcSection,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Applies command-line overrides and propagates the global seed.
    pub fn resolve(mut self, seed: Option<u64>, fidelity: Option<Fidelity>) -> Self {
        if seed.is_some() {
            self.seed = seed;
        }
        if let Some(s) = self.seed {
            self.array.seed = s;
            self.mc.seed = s;
            self.hdc.seed = s;
        }
        if let Some(f) = fidelity {
            self.array.fidelity = f;
        }
        self
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.device.validate()?;
        self.chain.validate()?;
        self.array_config().validate()?;
        self.mc.spec().validate()?;
        self.dse.validate()?;
        let h = &self.hdc;
        ensure!(h.n_features > 0 && h.dim > 0, "hdc.n_features and hdc.dim must be positive");
        ensure!((1..=31).contains(&h.quant_bits), "hdc.quant_bits must be in 1..=31");
        ensure!(h.train_fraction > 0.0 && h.train_fraction < 1.0, "hdc.train_fraction must be in (0, 1)");
        ensure!(h.n_classes > 0 && h.per_class > 0, "hdc.n_classes and hdc.per_class must be positive");
        ensure!(h.tiles >= 2, "hdc.tiles must be at least 2");
        Ok(())
    }

    /// One tile built from the device, chain and array sections.
    pub fn array_config(&self) -> ArrayConfig {
        let a = &self.array;
        ArrayConfig {
            v_read: a.v_read,
            solver: a.solver,
            energy: a.energy,
            ..ArrayConfig::new(a.rows, a.cols).with_device(self.device).with_chain(self.chain)
        }
    }

    pub fn fabric_config(&self) -> FabricConfig {
        FabricConfig { tile: self.array_config(), fidelity: self.array.fidelity, seed: self.array.seed }
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf).or_else(|| self.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_all_defaults() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = ExperimentConfig::from_json(r#"{"device": {"sigma_vth": 0.05}, "mc": {"n_trials": 7}}"#).unwrap();
        assert_eq!(c.device.sigma_vth, 0.05);
        assert_eq!(c.device.vth_low, FeFetParams::default().vth_low);
        assert_eq!(c.mc.n_trials, 7);
        assert_eq!(c.mc.chain_lengths, vec![32, 64, 128]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"devcie": {}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"chain": {"c_lod": 1e-15}}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"mc": {"n_trials": 0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"array": {"cols": 31}}"#).is_err());
    }

    #[test]
    fn seed_override_reaches_every_stream() {
        let c = ExperimentConfig::default().resolve(Some(9), Some(Fidelity::Logical));
        assert_eq!((c.array.seed, c.mc.seed, c.hdc.seed), (9, 9, 9));
        assert_eq!(c.array.fidelity, Fidelity::Logical);
    }

    #[test]
    fn round_trips_through_json() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }
}
