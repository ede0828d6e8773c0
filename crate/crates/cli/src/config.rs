//! Experiment configuration: a JSON manifest plus flag overrides,
//! resolved to concrete values and hashed so that every output file can
//! name the exact configuration that produced it.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    EntangleSweep,
    ChshSweep,
    BellStates,
    Occupancy,
    Distinguishable,
    Hom,
    Teleport,
    ProcessTomo,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::EntangleSweep,
        Experiment::ChshSweep,
        Experiment::BellStates,
        Experiment::Occupancy,
        Experiment::Distinguishable,
        Experiment::Hom,
        Experiment::Teleport,
        Experiment::ProcessTomo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::EntangleSweep => "entangle-sweep",
            Experiment::ChshSweep => "chsh-sweep",
            Experiment::BellStates => "bell-states",
            Experiment::Occupancy => "occupancy",
            Experiment::Distinguishable => "distinguishable",
            Experiment::Hom => "hom",
            Experiment::Teleport => "teleport",
            Experiment::ProcessTomo => "process-tomo",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .with_context(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
                format!(
                    "unknown experiment '{name}'; expected one of {}",
                    names.join(", ")
                )
            })
    }
}

/// Interference-scan generation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomConfig {
    /// Baseline counts per point for the two-photon dip.
    pub dip_baseline: f64,
    /// Dip visibility used by the generator.
    pub dip_visibility: f64,
    /// Baseline counts per point for the four-photon peak.
    pub peak_baseline: f64,
    /// Peak visibility used by the generator.
    pub peak_visibility: f64,
    /// Inverse squared width of the scan feature.
    pub width_b: f64,
    /// Scan points and half-span of the delay axis.
    pub points: usize,
    pub span: f64,
    /// Integration seconds per point (dip scan).
    pub dip_duration_s: f64,
    /// Integration seconds per point (peak scan).
    pub peak_duration_s: f64,
}

impl Default for HomConfig {
    fn default() -> Self {
        Self {
            dip_baseline: 3000.0,
            dip_visibility: 0.977,
            peak_baseline: 4000.0,
            peak_visibility: 0.879,
            width_b: 0.5,
            points: 41,
            span: 5.0,
            dip_duration_s: 5.0,
            peak_duration_s: 1200.0,
        }
    }
}

/// Fully resolved experiment configuration. A fixed seed makes every
/// output byte-identical across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Mean counts per measurement setting when sampling.
    pub counts: f64,
    /// Exact-probability mode: theory curves and "sampled" points come
    /// from the same code path with infinite-count records.
    pub exact: bool,
    /// Coherence visibility of the projected state (1 = pure).
    pub visibility: f64,
    /// Distribution angle of the first photon.
    pub alpha: f64,
    /// Sweep grid over the second photon's angle.
    pub beta_start: f64,
    pub beta_stop: f64,
    pub beta_points: usize,
    /// Angles at which the two Bell states are reconstructed.
    pub bell_betas: [f64; 2],
    /// Occupancy grid size over [0, pi/2].
    pub occupancy_points: usize,
    pub bootstrap_resamples: usize,
    pub hom: HomConfig,
    /// Six-input average fidelity the depolarization knob is calibrated
    /// against.
    pub teleport_target_average: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            counts: 5000.0,
            exact: false,
            visibility: 1.0,
            alpha: FRAC_PI_4,
            beta_start: 0.0,
            beta_stop: PI,
            beta_points: 25,
            bell_betas: [0.776, 2.352],
            occupancy_points: 20,
            bootstrap_resamples: 100,
            hom: HomConfig::default(),
            teleport_target_average: 0.851,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: Self = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.counts > 0.0) {
            bail!("counts must be positive, got {}", self.counts);
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            bail!("visibility must lie in [0, 1], got {}", self.visibility);
        }
        if self.beta_points < 2 || self.occupancy_points < 2 {
            bail!("sweeps need at least 2 points");
        }
        if self.hom.points < 8 {
            bail!("scan needs at least 8 points");
        }
        if self.bell_betas[0] >= FRAC_PI_2 || self.bell_betas[1] < FRAC_PI_2 {
            bail!(
                "bell_betas must hold one angle below pi/2 (the plus state) and one at or above it, got {:?}",
                self.bell_betas
            );
        }
        Ok(())
    }

    /// Hash of the resolved configuration (including the experiment
    /// name), stamped into every output file. The output directory is
    /// excluded: where the files land is not part of the experiment.
    pub fn hash(&self, experiment: Experiment) -> String {
        #[derive(Serialize)]
        struct Stamp<'a> {
            experiment: &'a str,
            config: &'a ExperimentConfig,
        }
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        let text = serde_json::to_string(&Stamp {
            experiment: experiment.name(),
            config: &canonical,
        })
        .expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn beta_grid(&self) -> Vec<f64> {
        let n = self.beta_points;
        (0..n)
            .map(|i| {
                self.beta_start + (self.beta_stop - self.beta_start) * i as f64 / (n - 1) as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::from_name(e.name()).unwrap(), e);
        }
        assert!(Experiment::from_name("warp-drive").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let config = ExperimentConfig::default();
        let h1 = config.hash(Experiment::Hom);
        let h2 = config.hash(Experiment::Hom);
        assert_eq!(h1, h2);
        assert_ne!(h1, config.hash(Experiment::Teleport));
        let mut other = config.clone();
        other.seed = 8;
        assert_ne!(h1, other.hash(Experiment::Hom));
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut config = ExperimentConfig::default();
        config.visibility = 1.5;
        assert!(config.validate().is_err());
    }
}
