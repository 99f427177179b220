//! The lab's configuration file.
//!
//! One TOML document whose sections are all optional. Every table rejects
//! unknown keys, and deserialization errors carry the dotted path of the
//! offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::FitConfig;
use crate::divergence::{
    default_divergence_fit, AxisThreshold, BoundInputs, DivergenceMode, Polarity,
};
use crate::error::{Error, Result};
use crate::experiments::{BenchmarkSpec, RiskSpec, SweepSpec};
use crate::synth::DatasetConfig;
use crate::training::TrainConfig;

/// Files read instead of generated or trained.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl Inputs {
    fn is_empty(&self) -> bool {
        self.dataset.is_none() && self.checkpoint.is_none()
    }
}

fn default_mode() -> DivergenceMode {
    DivergenceMode::MinOverFamily
}

fn default_discriminator() -> AxisThreshold {
    AxisThreshold {
        axis: 0,
        threshold: 0.0,
        polarity: Polarity::Above,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceSection {
    #[serde(default = "default_mode")]
    pub mode: DivergenceMode,
    /// Falls back to the training target, then to `"target"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Discriminator fit in trained mode, which needs `inputs.checkpoint`.
    #[serde(default = "default_divergence_fit")]
    pub fit: FitConfig,
    /// The single discriminator scored in fixed mode.
    #[serde(default = "default_discriminator")]
    pub discriminator: AxisThreshold,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DivergenceSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            target: None,
            fit: default_divergence_fit(),
            discriminator: default_discriminator(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HausslerInputs {
    pub hypotheses: u64,
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for HausslerInputs {
    fn default() -> Self {
        Self {
            hypotheses: 20,
            delta: 0.05,
            epsilon: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default)]
    pub haussler: HausslerInputs,
    /// Target-risk bound inputs; the bound is skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<BoundInputs>,
}

fn default_random_triples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSection {
    #[serde(default = "default_random_triples")]
    pub random_triples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for AlgebraSection {
    fn default() -> Self {
        Self {
            random_triples: default_random_triples(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(default, skip_serializing_if = "Inputs::is_empty")]
    pub inputs: Inputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<AlgebraSection>,
}

impl LabConfig {
    /// Parses and validates every present section.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de =
            toml::Deserializer::parse(text).map_err(|e| Error::parse("config", e.to_string()))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.into_inner().message().to_string();
            Error::Config { path, message }
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Nested parts are checked before the specs that hold them, so errors
    /// name the innermost section.
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = &self.dataset {
            d.validate().map_err(|e| e.within("dataset"))?;
        }
        if let Some(t) = &self.train {
            t.validate().map_err(|e| e.within("train"))?;
        }
        if let Some(b) = &self.bounds {
            if let Some(r) = &b.risk {
                r.validate()
                    .map_err(|e| Error::config("bounds.risk", e.to_string()))?;
            }
        }
        if let Some(b) = &self.benchmark {
            b.dataset
                .validate()
                .map_err(|e| e.within("benchmark.dataset"))?;
            b.train
                .validate()
                .map_err(|e| e.within("benchmark.train"))?;
            b.validate().map_err(|e| e.within("benchmark"))?;
        }
        if let Some(r) = &self.risk {
            r.train.validate().map_err(|e| e.within("risk.train"))?;
            r.validate().map_err(|e| e.within("risk"))?;
        }
        if let Some(s) = &self.sweep {
            s.base.validate().map_err(|e| e.within("sweep.base"))?;
            s.train.validate().map_err(|e| e.within("sweep.train"))?;
            s.validate().map_err(|e| e.within("sweep"))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::parse("config", e.to_string()))
    }

    /// Replaces every seed in the present sections. Seed lists keep their
    /// length and become `seed, seed + 1, ...`.
    pub fn apply_seed(&mut self, seed: u64) {
        let shift = |seeds: &mut Vec<u64>| {
            for (i, s) in seeds.iter_mut().enumerate() {
                *s = seed.wrapping_add(i as u64);
            }
        };
        if let Some(d) = &mut self.dataset {
            d.seed = seed;
        }
        if let Some(t) = &mut self.train {
            t.seed = seed;
        }
        if let Some(d) = &mut self.divergence {
            d.seed = seed;
        }
        if let Some(b) = &mut self.benchmark {
            b.dataset.seed = seed;
            b.train.seed = seed;
            shift(&mut b.seeds);
        }
        if let Some(r) = &mut self.risk {
            r.dataset.seed = seed;
            r.train.seed = seed;
            shift(&mut r.seeds);
        }
        if let Some(s) = &mut self.sweep {
            s.base.seed = seed;
            s.train.seed = seed;
            shift(&mut s.seeds);
        }
        if let Some(a) = &mut self.algebra {
            a.seed = seed;
        }
    }
}
