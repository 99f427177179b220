//! The fixed two-domain asymmetric benchmark.
//!
//! The target renders a clean concept plus a strong label leak in its own
//! block; the source renders a corrupted concept and no leak. About 30% of
//! supports are not shared (15% unique to each domain) and each domain holds
//! 2000 samples.

use serde::{Deserialize, Serialize};

use super::parallel::parallel_map;
use super::report::{Cell, StudyReport, Verdict};
use super::stats::mean;
use super::wins;
use crate::classifier::FitConfig;
use crate::divergence::{default_divergence_fit, trained_h_divergence};
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::seeding;
use crate::synth::{generate, DatasetConfig, DomainSpec, Split};
use crate::training::{evaluate, train, Objective, TrainConfig};

pub const SOURCE: &str = "source";
pub const TARGET: &str = "target";

/// Minimum seed-mean accuracy gap of NCI over commutative.
pub const MIN_MEAN_GAP: f64 = 0.02;

/// Benchmark dataset for one seed.
pub fn benchmark_dataset(seed: u64) -> DatasetConfig {
    DatasetConfig {
        seed,
        concept_dim: 8,
        num_classes: 8,
        // 1648 shared + 352 unique per domain = 2000 samples per domain
        num_supports: 2352,
        domains: vec![
            DomainSpec::new(SOURCE, 1.5, 0.0, 8, 0.3),
            DomainSpec::new(TARGET, 0.0, 2.0, 8, 0.3),
        ],
        shared_fraction: 0.7,
        unique_fraction: 0.15,
        samples_per_domain: None,
        complementary: None,
    }
}

/// Training configuration shared by every objective on the benchmark.
pub fn benchmark_train_config(objective: Objective, seed: u64) -> TrainConfig {
    TrainConfig {
        objective,
        target_domain: Some(TARGET.to_string()),
        lr: 0.005,
        epochs: 30,
        batch_size: 64,
        adv_weight: 20.0,
        disc_steps: 1,
        seed,
        encoder_hidden: vec![64],
        rep_dim: 16,
        rep_activation: Activation::Tanh,
        head_hidden: Vec::new(),
        disc_hidden: vec![32],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    /// Template; `seed` is replaced per run.
    pub dataset: DatasetConfig,
    /// Template; `objective` and `seed` are replaced per run.
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub objectives: Vec<Objective>,
    /// Fresh discriminator for the held-out divergence of each encoder.
    pub divergence: FitConfig,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            dataset: benchmark_dataset(0),
            train: benchmark_train_config(Objective::Nci, 0),
            seeds: (0..10).collect(),
            objectives: vec![Objective::Erm, Objective::Commutative, Objective::Nci],
            divergence: default_divergence_fit(),
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.objectives.is_empty() {
            return Err(Error::config("objectives", "need at least one objective"));
        }
        let target = self.train.target_domain.as_deref().unwrap_or(TARGET);
        self.dataset.domain_index(target)?;
        Ok(())
    }

    fn target(&self) -> &str {
        self.train.target_domain.as_deref().unwrap_or(TARGET)
    }
}

fn run_cell(spec: &BenchmarkSpec, seed: u64, objective: Objective) -> Result<Cell> {
    let mut dc = spec.dataset.clone();
    dc.seed = seed;
    let ds = generate(&dc)?;
    let mut tc = spec.train.clone();
    tc.objective = objective;
    tc.seed = seed;
    tc.target_domain = Some(spec.target().to_string());
    let model = train(&ds, &tc)?;
    let ev = evaluate(&model, &ds, spec.target())?;
    let div = trained_h_divergence(
        &model.encoder,
        &ds,
        spec.target(),
        &spec.divergence,
        seeding::derive_seed(seed, "benchmark:divergence"),
    )?;
    Ok(Cell {
        setting: String::new(),
        arm: objective.as_str().to_string(),
        x: 0.0,
        seed,
        accuracy: ev.accuracy,
        risk: ev.risk.cross_entropy,
        zero_one: ev.risk.zero_one,
        d_hat: Some(div.d_hat),
        train_samples: ds.split(Split::Train).len(),
    })
}

/// Trains every objective on every seed and scores the NCI-vs-commutative claims.
pub fn benchmark_study(spec: &BenchmarkSpec, jobs: usize) -> Result<StudyReport> {
    spec.validate()?;
    let runs: Vec<(u64, Objective)> = spec
        .seeds
        .iter()
        .flat_map(|&s| spec.objectives.iter().map(move |&o| (s, o)))
        .collect();
    let cells = parallel_map(&runs, jobs, |&(s, o)| run_cell(spec, s, o))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let config_echo =
        toml::to_string(spec).map_err(|e| Error::parse("benchmark spec", e.to_string()))?;
    Ok(StudyReport {
        study: "benchmark".into(),
        verdicts: benchmark_verdicts(&cells),
        cells,
        notes: Vec::new(),
        config_echo,
    })
}

/// `(seed, nci cell, commutative cell)` for every seed that has both.
fn paired(cells: &[Cell]) -> Vec<(u64, &Cell, &Cell)> {
    let find = |seed: u64, arm: Objective| {
        cells
            .iter()
            .find(|c| c.seed == seed && c.arm == arm.as_str())
    };
    let mut seeds: Vec<u64> = cells.iter().map(|c| c.seed).collect();
    seeds.dedup();
    seeds
        .into_iter()
        .filter_map(|s| {
            Some((
                s,
                find(s, Objective::Nci)?,
                find(s, Objective::Commutative)?,
            ))
        })
        .collect()
}

/// Accuracy and divergence verdicts; empty unless both NCI and commutative ran.
pub fn benchmark_verdicts(cells: &[Cell]) -> Vec<Verdict> {
    let pairs = paired(cells);
    if pairs.is_empty() {
        return Vec::new();
    }
    let n = pairs.len();
    let gaps: Vec<f64> = pairs
        .iter()
        .map(|(_, a, b)| a.accuracy - b.accuracy)
        .collect();
    let acc_wins = wins(gaps.iter().map(|&g| g > 0.0));
    let mean_gap = mean(&gaps);
    let need_acc = (n * 8).div_ceil(10);
    let div_wins = wins(pairs.iter().map(|(_, a, b)| match (a.d_hat, b.d_hat) {
        (Some(x), Some(y)) => x < y,
        _ => false,
    }));
    let need_div = (n * 9).div_ceil(10);
    vec![
        Verdict {
            name: "nci_beats_commutative".into(),
            passed: mean_gap >= MIN_MEAN_GAP && acc_wins >= need_acc,
            detail: format!(
                "mean target accuracy gap {mean_gap:.4} (need >= {MIN_MEAN_GAP}); per-seed wins {acc_wins}/{n} (need >= {need_acc})"
            ),
        },
        Verdict {
            name: "nci_lower_divergence".into(),
            passed: div_wins >= need_div,
            detail: format!("d_hat(nci) < d_hat(commutative) on {div_wins}/{n} seeds (need >= {need_div})"),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_has_2000_samples_per_domain() {
        let ds = generate(&benchmark_dataset(3)).unwrap();
        for d in 0..2 {
            assert_eq!(ds.samples.iter().filter(|s| s.domain == d).count(), 2000);
        }
    }

    fn cell(arm: &str, seed: u64, acc: f64, d_hat: f64) -> Cell {
        Cell {
            setting: String::new(),
            arm: arm.into(),
            x: 0.0,
            seed,
            accuracy: acc,
            risk: 0.0,
            zero_one: 1.0 - acc,
            d_hat: Some(d_hat),
            train_samples: 1,
        }
    }

    #[test]
    fn verdicts_follow_the_seed_thresholds() {
        let mut cells = Vec::new();
        for s in 0..10 {
            let nci_acc = if s < 8 { 0.9 } else { 0.8 };
            cells.push(cell("commutative", s, 0.85, 1.0));
            cells.push(cell("nci", s, nci_acc, if s < 9 { 0.5 } else { 1.5 }));
        }
        let v = benchmark_verdicts(&cells);
        // mean gap 0.8*0.05 - 0.2*0.05 = 0.03, wins 8/10
        assert!(v[0].passed, "{}", v[0].detail);
        assert!(v[1].passed, "{}", v[1].detail);
        cells[19].d_hat = Some(0.1);
        cells[17].d_hat = Some(2.0);
        cells[15].d_hat = Some(2.0);
        assert!(!benchmark_verdicts(&cells)[1].passed);
    }
}
