//! Complementarity sweep: target accuracy as one source contributes more
//! supports the target never sees.
//!
//! At grid point `f` the complementary source trades a fraction `f / ρ` of
//! its shared training supports for fresh supports of its own, so its
//! training budget is unchanged while the union of concepts seen in
//! training grows. Only the complementary source's shared pool shrinks.

use serde::{Deserialize, Serialize};

use super::parallel::parallel_map;
use super::report::{Cell, StudyReport, Verdict};
use super::stats::{mean, spearman};
use super::wins;
use crate::error::{Error, Result};
use crate::synth::{generate, Complementarity, DatasetConfig, DomainSpec, Split};
use crate::training::{evaluate, train, Objective, TrainConfig};

pub const MIN_SPEARMAN: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Template without `complementary`; `seed` is replaced per run.
    pub base: DatasetConfig,
    pub complementary_source: String,
    pub target: String,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub objectives: Vec<Objective>,
    /// Template; objective, target and seed are replaced per run.
    pub train: TrainConfig,
}

/// `0.05, 0.10, ..., 0.50`.
pub fn default_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

impl Default for SweepSpec {
    fn default() -> Self {
        let mut train = super::benchmark::benchmark_train_config(Objective::Nci, 0);
        train.target_domain = Some("target".into());
        train.adv_weight = 1.0;
        // few supports in a wide concept space: the target is short of concepts,
        // which is the regime where extra source supports can matter
        Self {
            base: DatasetConfig {
                seed: 0,
                concept_dim: 16,
                num_classes: 8,
                num_supports: 600,
                domains: vec![
                    DomainSpec::new("source", 0.0, 0.0, 8, 0.3),
                    DomainSpec::new("target", 0.0, 0.5, 8, 0.3),
                ],
                shared_fraction: 0.5,
                unique_fraction: 0.0,
                samples_per_domain: None,
                complementary: None,
            },
            complementary_source: "source".into(),
            target: "target".into(),
            grid: default_grid(),
            seeds: (0..10).collect(),
            objectives: vec![Objective::Nci],
            train,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.base.domain_index(&self.complementary_source)?;
        self.base.domain_index(&self.target)?;
        if self.complementary_source == self.target {
            return Err(Error::config(
                "complementary_source",
                "must differ from the target",
            ));
        }
        if self.grid.is_empty() {
            return Err(Error::config("grid", "need at least one fraction"));
        }
        if let Some(f) = self.grid.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::config(
                "grid",
                format!("fractions must lie in (0, 1), got {f}"),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.objectives.is_empty() {
            return Err(Error::config("objectives", "need at least one objective"));
        }
        self.train.validate()
    }

    /// Dataset config at one grid point.
    pub fn config_at(&self, fraction: f64, seed: u64) -> DatasetConfig {
        let mut dc = self.base.clone();
        dc.seed = seed;
        dc.complementary = Some(Complementarity {
            domain: self.complementary_source.clone(),
            fraction,
        });
        dc
    }
}

fn run_cell(spec: &SweepSpec, fraction: f64, seed: u64, objective: Objective) -> Result<Cell> {
    let ds = generate(&spec.config_at(fraction, seed))?;
    let mut tc = spec.train.clone();
    tc.objective = objective;
    tc.seed = seed;
    tc.target_domain = Some(spec.target.clone());
    let model = train(&ds, &tc)?;
    let ev = evaluate(&model, &ds, &spec.target)?;
    Ok(Cell {
        setting: String::new(),
        arm: objective.as_str().to_string(),
        x: fraction,
        seed,
        accuracy: ev.accuracy,
        risk: ev.risk.cross_entropy,
        zero_one: ev.risk.zero_one,
        d_hat: None,
        train_samples: ds.split(Split::Train).len(),
    })
}

/// Trains each objective at each feasible grid point and seed.
///
/// Grid points whose dataset config is infeasible are skipped with a note.
pub fn complementarity_sweep(spec: &SweepSpec, jobs: usize) -> Result<StudyReport> {
    spec.validate()?;
    let mut notes = Vec::new();
    let mut grid = Vec::new();
    for &f in &spec.grid {
        match spec.config_at(f, spec.seeds[0]).validate() {
            Ok(()) => grid.push(f),
            Err(e) => notes.push(format!("skipped fraction {f}: {e}")),
        }
    }
    let mut runs = Vec::new();
    for &objective in &spec.objectives {
        for &f in &grid {
            for &seed in &spec.seeds {
                runs.push((f, seed, objective));
            }
        }
    }
    let cells = parallel_map(&runs, jobs, |&(f, s, o)| run_cell(spec, f, s, o))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let config_echo =
        toml::to_string(spec).map_err(|e| Error::parse("sweep spec", e.to_string()))?;
    Ok(StudyReport {
        study: "complementarity_sweep".into(),
        verdicts: sweep_verdicts(&cells),
        cells,
        notes,
        config_echo,
    })
}

/// Budget, endpoint and trend verdicts for the `nci` arm, or the first arm
/// when NCI was not run.
pub fn sweep_verdicts(cells: &[Cell]) -> Vec<Verdict> {
    let Some(first) = cells.first() else {
        return Vec::new();
    };
    let arm = if cells.iter().any(|c| c.arm == Objective::Nci.as_str()) {
        Objective::Nci.as_str()
    } else {
        first.arm.as_str()
    };
    let mine: Vec<&Cell> = cells.iter().filter(|c| c.arm == arm).collect();
    let mut xs: Vec<f64> = mine.iter().map(|c| c.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut seeds: Vec<u64> = mine.iter().map(|c| c.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let acc = |x: f64, s: u64| {
        mine.iter()
            .find(|c| c.x == x && c.seed == s)
            .map(|c| c.accuracy)
    };

    let budgets: Vec<usize> = {
        let mut b: Vec<usize> = cells.iter().map(|c| c.train_samples).collect();
        b.sort_unstable();
        b.dedup();
        b
    };
    let mut out = vec![Verdict {
        name: "constant_budget".into(),
        passed: budgets.len() == 1,
        detail: format!("distinct training-set sizes across cells: {budgets:?}"),
    }];

    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let pairs: Vec<bool> = seeds
        .iter()
        .filter_map(|&s| Some(acc(hi, s)? >= acc(lo, s)?))
        .collect();
    let need = (pairs.len() * 8).div_ceil(10);
    let ok = wins(pairs.iter().copied());
    out.push(Verdict {
        name: format!("{arm}_endpoint_gain"),
        passed: xs.len() > 1 && ok >= need,
        detail: format!(
            "accuracy at {hi} >= accuracy at {lo} on {ok}/{} seeds (need >= {need})",
            pairs.len()
        ),
    });

    let means: Vec<f64> = xs
        .iter()
        .map(|&x| {
            mean(
                &mine
                    .iter()
                    .filter(|c| c.x == x)
                    .map(|c| c.accuracy)
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let rho = spearman(&xs, &means);
    out.push(Verdict {
        name: format!("{arm}_trend"),
        passed: rho >= MIN_SPEARMAN,
        detail: format!(
            "Spearman(fraction, mean accuracy) = {rho:.4} over {} points (need >= {MIN_SPEARMAN})",
            xs.len()
        ),
    });
    out
}
