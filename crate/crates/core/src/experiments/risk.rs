//! Target risk of an average-optimal encoder versus target-focused ones.
//!
//! A path of `k` domains is interpolated from the target spec to the source
//! spec. Four arms are scored on the target's evaluation split:
//!
//! - `pooled_erm`: ERM over a sample drawn evenly from every path domain,
//! - `nci`: the same pooled sample trained with NCI toward the target,
//! - `target_erm`: ERM on the target's training split alone,
//! - `concept_probe`: a classifier reading only the target's concept block.
//!
//! The pooled sample has exactly as many training rows as the target alone,
//! so the arms differ in where their data comes from and not in how much
//! they see. The `symmetric` setting repeats everything with leak, concept
//! noise and block noise zeroed on both endpoints, so every path domain
//! renders the same features and no ordering is expected.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::parallel::parallel_map;
use super::report::{Cell, StudyReport, Verdict};
use super::stats::mean;
use super::wins;
use crate::autodiff::Tensor;
use crate::classifier::{fit_classifier, FitConfig};
use crate::error::{Error, Result};
use crate::nn::Role;
use crate::seeding;
use crate::synth::{generate, interpolate_domains, Dataset, DatasetConfig, Sample, Split};
use crate::training::{evaluate, risk_from_logits, train, Objective, TrainConfig};

pub const ASYMMETRIC: &str = "asymmetric";
pub const SYMMETRIC: &str = "symmetric";
pub const ARMS: [&str; 4] = ["pooled_erm", "nci", "target_erm", "concept_probe"];

/// Largest mean symmetric-setting gap, in 0/1 risk, still read as no gap.
pub const SYMMETRIC_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSpec {
    /// Template whose `domains` are the two path endpoints; `seed` is replaced per run.
    pub dataset: DatasetConfig,
    /// Endpoint that is the target; the other endpoint closes the path.
    pub target: String,
    /// Number of domains on the path, endpoints included.
    pub k: usize,
    /// Template for the neural arms; objective, target and seed are replaced.
    pub train: TrainConfig,
    pub probe: FitConfig,
    pub seeds: Vec<u64>,
}

impl Default for RiskSpec {
    fn default() -> Self {
        let mut dataset = super::benchmark::benchmark_dataset(0);
        dataset.domains.reverse();
        // a weaker leak than the benchmark keeps the target task unsaturated
        dataset.domains[0].label_leak = 1.0;
        dataset.num_supports = 2000;
        dataset.shared_fraction = 0.7;
        dataset.unique_fraction = 0.06;
        let mut train = super::benchmark::benchmark_train_config(Objective::Nci, 0);
        train.adv_weight = 1.0;
        Self {
            dataset,
            target: super::benchmark::TARGET.into(),
            k: 5,
            train,
            probe: FitConfig::default(),
            seeds: (0..10).collect(),
        }
    }
}

impl RiskSpec {
    fn endpoints(&self) -> Result<(usize, usize)> {
        if self.dataset.domains.len() != 2 {
            return Err(Error::config(
                "dataset.domains",
                "need exactly two endpoint domains",
            ));
        }
        let t = self.dataset.domain_index(&self.target)?;
        Ok((t, 1 - t))
    }

    pub fn validate(&self) -> Result<()> {
        self.endpoints()?;
        if self.k < 3 {
            return Err(Error::config(
                "k",
                format!("need at least 3 path domains, got {}", self.k),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        self.train.validate()?;
        self.path_config(ASYMMETRIC, 0)?.validate()
    }

    /// The k-domain dataset config for one setting and seed.
    pub fn path_config(&self, setting: &str, seed: u64) -> Result<DatasetConfig> {
        let (t, s) = self.endpoints()?;
        let mut a = self.dataset.domains[t].clone();
        let mut b = self.dataset.domains[s].clone();
        if setting == SYMMETRIC {
            for d in [&mut a, &mut b] {
                d.concept_noise = 0.0;
                d.label_leak = 0.0;
                d.block_noise = 0.0;
            }
        }
        let mut dc = self.dataset.clone();
        dc.domains = interpolate_domains(&a, &b, self.k)?;
        dc.seed = seed;
        Ok(dc)
    }
}

/// Training rows drawn evenly from every domain, totalling `budget`, with no
/// support drawn twice; evaluation rows are kept whole. Domains earlier in
/// config order absorb the remainder.
///
/// Distinct supports keep the pooled sample's concept count equal to a
/// single domain's at the same budget.
pub fn pooled_subsample(ds: &Dataset, budget: usize, seed: u64) -> Result<Dataset> {
    let n = ds.config.domains.len();
    let mut pools: Vec<Vec<&Sample>> = (0..n)
        .map(|d| {
            let mut train = ds.samples_in(d, Split::Train);
            let tag = format!("risk:pool:{}", ds.config.domains[d].name);
            train.shuffle(&mut seeding::stream(seed, &tag));
            train
        })
        .collect();
    let mut used = std::collections::HashSet::new();
    let mut chosen: Vec<Vec<Sample>> = vec![Vec::new(); n];
    for d in 0..n {
        let quota = budget / n + usize::from(d < budget % n);
        for s in pools[d].drain(..) {
            if chosen[d].len() == quota {
                break;
            }
            if used.insert(s.support_id) {
                chosen[d].push(s.clone());
            }
        }
        if chosen[d].len() < quota {
            return Err(Error::InsufficientSamples {
                what: format!("pooled quota for domain {}", ds.config.domains[d].name),
                needed: quota,
                found: chosen[d].len(),
            });
        }
    }
    let mut samples = Vec::with_capacity(budget + ds.samples.len() / 5);
    for (d, mut kept) in chosen.into_iter().enumerate() {
        kept.extend(ds.samples_in(d, Split::Eval).into_iter().cloned());
        kept.sort_by_key(|s| s.support_id);
        samples.extend(kept);
    }
    Ok(Dataset {
        config: ds.config.clone(),
        samples,
        warnings: ds.warnings.clone(),
    })
}

fn cell(
    setting: &str,
    arm: &str,
    seed: u64,
    accuracy: f64,
    risk: f64,
    zero_one: f64,
    n: usize,
) -> Cell {
    Cell {
        setting: setting.into(),
        arm: arm.into(),
        x: 0.0,
        seed,
        accuracy,
        risk,
        zero_one,
        d_hat: None,
        train_samples: n,
    }
}

fn run_arm(spec: &RiskSpec, setting: &str, seed: u64, arm: &str) -> Result<Cell> {
    let ds = generate(&spec.path_config(setting, seed)?)?;
    let t = ds.domain_index(&spec.target)?;
    let budget = ds.samples_in(t, Split::Train).len();
    let mut tc = spec.train.clone();
    tc.seed = seed;
    let (data, objective, target) = match arm {
        "pooled_erm" => (pooled_subsample(&ds, budget, seed)?, Objective::Erm, None),
        "nci" => (
            pooled_subsample(&ds, budget, seed)?,
            Objective::Nci,
            Some(spec.target.clone()),
        ),
        "target_erm" => (ds.select_domains(&[&spec.target])?, Objective::Erm, None),
        "concept_probe" => {
            let cd = ds.config.concept_dim;
            let concept = |split| -> Result<_> {
                let rows = ds.samples_in(t, split);
                let x: Vec<&[f64]> = rows.iter().map(|s| &s.features[..cd]).collect();
                Ok((
                    Tensor::from_rows(&x)?,
                    rows.iter().map(|s| s.label).collect::<Vec<_>>(),
                ))
            };
            let (xt, yt) = concept(Split::Train)?;
            let (xe, ye) = concept(Split::Eval)?;
            let probe_seed = seeding::derive_seed(seed, "risk:concept_probe");
            let model = fit_classifier(
                &xt,
                &yt,
                ds.num_classes(),
                &spec.probe,
                probe_seed,
                Role::Head,
            )?;
            let r = risk_from_logits(&model.forward(&xe)?, &ye)?;
            return Ok(cell(
                setting,
                arm,
                seed,
                1.0 - r.zero_one,
                r.cross_entropy,
                r.zero_one,
                yt.len(),
            ));
        }
        other => return Err(Error::config("arm", format!("unknown arm `{other}`"))),
    };
    tc.objective = objective;
    tc.target_domain = target;
    let model = train(&data, &tc)?;
    let ev = evaluate(&model, &data, &spec.target)?;
    let n = data.split(Split::Train).len();
    Ok(cell(
        setting,
        arm,
        seed,
        ev.accuracy,
        ev.risk.cross_entropy,
        ev.risk.zero_one,
        n,
    ))
}

/// Runs every arm in both settings for every seed.
pub fn risk_ordering_study(spec: &RiskSpec, jobs: usize) -> Result<StudyReport> {
    spec.validate()?;
    let mut runs = Vec::new();
    for setting in [ASYMMETRIC, SYMMETRIC] {
        for &seed in &spec.seeds {
            for arm in ARMS {
                runs.push((setting, seed, arm));
            }
        }
    }
    let cells = parallel_map(&runs, jobs, |&(setting, seed, arm)| {
        run_arm(spec, setting, seed, arm)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let config_echo =
        toml::to_string(spec).map_err(|e| Error::parse("risk spec", e.to_string()))?;
    Ok(StudyReport {
        study: "risk_ordering".into(),
        verdicts: risk_verdicts(&cells),
        cells,
        notes: vec![format!(
            "path of {} domains from `{}`; pooled arms are budget-matched to the target's training rows",
            spec.k, spec.target
        )],
        config_echo,
    })
}

/// Per-seed `risk(arm) - risk(pooled_erm)` in 0/1 risk within one setting.
fn gaps_vs_pooled(cells: &[Cell], setting: &str, arm: &str) -> Vec<f64> {
    let get = |seed: u64, a: &str| {
        cells
            .iter()
            .find(|c| c.setting == setting && c.seed == seed && c.arm == a)
            .map(|c| c.zero_one)
    };
    let mut seeds: Vec<u64> = cells
        .iter()
        .filter(|c| c.setting == setting)
        .map(|c| c.seed)
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
        .into_iter()
        .filter_map(|s| Some(get(s, arm)? - get(s, "pooled_erm")?))
        .collect()
}

pub fn risk_verdicts(cells: &[Cell]) -> Vec<Verdict> {
    let mut out = Vec::new();
    for arm in ["target_erm", "nci"] {
        let g = gaps_vs_pooled(cells, ASYMMETRIC, arm);
        if g.is_empty() {
            continue;
        }
        let n = g.len();
        let need = (n * 9).div_ceil(10);
        let ok = wins(g.iter().map(|&d| d <= 0.0));
        out.push(Verdict {
            name: format!("{arm}_risk_le_pooled"),
            passed: ok >= need,
            detail: format!(
                "0/1 target risk of {arm} <= pooled_erm on {ok}/{n} seeds (need >= {need}); mean difference {:.4}",
                mean(&g)
            ),
        });
    }
    let g = gaps_vs_pooled(cells, SYMMETRIC, "target_erm");
    if !g.is_empty() {
        let m = mean(&g);
        out.push(Verdict {
            name: "symmetric_control".into(),
            passed: m.abs() <= SYMMETRIC_TOLERANCE,
            detail: format!(
                "mean 0/1 risk gap target_erm - pooled_erm = {m:.4} with symmetric domains (need |gap| <= {SYMMETRIC_TOLERANCE})"
            ),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_subsample_matches_the_budget_and_keeps_eval() {
        let spec = RiskSpec::default();
        let ds = generate(&spec.path_config(ASYMMETRIC, 4).unwrap()).unwrap();
        let t = ds.domain_index(&spec.target).unwrap();
        let budget = ds.samples_in(t, Split::Train).len();
        let pooled = pooled_subsample(&ds, budget, 4).unwrap();
        assert_eq!(pooled.split(Split::Train).len(), budget);
        assert_eq!(pooled.split(Split::Eval).len(), ds.split(Split::Eval).len());
        let per: Vec<usize> = (0..spec.k)
            .map(|d| pooled.samples_in(d, Split::Train).len())
            .collect();
        assert!(
            per.iter().max().unwrap() - per.iter().min().unwrap() <= 1,
            "{per:?}"
        );
        let mut ids: Vec<u64> = pooled
            .split(Split::Train)
            .iter()
            .map(|s| s.support_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), budget);
    }

    #[test]
    fn symmetric_path_has_no_asymmetry_knobs() {
        let spec = RiskSpec::default();
        let dc = spec.path_config(SYMMETRIC, 0).unwrap();
        assert_eq!(dc.domains.len(), spec.k);
        assert!(dc
            .domains
            .iter()
            .all(|d| d.label_leak == 0.0 && d.concept_noise == 0.0 && d.block_noise == 0.0));
        assert_eq!(dc.domains[0].name, spec.target);
    }

    #[test]
    fn verdicts_use_zero_one_gaps() {
        let mut cells = Vec::new();
        for seed in 0..10 {
            cells.push(cell(ASYMMETRIC, "pooled_erm", seed, 0.8, 0.5, 0.2, 1));
            cells.push(cell(ASYMMETRIC, "target_erm", seed, 0.9, 0.3, 0.1, 1));
            cells.push(cell(
                ASYMMETRIC,
                "nci",
                seed,
                0.85,
                0.4,
                if seed == 0 { 0.3 } else { 0.15 },
                1,
            ));
            cells.push(cell(SYMMETRIC, "pooled_erm", seed, 0.9, 0.3, 0.10, 1));
            cells.push(cell(SYMMETRIC, "target_erm", seed, 0.9, 0.3, 0.11, 1));
        }
        let v = risk_verdicts(&cells);
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|v| v.passed), "{v:?}");
    }
}
