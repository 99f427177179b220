//! Synthetic multi-domain datasets with block-orthogonal structure.
//!
//! Every sample has the layout `[concept | block_0 | block_1 | ...]`. The
//! concept block holds a (possibly corrupted) draw of the shared concept and
//! each domain writes only into its own block, so blocks of different domains
//! are disjoint coordinate sets. Labels come from a fixed random linear
//! scorer applied to the clean concept, so the same support has the same
//! label in every domain that renders it.
//!
//! Two knobs create label-information asymmetry between domains:
//! `label_leak` injects a class-dependent direction into the domain's own
//! block, and `concept_noise` corrupts the concept block.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::classifier::{accuracy, fit_classifier, FitConfig};
use crate::error::{Error, Result};
use crate::nn::Role;
use crate::seeding;

/// Support ids whose hash falls in this bucket form the evaluation split.
const EVAL_SALT: u64 = 0x0E7A_15EE_D5EE_D5ED;

/// Deterministic 80/20 split keyed only on the support id, so a support is
/// held out in every domain at once.
pub fn is_eval_support(support_id: u64) -> bool {
    seeding::splitmix64(support_id ^ EVAL_SALT).is_multiple_of(5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub name: String,
    /// Std of the Gaussian corruption added to the concept block.
    pub concept_noise: f64,
    /// Magnitude of the class-dependent signal written into the own block.
    pub label_leak: f64,
    pub block_dim: usize,
    pub block_noise: f64,
}

impl DomainSpec {
    pub fn new(
        name: impl Into<String>,
        concept_noise: f64,
        label_leak: f64,
        block_dim: usize,
        block_noise: f64,
    ) -> Self {
        Self {
            name: name.into(),
            concept_noise,
            label_leak,
            block_dim,
            block_noise,
        }
    }
}

/// Swaps part of one domain's shared supports for supports only it has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Complementarity {
    pub domain: String,
    /// Fraction of `num_supports`; must not exceed `shared_fraction`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub concept_dim: usize,
    pub num_classes: usize,
    pub num_supports: usize,
    pub domains: Vec<DomainSpec>,
    pub shared_fraction: f64,
    pub unique_fraction: f64,
    /// Renderings per domain, cycling through its supports; one per support when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_domain: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complementary: Option<Complementarity>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub support_id: u64,
    /// Index into `DatasetConfig::domains`.
    pub domain: usize,
    pub label: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
    All,
}

impl Split {
    pub fn contains(self, support_id: u64) -> bool {
        match self {
            Split::Train => !is_eval_support(support_id),
            Split::Eval => is_eval_support(support_id),
            Split::All => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    /// Grouped by domain (config order), then by support id.
    pub samples: Vec<Sample>,
    pub warnings: Vec<String>,
}

fn finite_non_negative(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            path,
            format!("must be a finite non-negative number, got {v}"),
        ))
    }
}

fn unit_interval(path: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(path, format!("must lie in [0, 1], got {v}")))
    }
}

const FRACTION_SLACK: f64 = 1e-9;

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.concept_dim == 0 {
            return Err(Error::config("concept_dim", "must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("num_classes", "need at least two classes"));
        }
        if self.num_supports == 0 {
            return Err(Error::config("num_supports", "must be positive"));
        }
        if self.domains.is_empty() {
            return Err(Error::config("domains", "need at least one domain"));
        }
        for (i, d) in self.domains.iter().enumerate() {
            let p = |f: &str| format!("domains[{i}].{f}");
            if d.name.is_empty() || d.name.contains([',', '"', '\n', '\r']) {
                return Err(Error::config(
                    p("name"),
                    format!("invalid domain name {:?}", d.name),
                ));
            }
            if self.domains[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::config(
                    p("name"),
                    format!("duplicate domain name {:?}", d.name),
                ));
            }
            if d.block_dim == 0 {
                return Err(Error::config(p("block_dim"), "must be positive"));
            }
            finite_non_negative(&p("concept_noise"), d.concept_noise)?;
            finite_non_negative(&p("label_leak"), d.label_leak)?;
            finite_non_negative(&p("block_noise"), d.block_noise)?;
        }
        unit_interval("shared_fraction", self.shared_fraction)?;
        unit_interval("unique_fraction", self.unique_fraction)?;
        let d = self.domains.len() as f64;
        let used = self.shared_fraction + d * self.unique_fraction;
        if used > 1.0 + FRACTION_SLACK {
            return Err(Error::config(
                "unique_fraction",
                format!("shared_fraction + domains·unique_fraction = {used} exceeds 1"),
            ));
        }
        if used <= 0.0 {
            return Err(Error::config(
                "shared_fraction",
                "no supports would be assigned",
            ));
        }
        if self.samples_per_domain == Some(0) {
            return Err(Error::config("samples_per_domain", "must be positive"));
        }
        if let Some(c) = &self.complementary {
            if !self.domains.iter().any(|d| d.name == c.domain) {
                return Err(Error::config(
                    "complementary.domain",
                    format!("unknown domain {:?}", c.domain),
                ));
            }
            if !(c.fraction > 0.0 && c.fraction <= 1.0) {
                return Err(Error::config(
                    "complementary.fraction",
                    "must lie in (0, 1]",
                ));
            }
            if c.fraction > self.shared_fraction + FRACTION_SLACK {
                return Err(Error::config(
                    "complementary.fraction",
                    format!(
                        "{} exceeds shared_fraction {}",
                        c.fraction, self.shared_fraction
                    ),
                ));
            }
            if used + c.fraction > 1.0 + FRACTION_SLACK {
                return Err(Error::config(
                    "complementary.fraction",
                    format!("total support usage {} exceeds 1", used + c.fraction),
                ));
            }
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.concept_dim + self.domains.iter().map(|d| d.block_dim).sum::<usize>()
    }

    /// Coordinate range of domain `i`'s own block.
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.concept_dim + self.domains[..i].iter().map(|d| d.block_dim).sum::<usize>();
        start..start + self.domains[i].block_dim
    }

    pub fn domain_index(&self, name: &str) -> Result<usize> {
        self.domains
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UnknownDomain(name.to_string()))
    }

    /// Count of supports every domain shares, and count unique to each domain.
    ///
    /// Unique counts are floored; the rounding remainder joins the shared pool.
    pub fn support_counts(&self) -> (usize, usize) {
        let n = self.num_supports as f64;
        let d = self.domains.len();
        let unique = (self.unique_fraction * n + FRACTION_SLACK).floor() as usize;
        let used = (((self.shared_fraction + d as f64 * self.unique_fraction) * n).round()
            as usize)
            .min(self.num_supports);
        (used.saturating_sub(d * unique), unique)
    }
}

/// Support ids rendered by each domain, sorted ascending.
pub fn assign_supports(config: &DatasetConfig) -> Result<Vec<Vec<u64>>> {
    config.validate()?;
    let (shared, unique) = config.support_counts();
    let shared_ids: Vec<u64> = (0..shared as u64).collect();
    let mut next = shared as u64;
    let mut sets: Vec<Vec<u64>> = Vec::with_capacity(config.domains.len());
    for _ in &config.domains {
        let mut ids = shared_ids.clone();
        ids.extend(next..next + unique as u64);
        next += unique as u64;
        sets.push(ids);
    }
    if let Some(c) = &config.complementary {
        let idx = config.domain_index(&c.domain)?;
        let mut shared_train: Vec<u64> = shared_ids
            .iter()
            .copied()
            .filter(|&i| !is_eval_support(i))
            .collect();
        // measured on the training side so the domain's training budget stays fixed
        let k = ((c.fraction / config.shared_fraction) * shared_train.len() as f64 + FRACTION_SLACK)
            .floor() as usize;
        let k = k.min(shared_train.len());
        shared_train.shuffle(&mut seeding::stream(config.seed, "complementary"));
        let removed: std::collections::BTreeSet<u64> = shared_train[..k].iter().copied().collect();
        let mut fresh = Vec::with_capacity(k);
        while fresh.len() < k {
            if !is_eval_support(next) {
                fresh.push(next);
            }
            next += 1;
        }
        let set = &mut sets[idx];
        set.retain(|id| !removed.contains(id));
        set.extend(fresh);
        set.sort_unstable();
    }
    Ok(sets)
}

fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn concept_of(seed: u64, support_id: u64, dim: usize) -> Vec<f64> {
    normal_vec(
        &mut seeding::indexed_stream(seed, "concept", support_id),
        dim,
    )
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn unit_rows<R: Rng>(rng: &mut R, rows: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let mut v = normal_vec(rng, dim);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.iter_mut().for_each(|x| *x /= norm);
            v
        })
        .collect()
}

/// Fixed random linear scorer `[num_classes][concept_dim]`.
///
/// Rows are unit length so no class wins its argmax region by norm alone.
fn label_scorer(config: &DatasetConfig) -> Vec<Vec<f64>> {
    unit_rows(
        &mut seeding::stream(config.seed, "label_scorer"),
        config.num_classes,
        config.concept_dim,
    )
}

/// Unit-norm class directions `[num_classes][block_dim]` for one domain's leak.
fn leak_directions(config: &DatasetConfig, spec: &DomainSpec) -> Vec<Vec<f64>> {
    let mut rng = seeding::stream(config.seed, &format!("leak:{}", spec.name));
    unit_rows(&mut rng, config.num_classes, spec.block_dim)
}

pub fn label_of(scorer: &[Vec<f64>], concept: &[f64]) -> usize {
    let scores: Vec<f64> = scorer
        .iter()
        .map(|w| w.iter().zip(concept).map(|(a, b)| a * b).sum())
        .collect();
    argmax(&scores)
}

/// Generates every domain's samples from `config`.
pub fn generate(config: &DatasetConfig) -> Result<Dataset> {
    let supports = assign_supports(config)?;
    let mut warnings = Vec::new();
    if config.concept_dim < 64 && config.num_classes as u64 > 1u64 << config.concept_dim {
        warnings.push(format!(
            "{} classes exceed 2^{} concept directions; classes may not be separable",
            config.num_classes, config.concept_dim
        ));
    }
    let scorer = label_scorer(config);
    let dim = config.feature_dim();
    let cd = config.concept_dim;

    let mut cache: std::collections::HashMap<u64, (Vec<f64>, usize)> =
        std::collections::HashMap::new();
    let mut samples = Vec::new();
    for (di, spec) in config.domains.iter().enumerate() {
        let ids = &supports[di];
        if ids.is_empty() {
            return Err(Error::config(
                format!("domains[{di}]"),
                "domain has no supports",
            ));
        }
        let leak = leak_directions(config, spec);
        let block = config.block_range(di);
        let mut rng = seeding::stream(config.seed, &format!("render:{}", spec.name));
        let count = config.samples_per_domain.unwrap_or(ids.len());
        let mut rendered = Vec::with_capacity(count);
        for j in 0..count {
            let id = ids[j % ids.len()];
            let (concept, label) = cache
                .entry(id)
                .or_insert_with(|| {
                    let c = concept_of(config.seed, id, cd);
                    let y = label_of(&scorer, &c);
                    (c, y)
                })
                .clone();
            let mut features = vec![0.0; dim];
            let concept_jitter = normal_vec(&mut rng, cd);
            for k in 0..cd {
                features[k] = concept[k] + spec.concept_noise * concept_jitter[k];
            }
            let block_jitter = normal_vec(&mut rng, spec.block_dim);
            for (k, pos) in block.clone().enumerate() {
                features[pos] =
                    spec.label_leak * leak[label][k] + spec.block_noise * block_jitter[k];
            }
            rendered.push((
                j,
                Sample {
                    support_id: id,
                    domain: di,
                    label,
                    features,
                },
            ));
        }
        rendered.sort_by_key(|(j, s)| (s.support_id, *j));
        samples.extend(rendered.into_iter().map(|(_, s)| s));
    }
    Ok(Dataset {
        config: config.clone(),
        samples,
        warnings,
    })
}

/// True iff no coordinate outside the concept block is used by two domains.
pub fn verify_orthogonality(ds: &Dataset) -> bool {
    cross_block_dots(ds).iter().all(|&(_, _, v)| v == 0.0)
}

/// For every domain pair `(a, b)`, `Σ_j A_a[j]·A_b[j]` over non-concept
/// coordinates, where `A_d[j]` is the summed magnitude of coordinate `j`
/// across domain `d`'s samples. Zero exactly when the block masks are disjoint.
pub fn cross_block_dots(ds: &Dataset) -> Vec<(usize, usize, f64)> {
    let cd = ds.config.concept_dim;
    let width = ds.config.feature_dim() - cd;
    let n = ds.config.domains.len();
    let mut mass = vec![vec![0.0; width]; n];
    for s in &ds.samples {
        for (m, v) in mass[s.domain].iter_mut().zip(&s.features[cd..]) {
            *m += v.abs();
        }
    }
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let dot = mass[a].iter().zip(&mass[b]).map(|(x, y)| x * y).sum();
            out.push((a, b, dot));
        }
    }
    out
}

impl Dataset {
    pub fn domain_names(&self) -> Vec<&str> {
        self.config
            .domains
            .iter()
            .map(|d| d.name.as_str())
            .collect()
    }

    pub fn domain_index(&self, name: &str) -> Result<usize> {
        self.config.domain_index(name)
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Index of a domain that has at least one sample.
    pub fn present_domain(&self, name: &str) -> Result<usize> {
        let idx = self.domain_index(name)?;
        if self.samples.iter().any(|s| s.domain == idx) {
            Ok(idx)
        } else {
            Err(Error::UnknownDomain(name.to_string()))
        }
    }

    pub fn samples_in(&self, domain: usize, split: Split) -> Vec<&Sample> {
        self.samples
            .iter()
            .filter(|s| s.domain == domain && split.contains(s.support_id))
            .collect()
    }

    pub fn split(&self, split: Split) -> Vec<&Sample> {
        self.samples
            .iter()
            .filter(|s| split.contains(s.support_id))
            .collect()
    }

    /// Keeps only the named domains' samples; the feature layout is unchanged.
    pub fn select_domains(&self, names: &[&str]) -> Result<Dataset> {
        let keep: Vec<usize> = names
            .iter()
            .map(|n| self.domain_index(n))
            .collect::<Result<_>>()?;
        Ok(Dataset {
            config: self.config.clone(),
            samples: self
                .samples
                .iter()
                .filter(|s| keep.contains(&s.domain))
                .cloned()
                .collect(),
            warnings: self.warnings.clone(),
        })
    }

    /// A single-domain dataset with features `[concept | own block]`.
    pub fn restrict_to_domain(&self, name: &str) -> Result<Dataset> {
        let idx = self.domain_index(name)?;
        let cd = self.config.concept_dim;
        let block = self.config.block_range(idx);
        let mut config = self.config.clone();
        config.domains = vec![self.config.domains[idx].clone()];
        config.complementary = None;
        let samples = self
            .samples
            .iter()
            .filter(|s| s.domain == idx)
            .map(|s| {
                let mut features = s.features[..cd].to_vec();
                features.extend_from_slice(&s.features[block.clone()]);
                Sample {
                    support_id: s.support_id,
                    domain: 0,
                    label: s.label,
                    features,
                }
            })
            .collect();
        Ok(Dataset {
            config,
            samples,
            warnings: self.warnings.clone(),
        })
    }

    /// Stacks sample features into a matrix with aligned labels.
    pub fn matrix(samples: &[&Sample]) -> Result<(Tensor, Vec<usize>)> {
        let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
        let x = Tensor::from_rows(&rows)?;
        Ok((x, samples.iter().map(|s| s.label).collect()))
    }

    /// Writes `path` (CSV) plus the `<path>.meta.toml` sidecar.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let dim = self.feature_dim();
        let mut out = String::from("support_id,domain,label");
        for j in 0..dim {
            write!(out, ",f{j}").expect("string write");
        }
        out.push('\n');
        let mut rows: Vec<&Sample> = self.samples.iter().collect();
        rows.sort_by(|a, b| {
            let na = &self.config.domains[a.domain].name;
            let nb = &self.config.domains[b.domain].name;
            na.cmp(nb).then(a.support_id.cmp(&b.support_id))
        });
        for s in rows {
            write!(
                out,
                "{},{},{}",
                s.support_id, self.config.domains[s.domain].name, s.label
            )
            .expect("string write");
            for v in &s.features {
                write!(out, ",{}", format_sig9(*v)).expect("string write");
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        fs::write(meta_path(path), self.metadata()?)?;
        Ok(())
    }

    fn metadata(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Meta<'a> {
            format: &'static str,
            seed: u64,
            rows: usize,
            feature_dim: usize,
            config: &'a DatasetConfig,
        }
        toml::to_string(&Meta {
            format: DATASET_FORMAT,
            seed: self.config.seed,
            rows: self.samples.len(),
            feature_dim: self.feature_dim(),
            config: &self.config,
        })
        .map_err(|e| Error::parse("dataset metadata", e.to_string()))
    }

    /// Reads a dataset written by [`Dataset::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Dataset> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Meta {
            format: String,
            #[allow(dead_code)]
            seed: u64,
            rows: usize,
            feature_dim: usize,
            config: DatasetConfig,
        }
        let meta_text = fs::read_to_string(meta_path(path))?;
        let meta: Meta = toml::from_str(&meta_text)
            .map_err(|e| Error::parse("dataset metadata", e.to_string()))?;
        if meta.format != DATASET_FORMAT {
            return Err(Error::parse(
                "dataset metadata",
                format!("unsupported format {:?}", meta.format),
            ));
        }
        let config = meta.config;
        config.validate()?;
        let dim = config.feature_dim();
        if dim != meta.feature_dim {
            return Err(Error::parse(
                "dataset metadata",
                "feature_dim does not match config",
            ));
        }
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("dataset csv", "missing header"))?;
        if header.split(',').count() != 3 + dim {
            return Err(Error::parse(
                "dataset csv",
                "header width does not match metadata",
            ));
        }
        let mut samples = Vec::with_capacity(meta.rows);
        for (ln, line) in lines.enumerate() {
            let bad = |d: &str| Error::parse("dataset csv", format!("line {}: {d}", ln + 2));
            let mut fields = line.split(',');
            let support_id = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad("support_id"))?;
            let domain_name = fields.next().ok_or_else(|| bad("domain"))?;
            let domain = config.domain_index(domain_name)?;
            let label = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad("label"))?;
            let features: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|_| bad("feature")))
                .collect::<Result<_>>()?;
            if features.len() != dim {
                return Err(bad("feature count"));
            }
            samples.push(Sample {
                support_id,
                domain,
                label,
                features,
            });
        }
        if samples.len() != meta.rows {
            return Err(Error::parse(
                "dataset csv",
                "row count does not match metadata",
            ));
        }
        samples.sort_by_key(|s| (s.domain, s.support_id));
        Ok(Dataset {
            config,
            samples,
            warnings: Vec::new(),
        })
    }
}

const DATASET_FORMAT: &str = "nci-lab dataset v1";

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

/// Nine significant digits in scientific notation.
pub fn format_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Probe configuration used for label-information estimates.
pub fn probe_fit_config() -> FitConfig {
    FitConfig {
        hidden: vec![32],
        epochs: 30,
        batch_size: 64,
        lr: 0.01,
    }
}

/// Held-out accuracy of a fresh one-hidden-layer classifier on one domain.
///
/// Trains on the domain's training split using `[concept | own block]`
/// features and reports accuracy on its evaluation split.
pub fn probe_label_information(ds: &Dataset, domain: &str) -> Result<f64> {
    probe_with(ds, domain, &probe_fit_config())
}

pub fn probe_with(ds: &Dataset, domain: &str, fit: &FitConfig) -> Result<f64> {
    let local = ds.restrict_to_domain(domain)?;
    if local.samples.len() < 200 {
        return Err(Error::InsufficientSamples {
            what: format!("probe on domain {domain}"),
            needed: 200,
            found: local.samples.len(),
        });
    }
    let train = local.samples_in(0, Split::Train);
    let eval = local.samples_in(0, Split::Eval);
    if train.is_empty() || eval.is_empty() {
        return Err(Error::InsufficientSamples {
            what: format!("probe split on domain {domain}"),
            needed: 1,
            found: 0,
        });
    }
    let (xt, yt) = Dataset::matrix(&train)?;
    let (xe, ye) = Dataset::matrix(&eval)?;
    let seed = seeding::derive_seed(ds.config.seed, &format!("probe:{domain}"));
    let model = fit_classifier(&xt, &yt, ds.num_classes(), fit, seed, Role::Head)?;
    accuracy(&model, &xe, &ye)
}

/// `k` specs linearly interpolating the noise and leak knobs from `a` to `b`.
///
/// Endpoints are returned unchanged; interior specs are named `a_b_i`.
pub fn interpolate_domains(a: &DomainSpec, b: &DomainSpec, k: usize) -> Result<Vec<DomainSpec>> {
    if k < 2 {
        return Err(Error::OutOfRange(format!(
            "interpolation grid needs k >= 2, got {k}"
        )));
    }
    let lerp = |x: f64, y: f64, t: f64| x + (y - x) * t;
    let mut out = Vec::with_capacity(k);
    out.push(a.clone());
    for i in 1..k - 1 {
        let t = i as f64 / (k - 1) as f64;
        out.push(DomainSpec {
            name: format!("{}_{}_{i}", a.name, b.name),
            concept_noise: lerp(a.concept_noise, b.concept_noise, t),
            label_leak: lerp(a.label_leak, b.label_leak, t),
            block_dim: lerp(a.block_dim as f64, b.block_dim as f64, t).round() as usize,
            block_noise: lerp(a.block_noise, b.block_noise, t),
        });
    }
    out.push(b.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_domain(seed: u64, rho: f64, u: f64) -> DatasetConfig {
        DatasetConfig {
            seed,
            concept_dim: 4,
            num_classes: 3,
            num_supports: 200,
            domains: vec![
                DomainSpec::new("src", 1.0, 0.0, 3, 0.5),
                DomainSpec::new("tgt", 0.0, 2.0, 3, 0.5),
            ],
            shared_fraction: rho,
            unique_fraction: u,
            samples_per_domain: None,
            complementary: None,
        }
    }

    #[test]
    fn full_sharing_puts_every_support_in_every_domain() {
        let sets = assign_supports(&two_domain(1, 1.0, 0.0)).unwrap();
        assert_eq!(sets[0], (0..200).collect::<Vec<_>>());
        assert_eq!(sets[0], sets[1]);
    }

    #[test]
    fn support_accounting_is_exact() {
        let cfg = two_domain(1, 0.7, 0.15);
        let (shared, unique) = cfg.support_counts();
        assert_eq!((shared, unique), (140, 30));
        let sets = assign_supports(&cfg).unwrap();
        let common = sets[0].iter().filter(|i| sets[1].contains(i)).count();
        assert_eq!(common, 140);
        assert_eq!(sets[0].len() - common, 30);
    }

    #[test]
    fn rounding_remainder_goes_to_shared_pool() {
        let mut cfg = two_domain(1, 0.7, 0.15);
        cfg.num_supports = 2352;
        let (shared, unique) = cfg.support_counts();
        assert_eq!(unique, 352);
        assert_eq!(shared, 2352 - 2 * 352);
    }

    #[test]
    fn infeasible_fractions_are_rejected() {
        let err = generate(&two_domain(1, 0.8, 0.15)).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "unique_fraction"));
    }

    #[test]
    fn too_many_classes_warns_but_generates() {
        let mut cfg = two_domain(1, 1.0, 0.0);
        cfg.concept_dim = 1;
        cfg.num_classes = 3;
        let ds = generate(&cfg).unwrap();
        assert_eq!(ds.warnings.len(), 1);
    }

    #[test]
    fn blocks_are_disjoint_and_labels_consistent() {
        let ds = generate(&two_domain(3, 0.5, 0.25)).unwrap();
        assert!(verify_orthogonality(&ds));
        let mut labels = std::collections::HashMap::new();
        for s in &ds.samples {
            assert_eq!(*labels.entry(s.support_id).or_insert(s.label), s.label);
            let own = ds.config.block_range(s.domain);
            for (j, v) in s.features.iter().enumerate().skip(ds.config.concept_dim) {
                if !own.contains(&j) {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn copied_feature_breaks_orthogonality() {
        let mut ds = generate(&two_domain(3, 1.0, 0.0)).unwrap();
        let foreign = ds.config.block_range(1).start;
        let own = ds.config.block_range(0).start;
        let s = ds.samples.iter_mut().find(|s| s.domain == 0).unwrap();
        s.features[foreign] = s.features[own];
        assert!(!verify_orthogonality(&ds));
    }

    #[test]
    fn complementary_swap_keeps_training_budget() {
        let mut cfg = two_domain(5, 0.5, 0.0);
        cfg.num_supports = 1000;
        let train_count = |cfg: &DatasetConfig| {
            let sets = assign_supports(cfg).unwrap();
            sets.iter()
                .map(|s| s.iter().filter(|&&i| !is_eval_support(i)).count())
                .collect::<Vec<_>>()
        };
        let base = train_count(&cfg);
        for f in [0.05, 0.25, 0.5] {
            cfg.complementary = Some(Complementarity {
                domain: "src".into(),
                fraction: f,
            });
            assert_eq!(train_count(&cfg), base, "fraction {f}");
        }
        let sets = assign_supports(&cfg).unwrap();
        let overlap_train = sets[0]
            .iter()
            .filter(|i| !is_eval_support(**i) && sets[1].contains(i))
            .count();
        assert_eq!(
            overlap_train, 0,
            "at f = rho every training support is unique"
        );
    }

    #[test]
    fn samples_cycle_through_supports() {
        let mut cfg = two_domain(2, 1.0, 0.0);
        cfg.samples_per_domain = Some(450);
        let ds = generate(&cfg).unwrap();
        let src: Vec<_> = ds.samples.iter().filter(|s| s.domain == 0).collect();
        assert_eq!(src.len(), 450);
        assert_eq!(src.iter().filter(|s| s.support_id == 0).count(), 3);
        assert_eq!(src.iter().filter(|s| s.support_id == 199).count(), 2);
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let a = DomainSpec::new("a", 0.0, 1.0, 4, 1.0);
        let b = DomainSpec::new("b", 1.0, 0.0, 4, 1.0);
        assert_eq!(
            interpolate_domains(&a, &b, 2).unwrap(),
            vec![a.clone(), b.clone()]
        );
        let three = interpolate_domains(&a, &b, 3).unwrap();
        assert_eq!(three[1].concept_noise, 0.5);
        assert_eq!(three[1].label_leak, 0.5);
        assert!(interpolate_domains(&a, &b, 1).is_err());
    }

    #[test]
    fn probe_needs_two_hundred_samples() {
        let mut cfg = two_domain(2, 1.0, 0.0);
        cfg.num_supports = 150;
        let ds = generate(&cfg).unwrap();
        assert!(matches!(
            probe_label_information(&ds, "tgt"),
            Err(Error::InsufficientSamples { needed: 200, .. })
        ));
    }

    #[test]
    fn csv_round_trip_preserves_structure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = generate(&two_domain(9, 0.6, 0.2)).unwrap();
        ds.write_csv(&path).unwrap();
        let back = Dataset::read_csv(&path).unwrap();
        assert_eq!(back.config, ds.config);
        assert_eq!(back.samples.len(), ds.samples.len());
        for (a, b) in back.samples.iter().zip(&ds.samples) {
            assert_eq!(
                (a.support_id, a.domain, a.label),
                (b.support_id, b.domain, b.label)
            );
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-300));
            }
        }
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("support_id,domain,label,f0,"));
    }
}
