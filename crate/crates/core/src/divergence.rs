//! Empirical H-divergence, A-distance and the bound calculators.
//!
//! The bracketed quantity is `frac(source classified 0) + frac(target
//! classified 1)` and `d̂ = 2(1 − bracket)`. Min mode takes the bracket's
//! minimum over a family; fixed mode evaluates one discriminator as given.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::classifier::{fit_classifier, FitConfig};
use crate::error::{Error, Result};
use crate::nn::{ModelParams, Role};
use crate::synth::{Dataset, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// `h(x) = 1` iff `x[axis] > threshold`.
    Above,
    /// `h(x) = 1` iff `x[axis] <= threshold`; the complement of `Above`.
    AtOrBelow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisThreshold {
    pub axis: usize,
    pub threshold: f64,
    pub polarity: Polarity,
}

impl AxisThreshold {
    pub fn classify(&self, x: &[f64]) -> bool {
        let above = x[self.axis] > self.threshold;
        match self.polarity {
            Polarity::Above => above,
            Polarity::AtOrBelow => !above,
        }
    }

    pub fn flipped(&self) -> Self {
        Self {
            polarity: match self.polarity {
                Polarity::Above => Polarity::AtOrBelow,
                Polarity::AtOrBelow => Polarity::Above,
            },
            ..*self
        }
    }
}

/// A finite family of axis-aligned threshold classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisFamily {
    pub hypotheses: Vec<AxisThreshold>,
}

impl HypothesisFamily {
    pub fn new(hypotheses: Vec<AxisThreshold>) -> Self {
        Self { hypotheses }
    }

    /// Both polarities of every `(axis, threshold)` pair.
    pub fn flip_closed(axes_thresholds: &[(usize, f64)]) -> Self {
        let mut hypotheses = Vec::with_capacity(2 * axes_thresholds.len());
        for &(axis, threshold) in axes_thresholds {
            for polarity in [Polarity::Above, Polarity::AtOrBelow] {
                hypotheses.push(AxisThreshold {
                    axis,
                    threshold,
                    polarity,
                });
            }
        }
        Self { hypotheses }
    }

    /// Every distinct split on every axis: midpoints between consecutive
    /// distinct values plus `±∞`, in both polarities.
    pub fn from_data(sets: &[&[Vec<f64>]]) -> Result<Self> {
        let dim = sets
            .iter()
            .flat_map(|s| s.first())
            .map(|x| x.len())
            .next()
            .ok_or(Error::Empty("hypothesis family data"))?;
        let mut pairs = Vec::new();
        for axis in 0..dim {
            let mut vals: Vec<f64> = sets
                .iter()
                .flat_map(|s| s.iter().map(|x| x[axis]))
                .collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            pairs.push((axis, f64::NEG_INFINITY));
            for w in vals.windows(2) {
                pairs.push((axis, w[0] + (w[1] - w[0]) / 2.0));
            }
            pairs.push((axis, f64::INFINITY));
        }
        Ok(Self::flip_closed(&pairs))
    }

    pub fn is_flip_closed(&self) -> bool {
        let key =
            |h: &AxisThreshold| (h.axis, h.threshold.to_bits(), h.polarity == Polarity::Above);
        let set: std::collections::HashSet<_> = self.hypotheses.iter().map(key).collect();
        self.hypotheses
            .iter()
            .all(|h| set.contains(&key(&h.flipped())))
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceMode {
    #[serde(alias = "min")]
    MinOverFamily,
    #[serde(alias = "fixed")]
    FixedDiscriminator,
    Trained,
}

impl DivergenceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DivergenceMode::MinOverFamily => "min_over_family",
            DivergenceMode::FixedDiscriminator => "fixed_discriminator",
            DivergenceMode::Trained => "trained",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub mode: DivergenceMode,
    pub d_hat: f64,
    /// Bracket minimum in min and fixed modes; held-out error in trained mode.
    pub epsilon: f64,
    pub a_distance: f64,
    /// `frac(target classified 1)` for the minimizing or given discriminator.
    pub target_term: f64,
    /// `frac(source classified 0)` for the minimizing or given discriminator.
    pub source_term: f64,
    pub n_source: usize,
    pub n_target: usize,
    /// False when the family was not closed under complement.
    pub flip_closed: bool,
}

impl DivergenceReport {
    /// The bracket as `[target term + source term]`.
    pub fn bracket(&self) -> (f64, f64) {
        (self.target_term, self.source_term)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        kv("mode", format!("\"{}\"", self.mode.as_str()));
        kv("d_hat", format!("{:?}", self.d_hat));
        kv("epsilon", format!("{:?}", self.epsilon));
        kv("a_distance", format!("{:?}", self.a_distance));
        kv("target_term", format!("{:?}", self.target_term));
        kv("source_term", format!("{:?}", self.source_term));
        kv("n_source", self.n_source.to_string());
        kv("n_target", self.n_target.to_string());
        kv("flip_closed", self.flip_closed.to_string());
        if !self.flip_closed {
            kv(
                "warning",
                "\"family is not flip-closed; d_hat reported unclamped\"".into(),
            );
        }
        s
    }

    pub const CSV_HEADER: &'static str =
        "encoder,source,target,mode,n_source,n_target,epsilon,a_distance,d_hat";

    pub fn csv_row(&self, encoder: &str, source: &str, target: &str) -> String {
        format!(
            "{encoder},{source},{target},{},{},{},{:?},{:?},{:?}",
            self.mode.as_str(),
            self.n_source,
            self.n_target,
            self.epsilon,
            self.a_distance,
            self.d_hat
        )
    }
}

fn check_sets(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<usize> {
    if source.is_empty() {
        return Err(Error::Empty("source representation set"));
    }
    if target.is_empty() {
        return Err(Error::Empty("target representation set"));
    }
    let dim = source[0].len();
    if source.iter().chain(target).any(|x| x.len() != dim) {
        return Err(Error::shape(
            "h_divergence",
            "representations differ in width",
        ));
    }
    Ok(dim)
}

/// Number of sorted values strictly greater than `t`.
fn count_above(sorted: &[f64], t: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v <= t)
}

/// Exact `d̂` with the bracket minimized over every member of `family`.
pub fn exact_h_divergence(
    source: &[Vec<f64>],
    target: &[Vec<f64>],
    family: &HypothesisFamily,
) -> Result<DivergenceReport> {
    let dim = check_sets(source, target)?;
    if family.is_empty() {
        return Err(Error::Empty("hypothesis family"));
    }
    if let Some(h) = family.hypotheses.iter().find(|h| h.axis >= dim) {
        return Err(Error::shape(
            "exact_h_divergence",
            format!("axis {} beyond width {dim}", h.axis),
        ));
    }
    let sorted_axis = |set: &[Vec<f64>], axis: usize| {
        let mut v: Vec<f64> = set.iter().map(|x| x[axis]).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
        .map(|a| (sorted_axis(source, a), sorted_axis(target, a)))
        .collect();
    let (ns, nt) = (source.len() as f64, target.len() as f64);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for h in &family.hypotheses {
        let (s, t) = &axes[h.axis];
        let (s_above, t_above) = (count_above(s, h.threshold), count_above(t, h.threshold));
        let (s_one, t_one) = match h.polarity {
            Polarity::Above => (s_above, t_above),
            Polarity::AtOrBelow => (s.len() - s_above, t.len() - t_above),
        };
        let source_term = (s.len() - s_one) as f64 / ns;
        let target_term = t_one as f64 / nt;
        let sum = source_term + target_term;
        if sum < best.0 {
            best = (sum, target_term, source_term);
        }
    }
    let (eps, target_term, source_term) = best;
    Ok(DivergenceReport {
        mode: DivergenceMode::MinOverFamily,
        d_hat: 2.0 * (1.0 - eps),
        epsilon: eps,
        a_distance: 2.0 * (1.0 - eps),
        target_term,
        source_term,
        n_source: source.len(),
        n_target: target.len(),
        flip_closed: family.is_flip_closed(),
    })
}

/// `d̂` from a single discriminator's bracket, without minimization.
pub fn evaluate_fixed_discriminator<F>(
    source: &[Vec<f64>],
    target: &[Vec<f64>],
    eta: F,
) -> Result<DivergenceReport>
where
    F: Fn(&[f64]) -> bool,
{
    check_sets(source, target)?;
    let source_term = source.iter().filter(|x| !eta(x)).count() as f64 / source.len() as f64;
    let target_term = target.iter().filter(|x| eta(x)).count() as f64 / target.len() as f64;
    let sum = target_term + source_term;
    Ok(DivergenceReport {
        mode: DivergenceMode::FixedDiscriminator,
        d_hat: 2.0 * (1.0 - sum),
        epsilon: sum,
        a_distance: 2.0 * (1.0 - sum),
        target_term,
        source_term,
        n_source: source.len(),
        n_target: target.len(),
        flip_closed: true,
    })
}

/// Minimum per-domain sample count for [`trained_h_divergence`].
pub const TRAINED_MIN_SAMPLES: usize = 100;

/// Discriminator used when estimating divergence from a trained classifier.
pub fn default_divergence_fit() -> FitConfig {
    FitConfig {
        hidden: vec![32],
        epochs: 20,
        batch_size: 64,
        lr: 0.01,
    }
}

/// Column means and standard deviations of a matrix.
fn column_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.rows() as f64, x.cols());
    let mut mean = vec![0.0; d];
    for r in 0..x.rows() {
        for (m, v) in mean.iter_mut().zip(x.row_slice(r)) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for r in 0..x.rows() {
        for ((s, v), m) in var.iter_mut().zip(x.row_slice(r)).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    (mean, var.into_iter().map(|v| v.sqrt().max(1e-8)).collect())
}

fn standardize(x: &Tensor, mean: &[f64], std: &[f64]) -> Tensor {
    let d = x.cols();
    let mut out = x.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v = (*v - mean[i % d]) / std[i % d];
    }
    out
}

/// Trains a fresh domain classifier on frozen representations.
///
/// Every domain other than `target` is source. The classifier is fit on the
/// training split of standardized representations; `epsilon` is its
/// held-out error and `a_distance = 2(1 − ε)`. `d_hat` uses the held-out
/// bracket of the classifier and its complement.
pub fn trained_h_divergence(
    encoder: &ModelParams,
    dataset: &Dataset,
    target: &str,
    fit: &FitConfig,
    seed: u64,
) -> Result<DivergenceReport> {
    let t = dataset.present_domain(target)?;
    let n_target = dataset.samples.iter().filter(|s| s.domain == t).count();
    let n_source = dataset.samples.len() - n_target;
    for (what, found) in [("target", n_target), ("source", n_source)] {
        if found < TRAINED_MIN_SAMPLES {
            return Err(Error::InsufficientSamples {
                what: format!("{what} samples for trained divergence"),
                needed: TRAINED_MIN_SAMPLES,
                found,
            });
        }
    }
    let reps_of = |split: Split| -> Result<(Tensor, Vec<usize>)> {
        let samples = dataset.split(split);
        let (x, _) = Dataset::matrix(&samples)?;
        let dom = samples.iter().map(|s| usize::from(s.domain == t)).collect();
        Ok((encoder.forward(&x)?, dom))
    };
    let (train_x, train_y) = reps_of(Split::Train)?;
    let (eval_x, eval_y) = reps_of(Split::Eval)?;
    if !train_y.contains(&0)
        || !train_y.contains(&1)
        || !eval_y.contains(&0)
        || !eval_y.contains(&1)
    {
        return Err(Error::InsufficientSamples {
            what: "both domains in each split".into(),
            needed: 1,
            found: 0,
        });
    }
    let (mean, std) = column_stats(&train_x);
    let disc = fit_classifier(
        &standardize(&train_x, &mean, &std),
        &train_y,
        2,
        fit,
        seed,
        Role::Discriminator,
    )?;
    let preds = disc
        .forward(&standardize(&eval_x, &mean, &std))?
        .argmax_rows();

    let errors = preds.iter().zip(&eval_y).filter(|(p, y)| p != y).count();
    let epsilon = errors as f64 / eval_y.len() as f64;
    let n_s = eval_y.iter().filter(|&&y| y == 0).count() as f64;
    let n_t = eval_y.len() as f64 - n_s;
    let source_term = preds
        .iter()
        .zip(&eval_y)
        .filter(|(p, y)| **y == 0 && **p == 0)
        .count() as f64
        / n_s;
    let target_term = preds
        .iter()
        .zip(&eval_y)
        .filter(|(p, y)| **y == 1 && **p == 1)
        .count() as f64
        / n_t;
    let bracket = source_term + target_term;
    let (target_term, source_term, bracket) = if 2.0 - bracket < bracket {
        (1.0 - target_term, 1.0 - source_term, 2.0 - bracket)
    } else {
        (target_term, source_term, bracket)
    };
    Ok(DivergenceReport {
        mode: DivergenceMode::Trained,
        d_hat: 2.0 * (1.0 - bracket),
        epsilon,
        a_distance: 2.0 * (1.0 - epsilon),
        target_term,
        source_term,
        n_source: n_s as usize,
        n_target: n_t as usize,
        flip_closed: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    /// Empirical source risk.
    pub r_s: f64,
    /// Per-domain sample count.
    pub n: f64,
    /// VC-dimension surrogate.
    pub d: f64,
    pub delta: f64,
    pub beta: f64,
    pub d_hat: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::OutOfRange(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.d >= 1.0 && self.d.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "d must be at least 1, got {}",
                self.d
            )));
        }
        if !(self.n > self.d && self.n.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "n = {} must exceed d = {}",
                self.n, self.d
            )));
        }
        for (name, v) in [
            ("r_s", self.r_s),
            ("beta", self.beta),
            ("d_hat", self.d_hat),
        ] {
            if !v.is_finite() {
                return Err(Error::OutOfRange(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// VC-dimension surrogate: the discriminator's parameter count.
pub fn vc_surrogate(discriminator: &ModelParams) -> f64 {
    discriminator.param_count() as f64
}

/// `R_S + sqrt((4/n)(d ln(2en/d) + ln(4/δ))) + d̂ + 4 sqrt((1/n)(d ln(2n/d) + ln(4/δ))) + β`.
pub fn target_risk_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let BoundInputs {
        r_s,
        n,
        d,
        delta,
        beta,
        d_hat,
    } = *inputs;
    let conf = (4.0 / delta).ln();
    let first = (4.0 / n * (d * (2.0 * std::f64::consts::E * n / d).ln() + conf)).sqrt();
    let second = 4.0 * (1.0 / n * (d * (2.0 * n / d).ln() + conf)).sqrt();
    // d_hat enters last so that bound(x) == bound(0) + x bit for bit
    Ok(r_s + first + second + beta + d_hat)
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

fn haussler_numerator(hypotheses: u64, delta: f64) -> Result<f64> {
    if hypotheses == 0 {
        return Err(Error::OutOfRange(
            "hypothesis class must be non-empty".into(),
        ));
    }
    check_unit_open("delta", delta)?;
    Ok((hypotheses as f64).ln() + (1.0 / delta).ln())
}

/// Smallest `M` with `(ln|T| + ln(1/δ)) / M <= ε`.
pub fn haussler_sample_complexity(hypotheses: u64, delta: f64, epsilon: f64) -> Result<u64> {
    let num = haussler_numerator(hypotheses, delta)?;
    check_unit_open("epsilon", epsilon)?;
    Ok((num / epsilon).ceil() as u64)
}

/// `(ln|T| + ln(1/δ)) / M`.
pub fn haussler_epsilon(hypotheses: u64, delta: f64, samples: u64) -> Result<f64> {
    let num = haussler_numerator(hypotheses, delta)?;
    if samples == 0 {
        return Err(Error::OutOfRange("sample count must be positive".into()));
    }
    Ok(num / samples as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleCheck {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d_ac: f64,
    pub d_ab_plus_bc: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// `d[i][j]` over the shared family.
    pub distances: Vec<Vec<f64>>,
    pub identity_holds: bool,
    pub symmetry_holds: bool,
    /// Pairs with disjoint supports whose distance was not positive.
    pub positivity_failures: Vec<(usize, usize)>,
    pub triangles: Vec<TriangleCheck>,
}

impl MetricReport {
    pub fn all_pass(&self) -> bool {
        self.identity_holds
            && self.symmetry_holds
            && self.positivity_failures.is_empty()
            && self.triangles.iter().all(|t| t.holds)
    }
}

/// Slack for the triangle inequality; distances are exact multiples of
/// `2 / n` up to float rounding.
const TRIANGLE_SLACK: f64 = 1e-12;

/// Checks the metric axioms of `d̂` on at least three sets, using one
/// flip-closed family built from all of them.
pub fn metric_axiom_check(sets: &[Vec<Vec<f64>>]) -> Result<MetricReport> {
    if sets.len() < 3 {
        return Err(Error::InsufficientSamples {
            what: "representation sets for metric check".into(),
            needed: 3,
            found: sets.len(),
        });
    }
    let refs: Vec<&[Vec<f64>]> = sets.iter().map(|s| s.as_slice()).collect();
    let family = HypothesisFamily::from_data(&refs)?;
    let k = sets.len();
    let mut distances = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            distances[i][j] = exact_h_divergence(&sets[i], &sets[j], &family)?.d_hat;
        }
    }
    let identity_holds = (0..k).all(|i| distances[i][i] == 0.0);
    let symmetry_holds = (0..k).all(|i| (0..k).all(|j| distances[i][j] == distances[j][i]));
    let mut positivity_failures = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let disjoint = !sets[i].iter().any(|x| sets[j].contains(x));
            if disjoint && distances[i][j] <= 0.0 {
                positivity_failures.push((i, j));
            }
        }
    }
    let mut triangles = Vec::new();
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                if a == b || b == c || a == c {
                    continue;
                }
                let d_ac = distances[a][c];
                let sum = distances[a][b] + distances[b][c];
                triangles.push(TriangleCheck {
                    a,
                    b,
                    c,
                    d_ac,
                    d_ab_plus_bc: sum,
                    holds: d_ac <= sum + TRIANGLE_SLACK,
                });
            }
        }
    }
    Ok(MetricReport {
        distances,
        identity_holds,
        symmetry_holds,
        positivity_failures,
        triangles,
    })
}
