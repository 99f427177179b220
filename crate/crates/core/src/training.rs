//! Encoder, head and discriminator training under four objectives.
//!
//! Domain labels are fixed: the target domain is 1, every other domain 0.
//! Each minibatch runs `disc_steps` discriminator updates on frozen
//! representations, then one joint encoder+head update on
//! `task + adv_weight · adversarial`.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{bce_value, optimizer_step, OptimizerState, Tape, Tensor, Var, PROB_CLAMP};
use crate::error::{Error, Result};
use crate::nn::{Activation, Layer, ModelParams, ParamGrads, Role};
use crate::seeding;
use crate::synth::{Dataset, Sample, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Erm,
    Commutative,
    Conditional,
    Nci,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::Erm,
        Objective::Commutative,
        Objective::Conditional,
        Objective::Nci,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Erm => "erm",
            Objective::Commutative => "commutative",
            Objective::Conditional => "conditional",
            Objective::Nci => "nci",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::parse("objective", format!("unknown objective `{s}`")))
    }
}

fn default_adv_weight() -> f64 {
    1.0
}

fn default_disc_steps() -> usize {
    1
}

fn default_rep_activation() -> Activation {
    Activation::Relu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_domain: Option<String>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_adv_weight")]
    pub adv_weight: f64,
    #[serde(default = "default_disc_steps")]
    pub disc_steps: usize,
    pub seed: u64,
    pub encoder_hidden: Vec<usize>,
    pub rep_dim: usize,
    /// Activation of the encoder's output layer; hidden layers use relu.
    #[serde(default = "default_rep_activation")]
    pub rep_activation: Activation,
    #[serde(default)]
    pub head_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Erm,
            target_domain: None,
            lr: 0.005,
            epochs: 30,
            batch_size: 64,
            adv_weight: 1.0,
            disc_steps: 1,
            seed: 0,
            encoder_hidden: vec![32],
            rep_dim: 16,
            rep_activation: Activation::Relu,
            head_hidden: Vec::new(),
            disc_hidden: vec![32],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be a positive finite number"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if !(self.adv_weight >= 0.0 && self.adv_weight.is_finite()) {
            return Err(Error::config(
                "adv_weight",
                "must be a finite non-negative number",
            ));
        }
        if self.disc_steps == 0 {
            return Err(Error::config("disc_steps", "must be positive"));
        }
        if self.rep_dim == 0 {
            return Err(Error::config("rep_dim", "must be positive"));
        }
        for (name, widths) in [
            ("encoder_hidden", &self.encoder_hidden),
            ("head_hidden", &self.head_hidden),
            ("disc_hidden", &self.disc_hidden),
        ] {
            if widths.contains(&0) {
                return Err(Error::config(name, "hidden widths must be positive"));
            }
        }
        if self.objective != Objective::Erm && self.target_domain.is_none() {
            return Err(Error::config(
                "target_domain",
                format!("objective {} needs a target domain", self.objective),
            ));
        }
        Ok(())
    }

    /// Stable 64-bit digest of the serialized configuration.
    pub fn hash(&self) -> u64 {
        seeding::fnv1a(toml::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochLog {
    pub epoch: usize,
    pub task_loss: f64,
    pub adv_loss: f64,
    pub disc_loss: f64,
    pub train_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub domains: Vec<String>,
    pub num_classes: usize,
    pub encoder: ModelParams,
    pub head: ModelParams,
    pub discriminator: ModelParams,
    pub curve: Vec<EpochLog>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Risk {
    /// Mean clamped cross-entropy.
    pub cross_entropy: f64,
    pub zero_one: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub domain: String,
    pub accuracy: f64,
    pub risk: Risk,
}

/// `−[y ln η + (1−y) ln(1−η)]` with η clamped.
pub fn discriminator_loss(eta: f64, domain_label: f64) -> f64 {
    bce_value(eta, domain_label)
}

/// `−(1−y) ln η`: zero for target samples, a pull toward "target" for sources.
pub fn nci_encoder_loss(eta: f64, domain_label: f64) -> f64 {
    if domain_label == 1.0 {
        return 0.0;
    }
    -(1.0 - domain_label) * eta.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln()
}

fn one_hot(labels: &[usize], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(labels.len(), classes);
    for (i, &y) in labels.iter().enumerate() {
        t.data_mut()[i * classes + y] = 1.0;
    }
    t
}

fn dims_of(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

/// A training minibatch in tensor form.
struct Batch {
    x: Tensor,
    labels: Vec<usize>,
    domain: Vec<f64>,
}

impl Batch {
    fn gather(samples: &[&Sample], idx: &[usize], target: Option<usize>) -> Result<Self> {
        let rows: Vec<&[f64]> = idx
            .iter()
            .map(|&i| samples[i].features.as_slice())
            .collect();
        Ok(Self {
            x: Tensor::from_rows(&rows)?,
            labels: idx.iter().map(|&i| samples[i].label).collect(),
            domain: idx
                .iter()
                .map(|&i| {
                    if Some(samples[i].domain) == target {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        })
    }
}

impl TrainedModel {
    pub fn objective(&self) -> Objective {
        self.config.objective
    }

    pub fn conditional_input(&self) -> bool {
        self.config.objective == Objective::Conditional
    }

    /// Encoder outputs for a feature matrix.
    pub fn represent(&self, x: &Tensor) -> Result<Tensor> {
        self.encoder.forward(x)
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.head.forward(&self.encoder.forward(x)?)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(self.logits(x)?.argmax_rows())
    }

    /// Discriminator probability of "target" for each representation row.
    pub fn discriminate(&self, reps: &Tensor, labels: &[usize]) -> Result<Vec<f64>> {
        let input = if self.conditional_input() {
            reps.concat_cols(&one_hot(labels, self.num_classes))?
        } else {
            reps.clone()
        };
        Ok(self
            .discriminator
            .forward(&input)?
            .data()
            .iter()
            .map(|&z| 1.0 / (1.0 + (-z).exp()))
            .collect())
    }

    /// Records the adversarial term for `reps` on `tape`.
    ///
    /// Returns `None` for erm, whose adversarial term is identically zero.
    fn adversarial_term(
        &self,
        tape: &mut Tape,
        disc_bound: &crate::nn::Bound,
        reps: Var,
        labels: &[usize],
        domain: &[f64],
    ) -> Result<Option<Var>> {
        let input = if self.conditional_input() {
            let oh = tape.leaf(one_hot(labels, self.num_classes));
            tape.concat_cols(reps, oh)?
        } else {
            reps
        };
        let term = match self.config.objective {
            Objective::Erm => return Ok(None),
            Objective::Commutative | Objective::Conditional => {
                let logits = self.discriminator.forward_tape(tape, disc_bound, input)?;
                let d = tape.bce_with_logits(logits, domain, &[])?;
                tape.scale(d, -1.0)
            }
            Objective::Nci => {
                let logits = self.discriminator.forward_tape(tape, disc_bound, input)?;
                let weights: Vec<f64> = domain.iter().map(|y| 1.0 - y).collect();
                let ones = vec![1.0; domain.len()];
                tape.bce_with_logits(logits, &ones, &weights)?
            }
        };
        Ok(Some(term))
    }

    /// Gradient of the adversarial term with respect to each sample's
    /// representation, one row per sample.
    ///
    /// Encoder parameter gradients are `Jᵢᵀ gᵢ` summed over rows, so a zero
    /// row means that sample pushes the encoder by exactly nothing.
    pub fn adversarial_rep_gradients(&self, samples: &[&Sample], target: usize) -> Result<Tensor> {
        let idx: Vec<usize> = (0..samples.len()).collect();
        let batch = Batch::gather(samples, &idx, Some(target))?;
        let reps = self.encoder.forward(&batch.x)?;
        let mut tape = Tape::new();
        let disc_bound = self.discriminator.bind(&mut tape);
        let rv = tape.leaf(reps.clone());
        match self.adversarial_term(&mut tape, &disc_bound, rv, &batch.labels, &batch.domain)? {
            None => Ok(Tensor::zeros(reps.rows(), reps.cols())),
            Some(term) => {
                let scaled = tape.scale(term, self.config.adv_weight);
                let mut g = tape.backward(scaled)?;
                Ok(g.take(rv).expect("leaf gradient"))
            }
        }
    }

    /// Encoder parameter gradient of the weighted adversarial term over `samples`.
    pub fn adversarial_encoder_gradients(
        &self,
        samples: &[&Sample],
        target: usize,
    ) -> Result<ParamGrads> {
        let idx: Vec<usize> = (0..samples.len()).collect();
        let batch = Batch::gather(samples, &idx, Some(target))?;
        let mut tape = Tape::new();
        let enc_bound = self.encoder.bind(&mut tape);
        let disc_bound = self.discriminator.bind(&mut tape);
        let xv = tape.leaf(batch.x.clone());
        let rv = self.encoder.forward_tape(&mut tape, &enc_bound, xv)?;
        match self.adversarial_term(&mut tape, &disc_bound, rv, &batch.labels, &batch.domain)? {
            None => Ok(ParamGrads::zeros_like(&self.encoder)),
            Some(term) => {
                let scaled = tape.scale(term, self.config.adv_weight);
                Ok(enc_bound.grads(&tape.backward(scaled)?))
            }
        }
    }

    /// Adversarial term value on a batch, with domain labels given explicitly.
    pub fn adversarial_loss(&self, reps: &Tensor, labels: &[usize], domain: &[f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let disc_bound = self.discriminator.bind(&mut tape);
        let rv = tape.leaf(reps.clone());
        Ok(
            match self.adversarial_term(&mut tape, &disc_bound, rv, labels, domain)? {
                None => 0.0,
                Some(v) => tape.value(v).item(),
            },
        )
    }
}

fn curve_csv(curve: &[EpochLog]) -> String {
    let mut out = String::from("epoch,task_loss,adv_loss,disc_loss,train_acc\n");
    for e in curve {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?}",
            e.epoch, e.task_loss, e.adv_loss, e.disc_loss, e.train_acc
        )
        .expect("string write");
    }
    out
}

/// Trains encoder, head and discriminator on every training-split sample of `dataset`.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    let target = match &config.target_domain {
        Some(name) => Some(dataset.present_domain(name).map_err(|_| {
            Error::config(
                "target_domain",
                format!("domain `{name}` is not present in the dataset"),
            )
        })?),
        None => None,
    };
    let samples = dataset.split(Split::Train);
    if samples.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let classes = dataset.num_classes();
    let min_per_class = config.batch_size / classes;
    for c in 0..classes {
        let found = samples.iter().filter(|s| s.label == c).count();
        if found > 0 && found < min_per_class {
            return Err(Error::InsufficientSamples {
                what: format!("class {c} in the training split"),
                needed: min_per_class,
                found,
            });
        }
    }

    let mut init_rng = seeding::stream(config.seed, "train:init");
    let encoder = ModelParams::init(
        Role::Encoder,
        &dims_of(
            dataset.feature_dim(),
            &config.encoder_hidden,
            config.rep_dim,
        ),
        Activation::Relu,
        config.rep_activation,
        &mut init_rng,
    )?;
    let head = ModelParams::init(
        Role::Head,
        &dims_of(config.rep_dim, &config.head_hidden, classes),
        Activation::Relu,
        Activation::Identity,
        &mut init_rng,
    )?;
    let disc_in = config.rep_dim
        + if config.objective == Objective::Conditional {
            classes
        } else {
            0
        };
    let discriminator = ModelParams::init(
        Role::Discriminator,
        &dims_of(disc_in, &config.disc_hidden, 1),
        Activation::Relu,
        Activation::Identity,
        &mut init_rng,
    )?;
    let mut model = TrainedModel {
        config: config.clone(),
        domains: dataset
            .domain_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        num_classes: classes,
        encoder,
        head,
        discriminator,
        curve: Vec::with_capacity(config.epochs),
    };
    let mut enc_opt = OptimizerState::adam(config.lr, &model.encoder)?;
    let mut head_opt = OptimizerState::adam(config.lr, &model.head)?;
    let mut disc_opt = OptimizerState::adam(config.lr, &model.discriminator)?;
    let mut order_rng = seeding::stream(config.seed, "train:order");
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut order_rng);
        let (mut task_sum, mut adv_sum, mut disc_sum, mut hits) = (0.0, 0.0, 0.0, 0usize);
        for idx in order.chunks(config.batch_size) {
            let batch = Batch::gather(&samples, idx, target)?;
            let n = idx.len() as f64;

            if target.is_some() {
                let reps = model.encoder.forward(&batch.x)?;
                let disc_x = if model.conditional_input() {
                    reps.concat_cols(&one_hot(&batch.labels, classes))?
                } else {
                    reps
                };
                for _ in 0..config.disc_steps {
                    let mut tape = Tape::new();
                    let bound = model.discriminator.bind(&mut tape);
                    let xv = tape.leaf(disc_x.clone());
                    let logits = model.discriminator.forward_tape(&mut tape, &bound, xv)?;
                    let loss = tape.bce_with_logits(logits, &batch.domain, &[])?;
                    disc_sum += tape.value(loss).item() * n / config.disc_steps as f64;
                    let g = tape.backward(loss)?;
                    optimizer_step(&mut model.discriminator, &bound.grads(&g), &mut disc_opt)?;
                }
            }

            let mut tape = Tape::new();
            let enc_bound = model.encoder.bind(&mut tape);
            let head_bound = model.head.bind(&mut tape);
            let disc_bound = model.discriminator.bind(&mut tape);
            let xv = tape.leaf(batch.x.clone());
            let reps = model.encoder.forward_tape(&mut tape, &enc_bound, xv)?;
            let logits = model.head.forward_tape(&mut tape, &head_bound, reps)?;
            let task = tape.softmax_xent(logits, &batch.labels, &[])?;
            hits += tape
                .value(logits)
                .argmax_rows()
                .iter()
                .zip(&batch.labels)
                .filter(|(p, y)| p == y)
                .count();
            task_sum += tape.value(task).item() * n;
            let mut root = task;
            if target.is_some() {
                if let Some(adv) = model.adversarial_term(
                    &mut tape,
                    &disc_bound,
                    reps,
                    &batch.labels,
                    &batch.domain,
                )? {
                    adv_sum += tape.value(adv).item() * n;
                    if config.adv_weight > 0.0 {
                        let weighted = tape.scale(adv, config.adv_weight);
                        root = tape.add(task, weighted)?;
                    }
                }
            }
            let g = tape.backward(root)?;
            optimizer_step(&mut model.encoder, &enc_bound.grads(&g), &mut enc_opt)?;
            optimizer_step(&mut model.head, &head_bound.grads(&g), &mut head_opt)?;
        }
        let total = samples.len() as f64;
        let log = EpochLog {
            epoch,
            task_loss: task_sum / total,
            adv_loss: adv_sum / total,
            disc_loss: disc_sum / total,
            train_acc: hits as f64 / total,
        };
        model.curve.push(log);
        for (quantity, v) in [
            ("task_loss", log.task_loss),
            ("adv_loss", log.adv_loss),
            ("disc_loss", log.disc_loss),
        ] {
            if !v.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    quantity,
                    curve: curve_csv(&model.curve),
                });
            }
        }
    }
    Ok(model)
}

/// Mean cross-entropy and 0/1 error of head∘encoder over `samples`.
pub fn empirical_risk(model: &TrainedModel, samples: &[&Sample]) -> Result<Risk> {
    if samples.is_empty() {
        return Err(Error::Empty("risk samples"));
    }
    let (x, labels) = Dataset::matrix(samples)?;
    risk_from_logits(&model.logits(&x)?, &labels)
}

/// Risk of a fixed logit matrix against labels.
pub fn risk_from_logits(logits: &Tensor, labels: &[usize]) -> Result<Risk> {
    if labels.is_empty() {
        return Err(Error::Empty("risk samples"));
    }
    if logits.rows() != labels.len() {
        return Err(Error::shape(
            "empirical_risk",
            "logit rows and labels differ",
        ));
    }
    let (lo, hi) = (PROB_CLAMP.ln(), (1.0 - PROB_CLAMP).ln());
    let mut ce = 0.0;
    let mut errors = 0usize;
    let preds = logits.argmax_rows();
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row_slice(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        ce -= (row[y] - lse).clamp(lo, hi);
        if preds[i] != y {
            errors += 1;
        }
    }
    let n = labels.len() as f64;
    Ok(Risk {
        cross_entropy: ce / n,
        zero_one: errors as f64 / n,
        samples: labels.len(),
    })
}

/// Accuracy and risk on one domain's evaluation split.
pub fn evaluate(model: &TrainedModel, dataset: &Dataset, domain: &str) -> Result<Evaluation> {
    evaluate_split(model, dataset, domain, Split::Eval)
}

pub fn evaluate_split(
    model: &TrainedModel,
    dataset: &Dataset,
    domain: &str,
    split: Split,
) -> Result<Evaluation> {
    let idx = dataset.present_domain(domain)?;
    let samples = dataset.samples_in(idx, split);
    let risk = empirical_risk(model, &samples)?;
    Ok(Evaluation {
        domain: domain.to_string(),
        accuracy: 1.0 - risk.zero_one,
        risk,
    })
}

const CHECKPOINT_FORMAT: &str = "nci-lab checkpoint v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelHeader {
    role: Role,
    dims: Vec<usize>,
    activations: Vec<Activation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    format: String,
    config_hash: String,
    num_classes: usize,
    domains: Vec<String>,
    parameters: usize,
    config: TrainConfig,
    models: Vec<ModelHeader>,
    curve: Vec<EpochLog>,
}

fn model_header(m: &ModelParams) -> ModelHeader {
    ModelHeader {
        role: m.role,
        dims: m.dims(),
        activations: m.layers.iter().map(|l| l.activation).collect(),
    }
}

impl TrainedModel {
    /// Structured header, a `---` line, then one parameter per line.
    pub fn checkpoint_text(&self) -> Result<String> {
        let models = [&self.encoder, &self.head, &self.discriminator];
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            config_hash: format!("{:016x}", self.config.hash()),
            num_classes: self.num_classes,
            domains: self.domains.clone(),
            parameters: models.iter().map(|m| m.param_count()).sum(),
            config: self.config.clone(),
            models: models.iter().map(|m| model_header(m)).collect(),
            curve: self.curve.clone(),
        };
        let mut out = toml::to_string(&header)
            .map_err(|e| Error::parse("checkpoint header", e.to_string()))?;
        out.push_str("---\n");
        for m in models {
            for v in m.flatten() {
                writeln!(out, "{v:?}").expect("string write");
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.checkpoint_text()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        Self::from_checkpoint_text(&fs::read_to_string(path)?)
    }

    pub fn from_checkpoint_text(text: &str) -> Result<TrainedModel> {
        let (head_text, body) = text
            .split_once("\n---\n")
            .ok_or_else(|| Error::parse("checkpoint", "missing `---` separator"))?;
        let header: CheckpointHeader = toml::from_str(head_text)
            .map_err(|e| Error::parse("checkpoint header", e.to_string()))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::parse(
                "checkpoint",
                format!("unsupported format {:?}", header.format),
            ));
        }
        if header.config_hash != format!("{:016x}", header.config.hash()) {
            return Err(Error::parse(
                "checkpoint",
                "config hash does not match config",
            ));
        }
        let values: Vec<f64> = body
            .lines()
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|_| Error::parse("checkpoint body", format!("bad float {l:?}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != header.parameters || header.models.len() != 3 {
            return Err(Error::parse(
                "checkpoint",
                "parameter count does not match header",
            ));
        }
        let mut at = 0;
        let mut models = Vec::with_capacity(3);
        for mh in &header.models {
            let mut m = ModelParams::zeros(mh.role, &mh.dims, &mh.activations)?;
            let n = m.param_count();
            if at + n > values.len() {
                return Err(Error::parse("checkpoint", "body shorter than model shapes"));
            }
            m.load_flat(&values[at..at + n])?;
            at += n;
            models.push(m);
        }
        if at != values.len() {
            return Err(Error::parse("checkpoint", "body longer than model shapes"));
        }
        let discriminator = models.pop().expect("three models");
        let head = models.pop().expect("three models");
        let encoder = models.pop().expect("three models");
        for (m, role) in [
            (&encoder, Role::Encoder),
            (&head, Role::Head),
            (&discriminator, Role::Discriminator),
        ] {
            if m.role != role {
                return Err(Error::parse(
                    "checkpoint",
                    format!("expected {role} model, found {}", m.role),
                ));
            }
        }
        Ok(TrainedModel {
            config: header.config,
            domains: header.domains,
            num_classes: header.num_classes,
            encoder,
            head,
            discriminator,
            curve: header.curve,
        })
    }

    pub fn curve_csv(&self) -> String {
        curve_csv(&self.curve)
    }
}

/// A model whose head always emits the same logits.
pub fn constant_model(
    feature_dim: usize,
    num_classes: usize,
    logits: &[f64],
) -> Result<TrainedModel> {
    if logits.len() != num_classes {
        return Err(Error::shape(
            "constant_model",
            "one logit per class required",
        ));
    }
    let encoder = ModelParams::zeros(Role::Encoder, &[feature_dim, 1], &[Activation::Identity])?;
    let head = ModelParams {
        role: Role::Head,
        layers: vec![Layer {
            weight: Tensor::zeros(1, num_classes),
            bias: Tensor::row(logits.to_vec()),
            activation: Activation::Identity,
        }],
    };
    let discriminator = ModelParams::zeros(Role::Discriminator, &[1, 1], &[Activation::Identity])?;
    Ok(TrainedModel {
        config: TrainConfig {
            rep_dim: 1,
            ..TrainConfig::default()
        },
        domains: Vec::new(),
        num_classes,
        encoder,
        head,
        discriminator,
        curve: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, DatasetConfig, DomainSpec};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn discriminator_loss_values() {
        assert!(close(
            discriminator_loss(0.5, 1.0),
            std::f64::consts::LN_2,
            1e-15
        ));
        assert!(discriminator_loss(1.0 - 1e-12, 1.0) < 1e-11);
        for eta in [0.01, 0.3, 0.5, 0.77, 0.999] {
            assert_eq!(
                discriminator_loss(eta, 0.0),
                discriminator_loss(1.0 - eta, 1.0)
            );
        }
    }

    #[test]
    fn nci_loss_exempts_targets() {
        for eta in [1e-20, 0.2, 0.5, 1.0] {
            assert_eq!(nci_encoder_loss(eta, 1.0), 0.0);
        }
        assert!(nci_encoder_loss(1.0 - 1e-12, 0.0) < 1e-11);
        assert!(close(
            nci_encoder_loss(0.5, 0.0),
            std::f64::consts::LN_2,
            1e-15
        ));
    }

    #[test]
    fn uniform_head_risk_is_ln_classes() {
        let m = constant_model(3, 4, &[0.0; 4]).unwrap();
        let s: Vec<Sample> = (0..8)
            .map(|i| Sample {
                support_id: i,
                domain: 0,
                label: (i % 4) as usize,
                features: vec![0.1, 0.2, 0.3],
            })
            .collect();
        let refs: Vec<&Sample> = s.iter().collect();
        let r = empirical_risk(&m, &refs).unwrap();
        assert!(close(r.cross_entropy, 4f64.ln(), 1e-15));
        assert!(empirical_risk(&m, &[]).is_err());
    }

    #[test]
    fn confident_truth_has_near_zero_risk() {
        let logits = Tensor::from_rows(&[vec![100.0, 0.0], vec![0.0, 100.0]]).unwrap();
        let r = risk_from_logits(&logits, &[0, 1]).unwrap();
        assert!(r.cross_entropy <= 1e-11);
        assert_eq!(r.zero_one, 0.0);
    }

    fn small_dataset(seed: u64) -> Dataset {
        generate(&DatasetConfig {
            seed,
            concept_dim: 4,
            num_classes: 3,
            num_supports: 400,
            domains: vec![
                DomainSpec::new("src", 1.0, 0.0, 3, 0.5),
                DomainSpec::new("tgt", 0.0, 2.0, 3, 0.5),
            ],
            shared_fraction: 0.7,
            unique_fraction: 0.15,
            samples_per_domain: None,
            complementary: None,
        })
        .unwrap()
    }

    fn quick(objective: Objective, seed: u64) -> TrainConfig {
        TrainConfig {
            objective,
            target_domain: Some("tgt".into()),
            epochs: 3,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_adversarial_weight_reduces_to_erm() {
        let ds = small_dataset(1);
        let erm = train(&ds, &quick(Objective::Erm, 4)).unwrap();
        for obj in [Objective::Nci, Objective::Commutative] {
            let m = train(
                &ds,
                &TrainConfig {
                    adv_weight: 0.0,
                    ..quick(obj, 4)
                },
            )
            .unwrap();
            assert_eq!(m.encoder, erm.encoder);
            assert_eq!(m.head, erm.head);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = small_dataset(2);
        let a = train(&ds, &quick(Objective::Nci, 9)).unwrap();
        let b = train(&ds, &quick(Objective::Nci, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.curve.len(), 3);
    }

    #[test]
    fn nci_target_rows_get_no_adversarial_gradient() {
        let ds = small_dataset(3);
        let m = train(&ds, &quick(Objective::Nci, 1)).unwrap();
        let samples: Vec<&Sample> = ds.samples.iter().collect();
        let g = m.adversarial_rep_gradients(&samples, 1).unwrap();
        let mut source_nonzero = false;
        for (i, s) in samples.iter().enumerate() {
            let row = g.row_slice(i);
            if s.domain == 1 {
                assert!(row.iter().all(|v| *v == 0.0));
            } else {
                source_nonzero |= row.iter().any(|v| *v != 0.0);
            }
        }
        assert!(source_nonzero);
        let targets = ds.samples_in(1, Split::All);
        assert_eq!(
            m.adversarial_encoder_gradients(&targets, 1)
                .unwrap()
                .max_abs(),
            0.0
        );
    }

    #[test]
    fn commutative_loss_symmetric_under_label_swap() {
        let ds = small_dataset(4);
        let mut m = train(&ds, &quick(Objective::Commutative, 2)).unwrap();
        let samples: Vec<&Sample> = ds.samples.iter().take(64).collect();
        let (x, labels) = Dataset::matrix(&samples).unwrap();
        let reps = m.represent(&x).unwrap();
        let dom: Vec<f64> = samples.iter().map(|s| s.domain as f64).collect();
        let before = m.adversarial_loss(&reps, &labels, &dom).unwrap();
        let last = m.discriminator.layers.last_mut().unwrap();
        last.weight = last.weight.map(|v| -v);
        last.bias = last.bias.map(|v| -v);
        let swapped: Vec<f64> = dom.iter().map(|d| 1.0 - d).collect();
        assert_eq!(
            m.adversarial_loss(&reps, &labels, &swapped).unwrap(),
            before
        );
    }

    #[test]
    fn missing_target_is_config_error() {
        let ds = small_dataset(5);
        let cfg = TrainConfig {
            target_domain: Some("nowhere".into()),
            ..quick(Objective::Nci, 0)
        };
        assert!(matches!(train(&ds, &cfg), Err(Error::Config { .. })));
        let cfg = TrainConfig {
            target_domain: None,
            ..quick(Objective::Nci, 0)
        };
        assert!(matches!(train(&ds, &cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let ds = small_dataset(6);
        let m = train(&ds, &quick(Objective::Conditional, 3)).unwrap();
        let back = TrainedModel::from_checkpoint_text(&m.checkpoint_text().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(m
            .curve_csv()
            .starts_with("epoch,task_loss,adv_loss,disc_loss,train_acc\n"));
    }

    #[test]
    fn train_fit_beats_heldout_on_small_data() {
        let ds = small_dataset(7);
        let m = train(
            &ds,
            &TrainConfig {
                epochs: 40,
                ..quick(Objective::Erm, 1)
            },
        )
        .unwrap();
        let tr = evaluate_split(&m, &ds, "tgt", Split::Train).unwrap();
        let ev = evaluate(&m, &ds, "tgt").unwrap();
        assert!(
            tr.accuracy >= ev.accuracy,
            "{} < {}",
            tr.accuracy,
            ev.accuracy
        );
    }
}
