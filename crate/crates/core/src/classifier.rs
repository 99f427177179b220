//! Small supervised classifiers used as probes and fresh discriminators.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{optimizer_step, OptimizerState, Tape, Tensor};
use crate::error::{Error, Result};
use crate::nn::{Activation, ModelParams, Role};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Hidden widths; empty means a linear (softmax regression) model.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            epochs: 30,
            batch_size: 64,
            lr: 0.01,
        }
    }
}

/// Trains a softmax classifier with Adam on `features`/`labels`.
pub fn fit_classifier(
    features: &Tensor,
    labels: &[usize],
    num_classes: usize,
    config: &FitConfig,
    seed: u64,
    role: Role,
) -> Result<ModelParams> {
    if features.rows() != labels.len() {
        return Err(Error::shape(
            "fit_classifier",
            format!("{} rows but {} labels", features.rows(), labels.len()),
        ));
    }
    if config.batch_size == 0 {
        return Err(Error::config("batch_size", "must be positive"));
    }
    let mut rng = seeding::stream(seed, "fit_classifier");
    let mut dims = vec![features.cols()];
    dims.extend(&config.hidden);
    dims.push(num_classes);
    let mut model = ModelParams::init(
        role,
        &dims,
        Activation::Relu,
        Activation::Identity,
        &mut rng,
    )?;
    let mut opt = OptimizerState::adam(config.lr, &model)?;
    let mut order: Vec<usize> = (0..labels.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let rows: Vec<&[f64]> = batch.iter().map(|&i| features.row_slice(i)).collect();
            let x = Tensor::from_rows(&rows)?;
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape);
            let xv = tape.leaf(x);
            let logits = model.forward_tape(&mut tape, &bound, xv)?;
            let loss = tape.softmax_xent(logits, &y, &[])?;
            let grads = tape.backward(loss)?;
            optimizer_step(&mut model, &bound.grads(&grads), &mut opt)?;
        }
    }
    Ok(model)
}

/// Fraction of rows whose argmax prediction equals the label.
pub fn accuracy(model: &ModelParams, features: &Tensor, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("accuracy labels"));
    }
    let preds = model.forward(features)?.argmax_rows();
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_blobs_are_learned() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let c = i % 2;
            let s = if c == 0 { -1.0 } else { 1.0 };
            rows.push(vec![
                s * 2.0 + (i as f64 * 0.37).sin() * 0.3,
                (i as f64).cos(),
            ]);
            labels.push(c);
        }
        let x = Tensor::from_rows(&rows).unwrap();
        let m = fit_classifier(&x, &labels, 2, &FitConfig::default(), 1, Role::Head).unwrap();
        assert!(accuracy(&m, &x, &labels).unwrap() > 0.99);
    }
}
