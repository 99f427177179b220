//! First-order optimizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ModelParams, ParamGrads};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        let zeros: Vec<Vec<f64>> = params
            .layers
            .iter()
            .flat_map(|l| [vec![0.0; l.weight.len()], vec![0.0; l.bias.len()]])
            .collect();
        Ok(Self {
            kind,
            lr,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        })
    }

    pub fn sgd(lr: f64, params: &ModelParams) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, lr, params)
    }

    pub fn adam(lr: f64, params: &ModelParams) -> Result<Self> {
        Self::new(OptimizerKind::Adam, lr, params)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Applies one update to `params` in place.
///
/// Nothing is modified when any gradient entry is non-finite.
pub fn optimizer_step(
    params: &mut ModelParams,
    grads: &ParamGrads,
    state: &mut OptimizerState,
) -> Result<()> {
    if grads.layers.len() != params.layers.len() {
        return Err(Error::shape(
            "optimizer_step",
            format!(
                "{} gradient layers for {} layers",
                grads.layers.len(),
                params.layers.len()
            ),
        ));
    }
    for (i, (layer, (gw, gb))) in params.layers.iter().zip(&grads.layers).enumerate() {
        if gw.shape() != layer.weight.shape() || gb.shape() != layer.bias.shape() {
            return Err(Error::shape(
                "optimizer_step",
                format!("gradient shape mismatch in {}.layer{i}", params.role),
            ));
        }
        for (name, g) in [("weight", gw), ("bias", gb)] {
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient {
                    layer: format!("{}.layer{i}.{name}", params.role),
                    max_magnitude: g.max_abs(),
                });
            }
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let lr = state.lr;
    let slots = params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .flat_map(|(l, (gw, gb))| {
            [
                (l.weight.data_mut(), gw.data()),
                (l.bias.data_mut(), gb.data()),
            ]
        });
    for (k, (p, g)) in slots.enumerate() {
        match state.kind {
            OptimizerKind::Sgd => {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= lr * gi;
                }
            }
            OptimizerKind::Adam => {
                let bc1 = 1.0 - ADAM_BETA1.powi(t);
                let bc2 = 1.0 - ADAM_BETA2.powi(t);
                let (m, v) = (&mut state.first[k], &mut state.second[k]);
                for j in 0..p.len() {
                    m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
                    v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                    let m_hat = m[j] / bc1;
                    let v_hat = v[j] / bc2;
                    p[j] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::nn::{Activation, Role};

    fn scalar_model(p: f64) -> ModelParams {
        let mut m = ModelParams::zeros(Role::Head, &[1, 1], &[Activation::Identity]).unwrap();
        m.layers[0].weight.data_mut()[0] = p;
        m
    }

    fn scalar_grad(g: f64) -> ParamGrads {
        ParamGrads {
            layers: vec![(Tensor::scalar(g), Tensor::scalar(0.0))],
        }
    }

    #[test]
    fn sgd_one_step() {
        let mut m = scalar_model(1.0);
        let mut s = OptimizerState::sgd(0.1, &m).unwrap();
        optimizer_step(&mut m, &scalar_grad(0.5), &mut s).unwrap();
        assert_eq!(m.layers[0].weight.item(), 0.95);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut m = scalar_model(0.3);
            let mut s = OptimizerState::new(kind, 0.01, &m).unwrap();
            optimizer_step(&mut m, &scalar_grad(0.0), &mut s).unwrap();
            assert_eq!(m.layers[0].weight.item(), 0.3);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut m = scalar_model(1.0);
        let mut s = OptimizerState::adam(0.001, &m).unwrap();
        optimizer_step(&mut m, &scalar_grad(1.0), &mut s).unwrap();
        // m̂ = g, v̂ = g², so the step is lr · 1 / (1 + 1e-8)
        let expected = 1.0 - 0.001 / (1.0 + 1e-8);
        assert!((m.layers[0].weight.item() - expected).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts_with_layer_name() {
        let mut m = scalar_model(1.0);
        let mut s = OptimizerState::adam(0.001, &m).unwrap();
        let err = optimizer_step(&mut m, &scalar_grad(f64::INFINITY), &mut s).unwrap_err();
        match err {
            Error::NonFiniteGradient {
                layer,
                max_magnitude,
            } => {
                assert_eq!(layer, "head.layer0.weight");
                assert!(max_magnitude.is_infinite());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(m.layers[0].weight.item(), 1.0);
        assert_eq!(s.step_count(), 0);
    }
}
