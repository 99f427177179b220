//! Independent reference computations used to check the fast paths.
//!
//! [`Dd`] is double-double arithmetic (about 32 significant digits), enough
//! to judge f64 results at a relative tolerance of 1e-12. The finite
//! difference checker runs through the plain forward pass so it shares no
//! code with the tape.

use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::Rng;

use crate::autodiff::{bce_value, Tape, Tensor, PROB_CLAMP};
use crate::error::Result;
use crate::nn::{Activation, ModelParams, Role};
use crate::seeding;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn sqrt(self) -> Self {
        assert!(self.hi >= 0.0, "sqrt of negative double-double");
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let y = Dd::new(self.hi.sqrt());
        y + (self - y * y) / (y * Dd::new(2.0))
    }

    pub fn exp(self) -> Self {
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::new(k)).scale_pow2(-10);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for i in 1..=24 {
            term = term * r / Dd::new(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.scale_pow2(k as i32)
    }

    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of non-positive double-double");
        let mut y = Dd::new(self.hi.ln());
        // Newton on exp(y) = x; each step doubles the correct digits
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::renorm(s, e + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + -o
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        Dd::renorm(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (q, e) = quick_two_sum(q1, q2);
        Dd::renorm(q, e + q3)
    }
}

/// Double-double evaluation of the target-risk bound.
pub fn target_risk_bound_dd(r_s: f64, n: f64, d: f64, delta: f64, beta: f64, d_hat: f64) -> f64 {
    let (n, d) = (Dd::new(n), Dd::new(d));
    let e = Dd::ONE.exp();
    let conf = (Dd::new(4.0) / Dd::new(delta)).ln();
    let two = Dd::new(2.0);
    let first = (Dd::new(4.0) / n * (d * (two * e * n / d).ln() + conf)).sqrt();
    let second = Dd::new(4.0) * (Dd::ONE / n * (d * (two * n / d).ln() + conf)).sqrt();
    (Dd::new(r_s) + first + Dd::new(d_hat) + second + Dd::new(beta)).to_f64()
}

/// Double-double `(ln|T| + ln(1/δ)) / ε`.
pub fn haussler_epsilon_dd(hypotheses: u64, delta: f64, epsilon: f64) -> f64 {
    let num = Dd::new(hypotheses as f64).ln() + (Dd::ONE / Dd::new(delta)).ln();
    (num / Dd::new(epsilon)).to_f64()
}

pub fn relative_error(actual: f64, reference: f64) -> f64 {
    if actual == reference {
        return 0.0;
    }
    (actual - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// Loss used by the gradient check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckLoss {
    SoftmaxXent,
    BceWithLogits,
}

/// Outcome of comparing tape gradients with central differences.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub dims: Vec<usize>,
    pub loss: CheckLoss,
    pub max_relative_error: f64,
    pub worst_parameter: usize,
    pub parameters: usize,
}

/// Denominator floor for relative errors of near-zero gradient entries.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

fn plain_loss(
    model: &ModelParams,
    x: &Tensor,
    loss: CheckLoss,
    labels: &[usize],
    weights: &[f64],
) -> Result<f64> {
    let out = model.forward(x)?;
    let n = out.rows();
    let mut total = 0.0;
    for i in 0..n {
        let row = out.row_slice(i);
        let li = match loss {
            CheckLoss::SoftmaxXent => {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                let lp = (row[labels[i]] - lse).clamp(PROB_CLAMP.ln(), (1.0 - PROB_CLAMP).ln());
                -lp
            }
            CheckLoss::BceWithLogits => {
                let p = 1.0 / (1.0 + (-row[0]).exp());
                bce_value(p, labels[i] as f64)
            }
        };
        total += weights[i] * li;
    }
    Ok(total / n as f64)
}

/// Builds a seeded random MLP and compares every parameter's tape gradient
/// against a central difference with step `h`.
///
/// Hidden layers use smooth activations so the difference quotient is valid
/// at every parameter.
pub fn gradient_check(seed: u64, h: f64) -> Result<GradCheck> {
    let mut rng = seeding::indexed_stream(seed, "gradient_check", 0);
    let depth = rng.random_range(1..=3usize);
    let loss = if rng.random_bool(0.5) {
        CheckLoss::SoftmaxXent
    } else {
        CheckLoss::BceWithLogits
    };
    let mut dims: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=16)).collect();
    dims.insert(0, rng.random_range(1..=16));
    let out_dim = match loss {
        CheckLoss::SoftmaxXent => rng.random_range(2..=16),
        CheckLoss::BceWithLogits => 1,
    };
    dims.push(out_dim);
    let hidden = if rng.random_bool(0.5) {
        Activation::Tanh
    } else {
        Activation::Sigmoid
    };
    let mut model = ModelParams::init(Role::Head, &dims, hidden, Activation::Identity, &mut rng)?;
    for l in &mut model.layers {
        for b in l.bias.data_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let batch = rng.random_range(1..=8usize);
    let xdata = (0..batch * dims[0])
        .map(|_| rng.random_range(-1.5..1.5))
        .collect();
    let x = Tensor::new([batch, dims[0]], xdata)?;
    let classes = if loss == CheckLoss::SoftmaxXent {
        out_dim
    } else {
        2
    };
    let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
    let weights: Vec<f64> = (0..batch).map(|_| rng.random_range(0.25..1.5)).collect();

    let mut tape = Tape::new();
    let bound = model.bind(&mut tape);
    let xv = tape.leaf(x.clone());
    let out = model.forward_tape(&mut tape, &bound, xv)?;
    let root = match loss {
        CheckLoss::SoftmaxXent => tape.softmax_xent(out, &labels, &weights)?,
        CheckLoss::BceWithLogits => {
            let t: Vec<f64> = labels.iter().map(|&y| y as f64).collect();
            tape.bce_with_logits(out, &t, &weights)?
        }
    };
    let grads = tape.backward(root)?;
    let analytic: Vec<f64> = bound
        .grads(&grads)
        .layers
        .iter()
        .flat_map(|(w, b)| w.data().iter().chain(b.data()).copied().collect::<Vec<_>>())
        .collect();

    let base = model.flatten();
    let mut probe = model.clone();
    let mut worst = (0.0, 0);
    for (k, &a) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[k] = base[k] + h;
        probe.load_flat(&p)?;
        let up = plain_loss(&probe, &x, loss, &labels, &weights)?;
        p[k] = base[k] - h;
        probe.load_flat(&p)?;
        let down = plain_loss(&probe, &x, loss, &labels, &weights)?;
        let numeric = (up - down) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        if rel > worst.0 || rel.is_nan() {
            worst = (rel, k);
        }
    }
    Ok(GradCheck {
        dims,
        loss,
        max_relative_error: worst.0,
        worst_parameter: worst.1,
        parameters: analytic.len(),
    })
}

#[cfg(test)]
// reference values carry every digit the 50-digit evaluation printed
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    // Reference values computed with 50-digit arbitrary precision.
    #[test]
    fn double_double_elementary_functions() {
        assert!(relative_error(Dd::new(7.0).ln().to_f64(), 1.945_910_149_055_313_305_1) < 1e-16);
        assert!(relative_error(Dd::new(2.0).sqrt().to_f64(), std::f64::consts::SQRT_2) < 1e-16);
        assert!(relative_error(Dd::new(0.5).exp().to_f64(), 1.648_721_270_700_128_146_8) < 1e-16);
        let third = Dd::ONE / Dd::new(3.0);
        assert!(((third * Dd::new(3.0)) - Dd::ONE).to_f64().abs() < 1e-31);
    }

    #[test]
    fn oracle_matches_arbitrary_precision_fixtures() {
        let b = target_risk_bound_dd(0.1, 1000.0, 10.0, 0.05, 0.05, 0.2);
        assert!(relative_error(b, 1.827_137_476_419_387_360_5) < 1e-15);
        let b = target_risk_bound_dd(0.3, 50000.0, 137.0, 0.01, 0.0, 1.3);
        assert!(relative_error(b, 2.428_705_674_502_405_676_9) < 1e-15);
        assert!(
            relative_error(
                haussler_epsilon_dd(20, 0.05, 0.05),
                119.829_290_942_159_639_74
            ) < 1e-15
        );
        assert!(
            relative_error(
                haussler_epsilon_dd(1000, 0.001, 1.0),
                13.815_510_557_964_274_104
            ) < 1e-15
        );
    }

    #[test]
    fn gradient_check_passes_on_a_few_models() {
        for seed in 0..4 {
            let r = gradient_check(seed, 1e-5).unwrap();
            assert!(r.max_relative_error < 1e-4, "{r:?}");
        }
    }
}
