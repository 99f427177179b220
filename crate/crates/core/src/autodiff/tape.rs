//! Wengert tape for reverse-mode differentiation of small dense networks.
//!
//! Nodes are appended in evaluation order, so a node's inputs always precede
//! it and a single reverse sweep visits each node exactly once.

use super::tensor::{broadcast_ok, Tensor};
use crate::error::{Error, Result};

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before any log.
pub const PROB_CLAMP: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Log(usize),
    Scale(usize, f64),
    Mean(usize),
    ConcatCols(usize, usize),
    SoftmaxXent {
        logits: usize,
        labels: Vec<usize>,
        weights: Vec<f64>,
    },
    Bce {
        probs: usize,
        targets: Vec<f64>,
        weights: Vec<f64>,
    },
    BceLogits {
        logits: usize,
        targets: Vec<f64>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every node of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `var`. Leaves always have one (zero when unreachable).
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn ln_clamp_lo() -> f64 {
    PROB_CLAMP.ln()
}

fn ln_clamp_hi() -> f64 {
    (-PROB_CLAMP).ln_1p()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_loss_args(op: &'static str, rows: usize, n_targets: usize, weights: &[f64]) -> Result<()> {
    if n_targets != rows {
        return Err(Error::shape(
            op,
            format!("{rows} rows but {n_targets} targets"),
        ));
    }
    if !weights.is_empty() && weights.len() != rows {
        return Err(Error::shape(
            op,
            format!("{rows} rows but {} weights", weights.len()),
        ));
    }
    Ok(())
}

fn weight_at(weights: &[f64], i: usize) -> f64 {
    if weights.is_empty() {
        1.0
    } else {
        weights[i]
    }
}

/// Clamped `ln σ(z)` and `ln(1 − σ(z))`, with flags telling whether each was clamped.
fn log_sigmoid_pair(z: f64) -> ((f64, bool), (f64, bool)) {
    let (lo, hi) = (ln_clamp_lo(), ln_clamp_hi());
    let clamp = |v: f64| {
        if v < lo {
            (lo, true)
        } else if v > hi {
            (hi, true)
        } else {
            (v, false)
        }
    };
    (clamp(-softplus(-z)), clamp(-softplus(z)))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Records an input, parameter or constant.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t)
    }

    fn broadcast_binary(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !broadcast_ok(ta, tb) {
            return Err(Error::shape(
                op,
                format!("cannot combine {:?} with {:?}", ta.shape(), tb.shape()),
            ));
        }
        let cols = ta.cols();
        let mut out = ta.clone();
        let row_bcast = tb.rows() == 1;
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            let j = if row_bcast { i % cols } else { i };
            *o = f(*o, tb.data()[j]);
        }
        Ok(out)
    }

    /// Elementwise `a + b`; `b` may be a `[1, m]` row.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(Op::Add(a.0, b.0), out))
    }

    /// Elementwise `a * b`; `b` may be a `[1, m]` row.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(Op::Mul(a.0, b.0), out))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a.0, b.0), out))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a.0), out)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a.0), out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a.0), out)
    }

    /// Natural log with the argument clamped from below at [`PROB_CLAMP`].
    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(PROB_CLAMP).ln());
        self.push(Op::Log(a.0), out)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a.0, c), out)
    }

    /// Mean of all entries, as a `[1, 1]` scalar.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(a.0), Tensor::scalar(m))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).concat_cols(self.value(b))?;
        Ok(self.push(Op::ConcatCols(a.0, b.0), out))
    }

    /// Weighted mean softmax cross-entropy, `(1/n) Σ wᵢ · −ln p(yᵢ)`, via log-sum-exp.
    ///
    /// An empty `weights` slice means unit weights.
    pub fn softmax_xent(&mut self, logits: Var, labels: &[usize], weights: &[f64]) -> Result<Var> {
        let z = self.value(logits);
        check_loss_args("softmax_xent", z.rows(), labels.len(), weights)?;
        let (lo, hi) = (ln_clamp_lo(), ln_clamp_hi());
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = z.row_slice(r);
            if y >= row.len() {
                return Err(Error::shape(
                    "softmax_xent",
                    format!("label {y} out of range for {} classes", row.len()),
                ));
            }
            let logp = (row[y] - logsumexp(row)).clamp(lo, hi);
            total -= weight_at(weights, r) * logp;
        }
        let loss = total / z.rows() as f64;
        Ok(self.push(
            Op::SoftmaxXent {
                logits: logits.0,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
            },
            Tensor::scalar(loss),
        ))
    }

    /// Weighted mean binary cross-entropy on probabilities `[n, 1]`.
    pub fn bce(&mut self, probs: Var, targets: &[f64], weights: &[f64]) -> Result<Var> {
        let p = self.value(probs);
        if p.cols() != 1 {
            return Err(Error::shape(
                "bce",
                format!("expected [n, 1], got {:?}", p.shape()),
            ));
        }
        check_loss_args("bce", p.rows(), targets.len(), weights)?;
        let total: f64 = p
            .data()
            .iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (&pi, &y))| weight_at(weights, i) * bce_value(pi, y))
            .sum();
        let loss = total / p.rows() as f64;
        Ok(self.push(
            Op::Bce {
                probs: probs.0,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
            },
            Tensor::scalar(loss),
        ))
    }

    /// Weighted mean binary cross-entropy on logits `[n, 1]`, fused with the sigmoid.
    pub fn bce_with_logits(
        &mut self,
        logits: Var,
        targets: &[f64],
        weights: &[f64],
    ) -> Result<Var> {
        let z = self.value(logits);
        if z.cols() != 1 {
            return Err(Error::shape(
                "bce_with_logits",
                format!("expected [n, 1], got {:?}", z.shape()),
            ));
        }
        check_loss_args("bce_with_logits", z.rows(), targets.len(), weights)?;
        let total: f64 = z
            .data()
            .iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (&zi, &y))| {
                let ((lp, _), (lq, _)) = log_sigmoid_pair(zi);
                -weight_at(weights, i) * (y * lp + (1.0 - y) * lq)
            })
            .sum();
        let loss = total / z.rows() as f64;
        Ok(self.push(
            Op::BceLogits {
                logits: logits.0,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
            },
            Tensor::scalar(loss),
        ))
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = &self.nodes[root.0].value;
        if root_value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                root_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::filled(root_value.rows(), root_value.cols(), 1.0));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, reduce_to(&g, &self.nodes[*b].value));
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let cols = ta.cols();
                    let row_bcast = tb.rows() == 1 && ta.rows() != 1;
                    let mut ga = g.clone();
                    let mut gb_full = g.clone();
                    for (k, (ga_k, gb_k)) in ga
                        .data_mut()
                        .iter_mut()
                        .zip(gb_full.data_mut().iter_mut())
                        .enumerate()
                    {
                        let bj = if row_bcast { k % cols } else { k };
                        *ga_k *= tb.data()[bj];
                        *gb_k *= ta.data()[k];
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, reduce_to(&gb_full, tb));
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    accumulate(&mut grads, *a, g.matmul_t(tb));
                    accumulate(&mut grads, *b, ta.t_matmul(&g));
                }
                Op::Relu(a) => {
                    let x = &self.nodes[*a].value;
                    let mut ga = g.clone();
                    for (gv, &xv) in ga.data_mut().iter_mut().zip(x.data()) {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let mut ga = g.clone();
                    for (gv, &y) in ga.data_mut().iter_mut().zip(node.value.data()) {
                        *gv *= 1.0 - y * y;
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let mut ga = g.clone();
                    for (gv, &y) in ga.data_mut().iter_mut().zip(node.value.data()) {
                        *gv *= y * (1.0 - y);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Log(a) => {
                    let x = &self.nodes[*a].value;
                    let mut ga = g.clone();
                    for (gv, &xv) in ga.data_mut().iter_mut().zip(x.data()) {
                        *gv = if xv > PROB_CLAMP { *gv / xv } else { 0.0 };
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g.map(|v| v * c));
                }
                Op::Mean(a) => {
                    let x = &self.nodes[*a].value;
                    let v = g.item() / x.len() as f64;
                    accumulate(&mut grads, *a, Tensor::filled(x.rows(), x.cols(), v));
                }
                Op::ConcatCols(a, b) => {
                    let wa = self.nodes[*a].value.cols();
                    let wb = self.nodes[*b].value.cols();
                    let rows = g.rows();
                    let mut da = Vec::with_capacity(rows * wa);
                    let mut db = Vec::with_capacity(rows * wb);
                    for r in 0..rows {
                        let row = g.row_slice(r);
                        da.extend_from_slice(&row[..wa]);
                        db.extend_from_slice(&row[wa..]);
                    }
                    accumulate(&mut grads, *a, Tensor::new([rows, wa], da)?);
                    accumulate(&mut grads, *b, Tensor::new([rows, wb], db)?);
                }
                Op::SoftmaxXent {
                    logits,
                    labels,
                    weights,
                } => {
                    let z = &self.nodes[*logits].value;
                    let n = z.rows() as f64;
                    let (lo, hi) = (ln_clamp_lo(), ln_clamp_hi());
                    let mut gz = Tensor::zeros(z.rows(), z.cols());
                    for (r, &y) in labels.iter().enumerate() {
                        let row = z.row_slice(r);
                        let lse = logsumexp(row);
                        let logp = row[y] - lse;
                        if logp < lo || logp > hi {
                            continue;
                        }
                        let scale = g.item() * weight_at(weights, r) / n;
                        let out = &mut gz.data_mut()[r * z.cols()..(r + 1) * z.cols()];
                        for (c, o) in out.iter_mut().enumerate() {
                            let p = (row[c] - lse).exp();
                            let onehot = if c == y { 1.0 } else { 0.0 };
                            *o = scale * (p - onehot);
                        }
                    }
                    accumulate(&mut grads, *logits, gz);
                }
                Op::Bce {
                    probs,
                    targets,
                    weights,
                } => {
                    let p = &self.nodes[*probs].value;
                    let n = p.rows() as f64;
                    let data = p
                        .data()
                        .iter()
                        .zip(targets)
                        .enumerate()
                        .map(|(i, (&pi, &y))| {
                            if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&pi) {
                                0.0
                            } else {
                                g.item() * weight_at(weights, i) / n
                                    * (-y / pi + (1.0 - y) / (1.0 - pi))
                            }
                        })
                        .collect();
                    accumulate(&mut grads, *probs, Tensor::new(p.shape(), data)?);
                }
                Op::BceLogits {
                    logits,
                    targets,
                    weights,
                } => {
                    let z = &self.nodes[*logits].value;
                    let n = z.rows() as f64;
                    let data = z
                        .data()
                        .iter()
                        .zip(targets)
                        .enumerate()
                        .map(|(i, (&zi, &y))| {
                            let ((_, p_clamped), (_, q_clamped)) = log_sigmoid_pair(zi);
                            let s = sigmoid(zi);
                            let mut d = 0.0;
                            if !p_clamped {
                                d -= y * (1.0 - s);
                            }
                            if !q_clamped {
                                d += (1.0 - y) * s;
                            }
                            g.item() * weight_at(weights, i) / n * d
                        })
                        .collect();
                    accumulate(&mut grads, *logits, Tensor::new(z.shape(), data)?);
                }
            }
            grads[i] = Some(g);
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && grads[i].is_none() {
                grads[i] = Some(Tensor::zeros(node.value.rows(), node.value.cols()));
            }
        }
        Ok(Gradients { grads })
    }
}

fn logsumexp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Binary cross-entropy of one probability, clamped.
pub fn bce_value(p: f64, y: f64) -> f64 {
    let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln())
}

fn reduce_to(g: &Tensor, like: &Tensor) -> Tensor {
    if g.rows() == like.rows() {
        g.clone()
    } else {
        g.sum_rows()
    }
}

fn accumulate(grads: &mut [Option<Tensor>], idx: usize, t: Tensor) {
    match &mut grads[idx] {
        Some(existing) => existing.add_assign(&t),
        slot @ None => *slot = Some(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sigmoid_and_relu_basics() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(vec![0.0, -3.0]));
        let s = tape.sigmoid(x);
        let r = tape.relu(x);
        assert_eq!(tape.value(s).data()[0], 0.5);
        assert_eq!(tape.value(r).data()[1], 0.0);
    }

    #[test]
    fn bce_at_half_is_ln_two() {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::scalar(0.5));
        let l = tape.bce(p, &[1.0], &[]).unwrap();
        assert!(close(tape.value(l).item(), std::f64::consts::LN_2, 1e-15));
    }

    #[test]
    fn square_derivative() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item(), 6.0);
    }

    #[test]
    fn unreachable_leaf_has_zero_gradient() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::row(vec![1.0, 2.0]));
        let c = tape.leaf(Tensor::scalar(4.0));
        let y = tape.scale(c, 2.0);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_root_is_contract_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn broadcast_only_over_batch() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(3, 2));
        let row = tape.leaf(Tensor::row(vec![1.0, 2.0]));
        let col = tape.leaf(Tensor::zeros(3, 1));
        let s = tape.add(a, row).unwrap();
        assert_eq!(tape.value(s).row_slice(2), &[1.0, 2.0]);
        assert!(tape.add(a, col).is_err());
        // bias gradient sums over the batch
        let m = tape.mean(s);
        let g = tape.backward(m).unwrap();
        let gb = g.get(row).unwrap();
        assert!(close(gb.data()[0], 0.5, 1e-15));
    }

    #[test]
    fn clamped_losses_stay_finite() {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::new([3, 1], vec![0.0, 1.0, 1e-300]).unwrap());
        let l = tape.bce(p, &[1.0, 0.0, 1.0], &[]).unwrap();
        assert!(tape.value(l).item().is_finite());
        let z = tape.leaf(Tensor::new([2, 1], vec![-1e6, 1e6]).unwrap());
        let lz = tape.bce_with_logits(z, &[1.0, 0.0], &[]).unwrap();
        assert!(close(tape.value(lz).item(), -PROB_CLAMP.ln(), 1e-9));
        let g = tape.backward(lz).unwrap();
        assert!(g.get(z).unwrap().is_finite());
    }

    #[test]
    fn zero_weight_rows_get_exactly_zero_gradient() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::new([2, 1], vec![0.3, -0.7]).unwrap());
        let l = tape.bce_with_logits(z, &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(z).unwrap().data()[1], 0.0);
        assert_ne!(g.get(z).unwrap().data()[0], 0.0);
    }

    #[test]
    fn softmax_xent_uniform_is_ln_classes() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::zeros(2, 4));
        let l = tape.softmax_xent(z, &[0, 3], &[]).unwrap();
        assert!(close(tape.value(l).item(), 4f64.ln(), 1e-15));
        assert!(tape.softmax_xent(z, &[0, 4], &[]).is_err());
    }
}
