//! Dense-tensor numerics with reverse-mode differentiation and optimizers.

mod optim;
mod tape;
mod tensor;

pub use optim::{optimizer_step, OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{bce_value, Gradients, Tape, Var, PROB_CLAMP};
pub use tensor::Tensor;
