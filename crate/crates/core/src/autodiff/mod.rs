//! Dense tensors, a reverse-mode tape, and curvature products.

mod objective;
mod tape;
mod tensor;

pub use objective::{hvp, HvpMethod, Objective, Quadratic};
pub use tape::{log_softmax, log_sum_exp, softmax, GradTape, Gradients, Var};
pub use tensor::{axpy, dot, l2, Layout, ParamVector, Tensor};
