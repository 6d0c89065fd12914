//! Scalar objectives over a flat parameter vector, and curvature products.

use super::tensor::{axpy, l2};
use crate::error::{Error, Result};

/// A differentiable scalar loss of a flat parameter vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn loss(&self, theta: &[f64]) -> Result<f64>;

    fn loss_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn grad(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.loss_and_grad(theta).map(|(_, g)| g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HvpMethod {
    /// (∇L(θ+εv) − ∇L(θ−εv)) / 2ε.
    #[default]
    FdCentral,
}

/// Hessian-vector product of `obj` at `theta` along `v`.
///
/// The step is ε = 1e-4·(1+‖θ‖)/‖v‖, so the probe displacement is
/// independent of the scale of `v`.
pub fn hvp(obj: &dyn Objective, theta: &[f64], v: &[f64], method: HvpMethod) -> Result<Vec<f64>> {
    if v.len() != theta.len() || theta.len() != obj.dim() {
        return Err(Error::Shape(format!("hvp: theta {} / v {} / objective {}", theta.len(), v.len(), obj.dim())));
    }
    let vn = l2(v);
    if vn == 0.0 {
        return Err(Error::InvalidArgument("hvp direction is the zero vector".into()));
    }
    match method {
        HvpMethod::FdCentral => {
            let eps = 1e-4 * (1.0 + l2(theta)) / vn;
            let plus = axpy(eps, v, theta);
            let minus = axpy(-eps, v, theta);
            let gp = obj.grad(&plus)?;
            let gm = obj.grad(&minus)?;
            let out: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
            if out.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("hessian-vector product".into()));
            }
            Ok(out)
        }
    }
}

/// ½ θᵀAθ + bᵀθ with a dense symmetric `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    scale: f64,
}

impl Quadratic {
    pub fn new(a: Vec<Vec<f64>>) -> Self {
        let d = a.len();
        Self { a, b: vec![0.0; d], scale: 1.0 }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let a = (0..d).map(|i| (0..d).map(|j| if i == j { diag[i] } else { 0.0 }).collect()).collect();
        Self::new(a)
    }

    pub fn with_linear(mut self, b: Vec<f64>) -> Self {
        self.b = b;
        self
    }

    /// Multiply the whole loss by `c`.
    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    fn a_times(&self, theta: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| row.iter().zip(theta).map(|(x, y)| x * y).sum()).collect()
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        let at = self.a_times(theta);
        let q: f64 = at.iter().zip(theta).map(|(x, y)| x * y).sum::<f64>() * 0.5;
        let lin: f64 = self.b.iter().zip(theta).map(|(x, y)| x * y).sum();
        Ok(self.scale * (q + lin))
    }

    fn loss_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let at = self.a_times(theta);
        let g = at.iter().zip(&self.b).map(|(x, b)| self.scale * (x + b)).collect();
        Ok((self.loss(theta)?, g))
    }
}
