//! Append-only operation log with a single reverse sweep.
//!
//! Nodes are pushed in evaluation order, so every parent index is smaller
//! than its child's and the backward pass is a plain reverse scan.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf {
        differentiable: bool,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// x (n×i) · wᵀ where w is (o×i).
    LinearT(Var, Var),
    /// a (n×o) + b (o) broadcast over rows.
    AddRow(Var, Var),
    Relu(Var),
    Tanh(Var),
    /// Elementwise product with a constant mask (dropout).
    Mask(Var, Vec<f64>),
    SumAll(Var),
    MeanAll(Var),
    /// Per-row softmax cross-entropy against integer labels; output shape [n].
    SoftmaxXent(Var, Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar output with respect to every node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; zeros when `v` does not influence the output.
    pub fn get(&self, v: Var) -> Tensor {
        self.grads[v.0].clone().unwrap_or_else(|| Tensor::zeros(self.shapes[v.0].clone()))
    }
}

impl GradTape {
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

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push_unchecked(t, Op::Leaf { differentiable: true })
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push_unchecked(t, Op::Leaf { differentiable: false })
    }

    fn push_unchecked(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, what: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(what.to_string()));
        }
        Ok(self.push_unchecked(value, op))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape(format!("{what}: {:?} vs {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let vals = self.value(a).values().iter().zip(self.value(b).values()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), vals)?;
        self.push(t, Op::Add(a, b), "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let vals = self.value(a).values().iter().zip(self.value(b).values()).map(|(x, y)| x * y).collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), vals)?;
        self.push(t, Op::Mul(a, b), "mul")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let t = self.value(a).map(|v| v * c);
        self.push(t, Op::Scale(a, c), "scale")
    }

    pub fn linear_t(&mut self, x: Var, w: Var) -> Result<Var> {
        let (n, i) = self.value(x).dims2()?;
        let (o, wi) = self.value(w).dims2()?;
        if i != wi {
            return Err(Error::Shape(format!("linear: input width {i} vs weight width {wi}")));
        }
        let xv = self.value(x).values();
        let wv = self.value(w).values();
        let mut out = vec![0.0; n * o];
        for r in 0..n {
            let xr = &xv[r * i..(r + 1) * i];
            for c in 0..o {
                let wr = &wv[c * i..(c + 1) * i];
                out[r * o + c] = xr.iter().zip(wr).map(|(a, b)| a * b).sum();
            }
        }
        self.push(Tensor::matrix(n, o, out)?, Op::LinearT(x, w), "linear")
    }

    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, o) = self.value(a).dims2()?;
        if self.value(b).len() != o {
            return Err(Error::Shape(format!("bias length {} vs width {o}", self.value(b).len())));
        }
        let bv = self.value(b).values();
        let vals = self.value(a).values().iter().enumerate().map(|(k, v)| v + bv[k % o]).collect();
        self.push(Tensor::matrix(n, o, vals)?, Op::AddRow(a, b), "bias add")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).map(|v| v.max(0.0));
        self.push(t, Op::Relu(a), "relu")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).map(f64::tanh);
        self.push(t, Op::Tanh(a), "tanh")
    }

    pub fn mask(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return Err(Error::Shape("mask length".into()));
        }
        let vals = self.value(a).values().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), vals)?;
        self.push(t, Op::Mask(a, mask), "dropout")
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).values().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a), "sum")
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let s = t.values().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(s), Op::MeanAll(a), "mean")
    }

    /// Per-sample cross-entropy of `logits` (n×K), computed via log-sum-exp.
    pub fn softmax_xent(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (n, k) = self.value(logits).dims2()?;
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::Shape(format!("label {bad} out of range for {k} classes")));
        }
        let z = self.value(logits);
        let losses = (0..n).map(|r| log_sum_exp(z.row(r)) - z.row(r)[labels[r]]).collect();
        self.push(Tensor::new(vec![n], losses)?, Op::SoftmaxXent(logits, labels.to_vec()), "cross-entropy")
    }

    /// Reverse sweep from a single-element output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).len() != 1 {
            return Err(Error::Shape("backward needs a scalar output".into()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::filled(self.value(output).shape().to_vec(), 1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { differentiable } => {
                    if *differentiable {
                        grads[idx] = Some(g);
                    }
                    continue;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.values(), self);
                    accumulate(&mut grads, *b, g.values(), self);
                }
                Op::Mul(a, b) => {
                    let ga: Vec<f64> = g.values().iter().zip(self.value(*b).values()).map(|(g, y)| g * y).collect();
                    let gb: Vec<f64> = g.values().iter().zip(self.value(*a).values()).map(|(g, x)| g * x).collect();
                    accumulate(&mut grads, *a, &ga, self);
                    accumulate(&mut grads, *b, &gb, self);
                }
                Op::Scale(a, c) => {
                    let ga: Vec<f64> = g.values().iter().map(|v| v * c).collect();
                    accumulate(&mut grads, *a, &ga, self);
                }
                Op::LinearT(x, w) => {
                    let (n, i) = self.value(*x).dims2()?;
                    let (o, _) = self.value(*w).dims2()?;
                    let xv = self.value(*x).values();
                    let wv = self.value(*w).values();
                    let gv = g.values();
                    let mut gx = vec![0.0; n * i];
                    let mut gw = vec![0.0; o * i];
                    for r in 0..n {
                        for c in 0..o {
                            let gc = gv[r * o + c];
                            if gc == 0.0 {
                                continue;
                            }
                            for j in 0..i {
                                gx[r * i + j] += gc * wv[c * i + j];
                                gw[c * i + j] += gc * xv[r * i + j];
                            }
                        }
                    }
                    accumulate(&mut grads, *x, &gx, self);
                    accumulate(&mut grads, *w, &gw, self);
                }
                Op::AddRow(a, b) => {
                    let o = self.value(*b).len();
                    let mut gb = vec![0.0; o];
                    for (k, v) in g.values().iter().enumerate() {
                        gb[k % o] += v;
                    }
                    accumulate(&mut grads, *a, g.values(), self);
                    accumulate(&mut grads, *b, &gb, self);
                }
                Op::Relu(a) => {
                    let ga: Vec<f64> = g
                        .values()
                        .iter()
                        .zip(self.value(*a).values())
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *a, &ga, self);
                }
                Op::Tanh(a) => {
                    let ga: Vec<f64> =
                        g.values().iter().zip(node.value.values()).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut grads, *a, &ga, self);
                }
                Op::Mask(a, m) => {
                    let ga: Vec<f64> = g.values().iter().zip(m).map(|(g, m)| g * m).collect();
                    accumulate(&mut grads, *a, &ga, self);
                }
                Op::SumAll(a) => {
                    let ga = vec![g.values()[0]; self.value(*a).len()];
                    accumulate(&mut grads, *a, &ga, self);
                }
                Op::MeanAll(a) => {
                    let n = self.value(*a).len();
                    let ga = vec![g.values()[0] / n as f64; n];
                    accumulate(&mut grads, *a, &ga, self);
                }
                Op::SoftmaxXent(z, labels) => {
                    let zt = self.value(*z);
                    let (n, k) = zt.dims2()?;
                    let mut gz = vec![0.0; n * k];
                    for r in 0..n {
                        let p = softmax(zt.row(r));
                        let up = g.values()[r];
                        for c in 0..k {
                            let onehot = if c == labels[r] { 1.0 } else { 0.0 };
                            gz[r * k + c] = up * (p[c] - onehot);
                        }
                    }
                    accumulate(&mut grads, *z, &gz, self);
                }
            }
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: &[f64], tape: &GradTape) {
    match &mut grads[v.0] {
        Some(t) => {
            for (a, b) in t.values_mut().iter_mut().zip(g) {
                *a += b;
            }
        }
        slot @ None => {
            let shape = tape.value(v).shape().to_vec();
            *slot = Some(Tensor::new(shape, g.to_vec()).expect("gradient shape matches node"));
        }
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| (v - lse).exp()).collect()
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| v - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rand_tensor(r: &mut impl Rng, shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| r.random_range(-1.5..1.5)).collect()).unwrap()
    }

    /// Central-difference check of d(loss)/d(leaf) for a tape builder.
    fn gradcheck(leaves: Vec<Tensor>, build: impl Fn(&mut GradTape, &[Var]) -> Result<Var>) {
        let mut tape = GradTape::new();
        let vars: Vec<Var> = leaves.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &vars).unwrap();
        let grads = tape.backward(out).unwrap();
        let eval = |ls: &[Tensor]| {
            let mut t = GradTape::new();
            let vs: Vec<Var> = ls.iter().map(|x| t.leaf(x.clone())).collect();
            let o = build(&mut t, &vs).unwrap();
            t.value(o).values()[0]
        };
        let h = 1e-5;
        for (li, leaf) in leaves.iter().enumerate() {
            let analytic = grads.get(vars[li]);
            for k in 0..leaf.len() {
                let mut plus = leaves.clone();
                plus[li].values_mut()[k] += h;
                let mut minus = leaves.clone();
                minus[li].values_mut()[k] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic.values()[k];
                let rel = (a - fd).abs() / (1.0f64).max(a.abs().max(fd.abs()));
                assert!(rel < 1e-5, "leaf {li} coord {k}: analytic {a} vs fd {fd}");
            }
        }
    }

    #[test]
    fn primitives_pass_gradcheck() {
        let mut r = crate::rng::stream(11, &[]);
        for _ in 0..20 {
            let a = rand_tensor(&mut r, vec![3, 4]);
            let b = rand_tensor(&mut r, vec![3, 4]);
            let w = rand_tensor(&mut r, vec![2, 4]);
            let bias = rand_tensor(&mut r, vec![2]);
            let mask: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 0.0 } else { 1.5 }).collect();
            gradcheck(vec![a.clone(), b.clone()], |t, v| {
                let s = t.add(v[0], v[1])?;
                let m = t.mul(s, v[1])?;
                let m = t.scale(m, -0.7)?;
                let th = t.tanh(m)?;
                let mk = t.mask(th, mask.clone())?;
                t.sum_all(mk)
            });
            gradcheck(vec![a.clone(), w.clone(), bias.clone()], |t, v| {
                let z = t.linear_t(v[0], v[1])?;
                let z = t.add_row(z, v[2])?;
                let l = t.softmax_xent(z, &[0, 1, 1])?;
                t.mean_all(l)
            });
            // Relu away from its kink: shift inputs so no entry sits within h of 0.
            let shifted = a.map(|x| if x.abs() < 1e-3 { x + 0.01 } else { x });
            gradcheck(vec![shifted], |t, v| {
                let y = t.relu(v[0])?;
                let y = t.mul(y, v[0])?;
                t.mean_all(y)
            });
        }
    }

    #[test]
    fn constants_get_zero_gradient() {
        let mut t = GradTape::new();
        let c = t.constant(Tensor::scalar(3.0));
        let x = t.leaf(Tensor::scalar(2.0));
        let y = t.mul(c, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).values(), &[3.0]);
        assert_eq!(g.get(c).values(), &[0.0]);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        let mut t = GradTape::new();
        let x = t.leaf(Tensor::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        let z = t.add(y, x).unwrap();
        let g = t.backward(z).unwrap();
        assert_eq!(g.get(x).values(), &[7.0]);
    }

    #[test]
    fn non_finite_forward_is_an_error() {
        let mut t = GradTape::new();
        let x = t.leaf(Tensor::scalar(f64::MAX));
        assert!(matches!(t.scale(x, 10.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn uniform_logits_give_ln2() {
        let mut t = GradTape::new();
        let z = t.leaf(Tensor::matrix(2, 2, vec![0.3, 0.3, -1.0, -1.0]).unwrap());
        let l = t.softmax_xent(z, &[0, 1]).unwrap();
        for v in t.value(l).values() {
            assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }
}
