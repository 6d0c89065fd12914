//! Fully connected classifiers on the gradient tape.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::LabeledBatch;
use crate::autodiff::{GradTape, Layout, Objective, ParamVector, Tensor, Var};
use crate::error::{invalid, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    #[default]
    HeNormal,
    XavierUniform,
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub classes: usize,
    pub dropout_p: f64,
    #[serde(default)]
    pub init: InitScheme,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "yes")]
    pub bias: bool,
}

fn yes() -> bool {
    true
}

/// Forward-pass mode. Dropout is active only in `Train`, where the mask for
/// layer `l` is drawn from a stream keyed on `(seed, step, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64, step: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

impl ModelSpec {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, classes: usize) -> Self {
        Self {
            input_dim,
            hidden_widths,
            classes,
            dropout_p: 0.0,
            init: InitScheme::default(),
            activation: Activation::default(),
            bias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.classes < 2 {
            return Err(invalid("model needs input_dim ≥ 1 and at least two classes"));
        }
        if self.hidden_widths.contains(&0) {
            return Err(invalid("hidden widths must be ≥ 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(invalid(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        Ok(())
    }

    /// Number of weight layers (hidden layers + output layer).
    pub fn depth(&self) -> usize {
        self.hidden_widths.len() + 1
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_widths);
        w.push(self.classes);
        w
    }

    pub fn layout(&self) -> Layout {
        let w = self.widths();
        let mut out = Vec::new();
        for l in 0..self.depth() {
            out.push((format!("W{l}"), vec![w[l + 1], w[l]]));
            if self.bias {
                out.push((format!("b{l}"), vec![w[l + 1]]));
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    pub fn init_params(&self, seed: u64) -> Result<ParamVector> {
        self.validate()?;
        let mut r = rng::labeled_stream(seed, "init");
        let mut segs = Vec::new();
        for (name, shape) in self.layout() {
            let n: usize = shape.iter().product();
            let vals = if name.starts_with('W') {
                let (fan_out, fan_in) = (shape[0] as f64, shape[1] as f64);
                match self.init {
                    InitScheme::HeNormal => {
                        let d = Normal::new(0.0, (2.0 / fan_in).sqrt()).map_err(|e| invalid(e.to_string()))?;
                        (0..n).map(|_| d.sample(&mut r)).collect()
                    }
                    InitScheme::XavierUniform => {
                        let a = (6.0 / (fan_in + fan_out)).sqrt();
                        (0..n).map(|_| r.random_range(-a..a)).collect()
                    }
                    InitScheme::Zeros => vec![0.0; n],
                }
            } else {
                vec![0.0; n]
            };
            segs.push((name, Tensor::new(shape, vals)?));
        }
        ParamVector::new(segs)
    }

    /// Weight matrices in layer order.
    pub fn weight_matrices<'a>(&self, params: &'a ParamVector) -> Vec<&'a Tensor> {
        (0..self.depth()).filter_map(|l| params.segment(&format!("W{l}"))).collect()
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.layout() != self.layout() {
            return Err(Error::Shape("parameter segments do not match the architecture".into()));
        }
        Ok(())
    }

    fn check_batch(&self, batch: &LabeledBatch) -> Result<()> {
        if batch.input_dim() != self.input_dim || batch.classes() != self.classes {
            return Err(Error::Shape(format!(
                "batch is {}-d/{} classes, model is {}-d/{} classes",
                batch.input_dim(),
                batch.classes(),
                self.input_dim,
                self.classes
            )));
        }
        Ok(())
    }

    fn build_logits(&self, tape: &mut GradTape, pvars: &[Var], x: Var, mode: Mode) -> Result<Var> {
        let per_layer = if self.bias { 2 } else { 1 };
        let mut h = x;
        for l in 0..self.depth() {
            let mut z = tape.linear_t(h, pvars[l * per_layer])?;
            if self.bias {
                z = tape.add_row(z, pvars[l * per_layer + 1])?;
            }
            if l + 1 < self.depth() {
                z = match self.activation {
                    Activation::Relu => tape.relu(z)?,
                    Activation::Tanh => tape.tanh(z)?,
                };
                if let Mode::Train { seed, step } = mode {
                    if self.dropout_p > 0.0 {
                        let keep = 1.0 - self.dropout_p;
                        let bern = Bernoulli::new(keep).map_err(|e| invalid(e.to_string()))?;
                        let mut r = rng::stream(seed, &[rng::label_hash("dropout"), step, l as u64]);
                        let n = tape.value(z).len();
                        let mask = (0..n).map(|_| if bern.sample(&mut r) { 1.0 / keep } else { 0.0 }).collect();
                        z = tape.mask(z, mask)?;
                    }
                }
            }
            h = z;
        }
        Ok(h)
    }

    fn tape_with_params(&self, params: &ParamVector) -> (GradTape, Vec<Var>) {
        let mut tape = GradTape::new();
        let vars = params.segments().iter().map(|(_, t)| tape.leaf(t.clone())).collect();
        (tape, vars)
    }

    pub fn logits(&self, params: &ParamVector, inputs: &Tensor) -> Result<Tensor> {
        self.check_params(params)?;
        let (mut tape, vars) = self.tape_with_params(params);
        let x = tape.constant(inputs.clone());
        let z = self.build_logits(&mut tape, &vars, x, Mode::Eval)?;
        Ok(tape.value(z).clone())
    }

    pub fn forward_loss(&self, params: &ParamVector, batch: &LabeledBatch, mode: Mode) -> Result<LossOutput> {
        self.check_params(params)?;
        self.check_batch(batch)?;
        let (mut tape, vars) = self.tape_with_params(params);
        let x = tape.constant(batch.inputs().clone());
        let z = self.build_logits(&mut tape, &vars, x, mode)?;
        let per = tape.softmax_xent(z, batch.labels())?;
        let mean = tape.mean_all(per)?;
        Ok(LossOutput { mean: tape.value(mean).values()[0], per_sample: tape.value(per).values().to_vec() })
    }

    /// Mean loss and its gradient with respect to every parameter.
    pub fn grad(&self, params: &ParamVector, batch: &LabeledBatch, mode: Mode) -> Result<(f64, ParamVector)> {
        self.check_params(params)?;
        self.check_batch(batch)?;
        let (mut tape, vars) = self.tape_with_params(params);
        let x = tape.constant(batch.inputs().clone());
        let z = self.build_logits(&mut tape, &vars, x, mode)?;
        let per = tape.softmax_xent(z, batch.labels())?;
        let mean = tape.mean_all(per)?;
        let g = tape.backward(mean)?;
        let segs = params.segments().iter().zip(&vars).map(|((n, _), v)| (n.clone(), g.get(*v))).collect();
        Ok((tape.value(mean).values()[0], ParamVector::new(segs)?))
    }

    /// Eval-mode gradient of each sample's loss.
    pub fn per_sample_grads(&self, params: &ParamVector, batch: &LabeledBatch) -> Result<Vec<ParamVector>> {
        (0..batch.len()).map(|i| self.grad(params, &batch.select(&[i])?, Mode::Eval).map(|(_, g)| g)).collect()
    }

    /// Mean over samples of ‖∇ₓ CEₙ‖₂ in eval mode.
    pub fn input_grad_norm(&self, params: &ParamVector, batch: &LabeledBatch) -> Result<f64> {
        self.check_params(params)?;
        self.check_batch(batch)?;
        let (mut tape, vars) = self.tape_with_params(params);
        let x = tape.leaf(batch.inputs().clone());
        let z = self.build_logits(&mut tape, &vars, x, Mode::Eval)?;
        let per = tape.softmax_xent(z, batch.labels())?;
        let total = tape.sum_all(per)?;
        let gx = tape.backward(total)?.get(x);
        let n = batch.len();
        let sum: f64 = (0..n).map(|i| crate::autodiff::l2(gx.row(i))).sum();
        Ok(sum / n as f64)
    }
}

/// Eval-mode mean loss of a model on a fixed batch, as a function of the
/// flattened parameters.
pub struct BatchObjective<'a> {
    spec: &'a ModelSpec,
    layout: Layout,
    batch: &'a LabeledBatch,
}

impl<'a> BatchObjective<'a> {
    pub fn new(spec: &'a ModelSpec, batch: &'a LabeledBatch) -> Self {
        Self { spec, layout: spec.layout(), batch }
    }

    pub fn batch(&self) -> &LabeledBatch {
        self.batch
    }

    fn params(&self, theta: &[f64]) -> Result<ParamVector> {
        ParamVector::from_flat(&self.layout, theta)
    }
}

impl Objective for BatchObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.spec.forward_loss(&self.params(theta)?, self.batch, Mode::Eval)?.mean)
    }

    fn loss_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (l, g) = self.spec.grad(&self.params(theta)?, self.batch, Mode::Eval)?;
        Ok((l, g.flatten()))
    }
}
