use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    #[serde(with = "crate::serde_real::vec")]
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero-sized dimension in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {n} values, got {}", values.len())));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, values: vec![0.0; n] }
    }

    pub fn filled(shape: Vec<usize>, v: f64) -> Self {
        let n = shape.iter().product();
        Self { shape, values: vec![v; n] }
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: vec![1], values: vec![v] }
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// (rows, cols) of a 2-D tensor; a 1-D tensor is treated as one row.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            [c] => Ok((1, *c)),
            s => Err(Error::Shape(format!("expected a matrix, got shape {s:?}"))),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let cols = *self.shape.last().unwrap_or(&1);
        &self.values[i * cols..(i + 1) * cols]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// Named parameter tensors in a fixed architecture order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    segments: Vec<(String, Tensor)>,
}

/// Segment names and shapes, without values.
pub type Layout = Vec<(String, Vec<usize>)>;

impl ParamVector {
    pub fn new(segments: Vec<(String, Tensor)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Shape("parameter vector needs at least one segment".into()));
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[(String, Tensor)] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Tensor> {
        self.segments.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn dim(&self) -> usize {
        self.segments.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn layout(&self) -> Layout {
        self.segments.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for (_, t) in &self.segments {
            out.extend_from_slice(t.values());
        }
        out
    }

    pub fn from_flat(layout: &Layout, flat: &[f64]) -> Result<Self> {
        let need: usize = layout.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        if need != flat.len() {
            return Err(Error::Shape(format!("layout needs {need} values, got {}", flat.len())));
        }
        let mut offset = 0;
        let mut segments = Vec::with_capacity(layout.len());
        for (name, shape) in layout {
            let n: usize = shape.iter().product();
            segments.push((name.clone(), Tensor::new(shape.clone(), flat[offset..offset + n].to_vec())?));
            offset += n;
        }
        Self::new(segments)
    }

    pub fn zeros_like(&self) -> Self {
        Self { segments: self.segments.iter().map(|(n, t)| (n.clone(), Tensor::zeros(t.shape().to_vec()))).collect() }
    }

    pub fn l2_norm(&self) -> f64 {
        l2(&self.flatten())
    }

    pub fn l1_norm(&self) -> f64 {
        self.segments.iter().flat_map(|(_, t)| t.values()).map(|v| v.abs()).sum()
    }

    /// Index ranges of each segment within the flattened vector.
    pub fn segment_ranges(layout: &Layout) -> Vec<std::ops::Range<usize>> {
        let mut offset = 0;
        layout
            .iter()
            .map(|(_, s)| {
                let n: usize = s.iter().product();
                let r = offset..offset + n;
                offset += n;
                r
            })
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| alpha * xi + yi).collect()
}
