use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// Weights of one two-layer tower: `out = W2^T relu(W1^T x + b1) + b2`.
///
/// `w1` is `in_dim x hidden_dim` and `w2` is `hidden_dim x out_dim`, both
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerParams {
    in_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec<f64>,
}

/// Cached activations of a batch forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Activations {
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TowerGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl TowerParams {
    pub fn zeros(in_dim: usize, hidden_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            hidden_dim,
            out_dim,
            w1: vec![0.0; in_dim * hidden_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; hidden_dim * out_dim],
            b2: vec![0.0; out_dim],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, hidden_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut tower = Self::zeros(in_dim, hidden_dim, out_dim);
        let limit1 = (6.0 / (in_dim + hidden_dim) as f64).sqrt();
        tower.w1.iter_mut().for_each(|w| *w = rng.random_range(-limit1..=limit1));
        let limit2 = (6.0 / (hidden_dim + out_dim) as f64).sqrt();
        tower.w2.iter_mut().for_each(|w| *w = rng.random_range(-limit2..=limit2));
        tower
    }

    pub fn from_parts(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        let shapes = [
            (w1.len(), in_dim * hidden_dim),
            (b1.len(), hidden_dim),
            (w2.len(), hidden_dim * out_dim),
            (b2.len(), out_dim),
        ];
        for (actual, expected) in shapes {
            if actual != expected {
                return Err(Error::DimMismatch { expected, actual });
            }
        }
        if [&w1, &b1, &w2, &b2].iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Domain("tower parameters must be finite".into()));
        }
        Ok(Self {
            in_dim,
            hidden_dim,
            out_dim,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameter tensors in checkpoint order: W1, b1, W2, b2.
    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    /// Single-vector forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::DimMismatch {
                expected: self.in_dim,
                actual: x.len(),
            });
        }
        Ok(self.forward_batch(x, 1).out)
    }

    /// Forward pass over `rows` row-major inputs.
    pub(crate) fn forward_batch(&self, x: &[f64], rows: usize) -> Activations {
        debug_assert_eq!(x.len(), rows * self.in_dim);
        let mut hidden = linalg::mul(x, rows, self.in_dim, &self.w1, self.hidden_dim);
        for row in hidden.chunks_exact_mut(self.hidden_dim) {
            for (h, b) in row.iter_mut().zip(&self.b1) {
                *h = (*h + b).max(0.0);
            }
        }
        let mut out = linalg::mul(&hidden, rows, self.hidden_dim, &self.w2, self.out_dim);
        for row in out.chunks_exact_mut(self.out_dim) {
            for (o, b) in row.iter_mut().zip(&self.b2) {
                *o += b;
            }
        }
        Activations { hidden, out }
    }

    /// Parameter gradients given the loss gradient w.r.t. the batch outputs.
    pub(crate) fn backward(&self, x: &[f64], rows: usize, act: &Activations, grad_out: &[f64]) -> TowerGrads {
        let w2 = linalg::mul_tn(&act.hidden, rows, self.hidden_dim, grad_out, self.out_dim);
        let b2 = column_sums(grad_out, self.out_dim);
        let mut grad_hidden = linalg::mul_nt(grad_out, rows, self.out_dim, &self.w2, self.hidden_dim);
        for (g, h) in grad_hidden.iter_mut().zip(&act.hidden) {
            if *h <= 0.0 {
                *g = 0.0;
            }
        }
        let w1 = linalg::mul_tn(x, rows, self.in_dim, &grad_hidden, self.hidden_dim);
        let b1 = column_sums(&grad_hidden, self.hidden_dim);
        TowerGrads { w1, b1, w2, b2 }
    }
}

impl TowerGrads {
    pub(crate) fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

fn column_sums(m: &[f64], cols: usize) -> Vec<f64> {
    let mut sums = vec![0.0; cols];
    for row in m.chunks_exact(cols) {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// Maps one pre-trained embedding through a tower.
pub fn tower_forward(tower: &TowerParams, x: &[f64]) -> Result<Vec<f64>> {
    tower.forward(x)
}
