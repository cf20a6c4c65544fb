//! Named parameter tensors, initializers and the Adam optimizer.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: &str, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { name: name.to_string(), shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn filled(name: &str, shape: &[usize], value: f64) -> Self {
        let mut t = Tensor::zeros(name, shape);
        t.data.fill(value);
        t
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// `(name, shape)` for every tensor, in declaration order.
pub type ShapeManifest = Vec<(String, Vec<usize>)>;

pub fn manifest(tensors: &[Tensor]) -> ShapeManifest {
    tensors.iter().map(|t| (t.name.clone(), t.shape.clone())).collect()
}

/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` scaled by `gain`.
pub fn scaled_uniform<R: Rng + ?Sized>(t: &mut Tensor, fan_in: usize, gain: f64, rng: &mut R) {
    let bound = gain / (fan_in.max(1) as f64).sqrt();
    for x in &mut t.data {
        *x = rng.random_range(-bound..=bound);
    }
}

/// Fills a `rows × cols` matrix with (semi-)orthogonal rows or columns.
pub fn orthogonal<R: Rng + ?Sized>(t: &mut Tensor, rows: usize, cols: usize, gain: f64, rng: &mut R) {
    assert_eq!(t.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return;
    }
    let (r, c) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let g = DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let rdiag = qr.r();
    // Sign fix so the result is uniformly distributed.
    for j in 0..c {
        if rdiag[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
            t.data[i * cols + j] = gain * v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-tensor first and second moment estimates.
///
/// Update for each scalar parameter `p` with gradient `g` at step `t`:
/// `m = b1 m + (1-b1) g`, `v = b2 v + (1-b2) g²`,
/// `p -= lr · (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(tensors: &[Tensor]) -> Self {
        Adam {
            step: 0,
            m: tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
            v: tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    /// True if the moment buffers fit `tensors`.
    pub fn matches(&self, tensors: &[Tensor]) -> bool {
        self.m.len() == tensors.len() && self.m.iter().zip(tensors).all(|(m, t)| m.len() == t.len())
    }

    /// Applies one descent step on `grads`.
    pub fn step(&mut self, cfg: &AdamConfig, lr: f64, tensors: &mut [Tensor], grads: &[Vec<f64>]) {
        if !self.matches(tensors) {
            *self = Adam::new(tensors);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (k, tensor) in tensors.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, p) in tensor.data.iter_mut().enumerate() {
                let g = grads[k][i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                *p -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.eps);
            }
        }
    }
}

/// Global L2 norm of a gradient set.
pub fn grad_norm(grads: &[Vec<f64>]) -> f64 {
    grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (rows, cols) in [(4, 4), (3, 7), (7, 3)] {
            let mut t = Tensor::zeros("w", &[rows, cols]);
            orthogonal(&mut t, rows, cols, 1.0, &mut rng);
            let m = DMatrix::from_row_slice(rows, cols, &t.data);
            let gram = if rows <= cols { &m * m.transpose() } else { m.transpose() * &m };
            let eye = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
            assert!((gram - eye).abs().max() < 1e-12);
        }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut params = vec![Tensor::filled("x", &[3], 5.0)];
        let mut adam = Adam::new(&params);
        let cfg = AdamConfig::default();
        for _ in 0..2000 {
            let g: Vec<Vec<f64>> = vec![params[0].data.iter().map(|x| 2.0 * (x - 1.0)).collect()];
            adam.step(&cfg, 0.05, &mut params, &g);
        }
        for x in &params[0].data {
            assert!((x - 1.0).abs() < 1e-3);
        }
    }
}
