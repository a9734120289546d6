//! Additive-error inner product estimation on top of distance estimation.
//!
//! Stored points are scaled by `1/D` and lifted with `Q`, queries with `P`:
//!
//! ```text
//! Q(a) = [a, 0, √(1 − ‖a‖²)]      P(b) = [b, √(1 − ‖b‖²), 0]
//! ```
//!
//! Both lifts are unit vectors and `⟨Q(a), P(b)⟩ = ⟨a, b⟩`, so
//! `⟨q, x⟩ = D (1 − ½ ‖Q(x/D) − P(q)‖²)`.

use crate::error::{Error, Result};
use crate::instance::within_bound;
use crate::linalg::{norm, norm_squared, Matrix};
use crate::sketch::{check_unit_interval, SketchEnsemble, SketchOptions};

fn pad(a: &[f64]) -> f64 {
    (1.0 - norm_squared(a)).max(0.0).sqrt()
}

/// `[b, √(1 − ‖b‖²), 0]`.
pub fn lift_p(b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(b.len() + 2);
    out.extend_from_slice(b);
    out.push(pad(b));
    out.push(0.0);
    out
}

/// `[a, 0, √(1 − ‖a‖²)]`.
pub fn lift_q(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + 2);
    out.extend_from_slice(a);
    out.push(0.0);
    out.push(pad(a));
    out
}

/// `D (1 − ½ d²)`.
pub fn distance_to_inner(distance: f64, bound: f64) -> f64 {
    bound * (1.0 - 0.5 * distance * distance)
}

/// Inner accuracy `ε' = 2ε / (3D)` and the resulting worst-case additive error
/// `½ D (2ε' + ε'²)`, which never exceeds `ε` while `ε' ≤ 1`.
pub fn error_budget(eps: f64, bound: f64) -> (f64, f64) {
    let eps_prime = 2.0 * eps / (3.0 * bound);
    (eps_prime, 0.5 * bound * (2.0 * eps_prime + eps_prime * eps_prime))
}

/// Anything returning per-point estimates of `⟨q, x_i⟩`.
pub trait InnerProductEstimator: Send + Sync {
    fn len(&self) -> usize;

    fn dim(&self) -> usize;

    fn estimate(&self, q: &[f64]) -> Result<Vec<f64>>;

    fn update(&mut self, i: usize, z: &[f64]) -> Result<()>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug)]
pub struct IpeState {
    ade: SketchEnsemble,
    bound: f64,
    eps: f64,
    eps_prime: f64,
    delta: f64,
    dim: usize,
}

impl IpeState {
    pub fn new(points: &Matrix, bound: f64, eps: f64, delta: f64, seed: u64) -> Result<Self> {
        Self::with_options(points, bound, eps, delta, seed, &SketchOptions::default())
    }

    pub fn with_options(
        points: &Matrix,
        bound: f64,
        eps: f64,
        delta: f64,
        seed: u64,
        opts: &SketchOptions,
    ) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "norm_bound",
                value: bound,
                range: "(0, inf)",
            });
        }
        if !(eps > 0.0 && eps < 1.5 * bound) {
            return Err(Error::InvalidParameter {
                name: "eps",
                value: eps,
                range: "(0, 3D/2)",
            });
        }
        check_unit_interval("delta", delta)?;
        let (eps_prime, worst) = error_budget(eps, bound);
        if worst > eps * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "eps",
                value: eps,
                range: "error budget exceeded",
            });
        }
        let dim = points.cols();
        let mut lifted = Matrix::zeros(points.rows(), dim + 2);
        for i in 0..points.rows() {
            lifted.row_mut(i).copy_from_slice(&Self::lift_point(points.row(i), bound, Some(i))?);
        }
        let ade = SketchEnsemble::with_options(&lifted, eps_prime, delta, seed, opts)?;
        Ok(Self {
            ade,
            bound,
            eps,
            eps_prime,
            delta,
            dim,
        })
    }

    fn lift_point(x: &[f64], bound: f64, index: Option<usize>) -> Result<Vec<f64>> {
        let xn = norm(x);
        if !within_bound(xn, bound) {
            return Err(Error::NormBound { index, norm: xn, bound });
        }
        let scaled: Vec<f64> = x.iter().map(|v| v / bound).collect();
        Ok(lift_q(&scaled))
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn ensemble(&self) -> &SketchEnsemble {
        &self.ade
    }

    /// Estimates of `⟨q, x_i⟩` for every stored point; `‖q‖ ≤ 1` is required.
    pub fn query(&self, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: q.len(),
            });
        }
        let qn = norm(q);
        if !within_bound(qn, 1.0) {
            return Err(Error::QueryNorm { norm: qn });
        }
        let distances = self.ade.query(&lift_p(q))?;
        Ok(distances
            .into_iter()
            .map(|d| distance_to_inner(d, self.bound))
            .collect())
    }
}

impl InnerProductEstimator for IpeState {
    fn len(&self) -> usize {
        self.ade.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn estimate(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.query(q)
    }

    fn update(&mut self, i: usize, z: &[f64]) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.len() });
        }
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        let lifted = Self::lift_point(z, self.bound, Some(i))?;
        self.ade.update(i, &lifted)
    }
}
