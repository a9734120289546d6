//! Approximate argmax of `u_jᵀ M u_j` over the live candidates.
//!
//! `u_jᵀ M u_j = ⟨vec(u_j u_jᵀ), vec(M)⟩`, so the search reduces to inner
//! product estimation over the flattened points. The `Flat` variant keeps a
//! single estimator over `ℝ^{d²}`; the `Columns` variant keeps one estimator
//! per column block with accuracy `ε/d` and failure probability `δ/d`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::instance::{within_bound, GroundVectors};
use crate::ipe::{InnerProductEstimator, IpeState};
use crate::linalg::{dot, Matrix};
use crate::sketch::{check_unit_interval, derive_seed, SketchOptions};

/// `vec(u uᵀ)`: entry `c·d + r` is `u_c · u_r`.
pub fn flatten(u: &[f64]) -> Vec<f64> {
    let d = u.len();
    let mut v = Vec::with_capacity(d * d);
    for &uc in u {
        v.extend(u.iter().map(|ur| uc * ur));
    }
    v
}

/// Column-stacked `vec(M)`: entry `c·d + r` is `M[r][c]`.
pub fn vectorize(m: &Matrix) -> Vec<f64> {
    let d = m.rows();
    let mut v = Vec::with_capacity(d * m.cols());
    for c in 0..m.cols() {
        v.extend((0..d).map(|r| m[(r, c)]));
    }
    v
}

/// Live index set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    universe: usize,
    live: BTreeSet<usize>,
}

impl CandidateSet {
    pub fn full(n: usize) -> Self {
        Self {
            universe: n,
            live: (0..n).collect(),
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn contains(&self, i: usize) -> bool {
        self.live.contains(&i)
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.live.iter().copied()
    }

    pub fn delete(&mut self, i: usize) -> Result<()> {
        if i >= self.universe {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.universe,
            });
        }
        if !self.live.remove(&i) {
            return Err(Error::NotLive(i));
        }
        Ok(())
    }
}

/// Largest score among live candidates; ties go to the smallest index.
pub fn argmax_live(scores: &[f64], live: &CandidateSet) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in live.iter() {
        if best.is_none_or(|(_, b)| scores[j] > b) {
            best = Some((j, scores[j]));
        }
    }
    best.map(|(j, _)| j).ok_or(Error::EmptyCandidates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QfsVariant {
    Flat,
    Columns,
}

impl QfsVariant {
    pub fn name(self) -> &'static str {
        match self {
            QfsVariant::Flat => "flat",
            QfsVariant::Columns => "columns",
        }
    }
}

pub(crate) fn check_frobenius(m: &Matrix) -> Result<()> {
    let f = m.frobenius_norm();
    if !within_bound(f, 1.0) {
        return Err(Error::FrobeniusNorm { norm: f });
    }
    Ok(())
}

/// Point stored by column estimator `c` for vector `u`: `u_c · u`.
fn column_point(u: &[f64], c: usize) -> Vec<f64> {
    u.iter().map(|v| u[c] * v).collect()
}

pub struct QuadraticFormSearch<E = IpeState> {
    variant: QfsVariant,
    d: usize,
    estimators: Vec<E>,
    live: CandidateSet,
}

impl QuadraticFormSearch<IpeState> {
    /// Guarantees `u_{j₀}ᵀ M u_{j₀} ≥ max_live − 2ε` with probability `1 − δ`
    /// for queries with `‖M‖_F ≤ 1`.
    pub fn new(gv: &GroundVectors, eps: f64, delta: f64, variant: QfsVariant, seed: u64) -> Result<Self> {
        Self::with_options(gv, eps, delta, variant, seed, &SketchOptions::default())
    }

    pub fn with_options(
        gv: &GroundVectors,
        eps: f64,
        delta: f64,
        variant: QfsVariant,
        seed: u64,
        opts: &SketchOptions,
    ) -> Result<Self> {
        check_unit_interval("delta", delta)?;
        let (n, d) = (gv.n(), gv.d());
        let bound = gv.norm_bound() * gv.norm_bound();
        let estimators = match variant {
            QfsVariant::Flat => {
                let mut flat = Matrix::zeros(n, d * d);
                for i in 0..n {
                    flat.row_mut(i).copy_from_slice(&flatten(gv.row(i)));
                }
                vec![IpeState::with_options(&flat, bound, eps, delta, seed, opts)?]
            }
            QfsVariant::Columns => {
                let (eps_c, delta_c) = (eps / d as f64, delta / d as f64);
                (0..d)
                    .map(|c| {
                        let mut pts = Matrix::zeros(n, d);
                        for i in 0..n {
                            pts.row_mut(i).copy_from_slice(&column_point(gv.row(i), c));
                        }
                        IpeState::with_options(&pts, bound, eps_c, delta_c, derive_seed(seed, c as u64), opts)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Self {
            variant,
            d,
            estimators,
            live: CandidateSet::full(n),
        })
    }
}

impl<E: InnerProductEstimator> QuadraticFormSearch<E> {
    /// Wraps caller-built estimators: one over `ℝ^{d²}` for `Flat`, `d` over `ℝ^d` for `Columns`.
    pub fn with_estimators(d: usize, variant: QfsVariant, estimators: Vec<E>) -> Result<Self> {
        let expected = match variant {
            QfsVariant::Flat => (1, d * d),
            QfsVariant::Columns => (d, d),
        };
        if estimators.len() != expected.0 {
            return Err(Error::DimensionMismatch {
                expected: expected.0,
                got: estimators.len(),
            });
        }
        if let Some(e) = estimators.iter().find(|e| e.dim() != expected.1) {
            return Err(Error::DimensionMismatch {
                expected: expected.1,
                got: e.dim(),
            });
        }
        let n = estimators[0].len();
        if estimators.iter().any(|e| e.len() != n) {
            return Err(Error::InvalidInstance("estimators disagree on n".into()));
        }
        Ok(Self {
            variant,
            d,
            estimators,
            live: CandidateSet::full(n),
        })
    }

    pub fn variant(&self) -> QfsVariant {
        self.variant
    }

    pub fn live(&self) -> &CandidateSet {
        &self.live
    }

    pub fn estimators(&self) -> &[E] {
        &self.estimators
    }

    fn check_shape(&self, m: &Matrix) -> Result<()> {
        if m.rows() != self.d || m.cols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: if m.rows() != self.d { m.rows() } else { m.cols() },
            });
        }
        Ok(())
    }

    /// Estimated `u_jᵀ M u_j` for every index, live or not.
    pub fn estimates(&self, m: &Matrix) -> Result<Vec<f64>> {
        self.check_shape(m)?;
        check_frobenius(m)?;
        match self.variant {
            QfsVariant::Flat => self.estimators[0].estimate(&vectorize(m)),
            QfsVariant::Columns => {
                let mut sums = vec![0.0; self.estimators[0].len()];
                for (c, est) in self.estimators.iter().enumerate() {
                    let w = est.estimate(&m.column(c))?;
                    for (s, v) in sums.iter_mut().zip(w) {
                        *s += v;
                    }
                }
                Ok(sums)
            }
        }
    }

    pub fn query(&self, m: &Matrix) -> Result<usize> {
        if self.live.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let scores = self.estimates(m)?;
        argmax_live(&scores, &self.live)
    }

    pub fn delete(&mut self, i: usize) -> Result<()> {
        self.live.delete(i)
    }

    /// Replaces `u_i` by `z` in every estimator.
    pub fn update(&mut self, i: usize, z: &[f64]) -> Result<()> {
        if z.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: z.len(),
            });
        }
        match self.variant {
            QfsVariant::Flat => self.estimators[0].update(i, &flatten(z)),
            QfsVariant::Columns => {
                for (c, est) in self.estimators.iter_mut().enumerate() {
                    est.update(i, &column_point(z, c))?;
                }
                Ok(())
            }
        }
    }
}

/// Exact inner products with a fixed additive error per point, for mocking an estimator.
#[derive(Debug, Clone)]
pub struct ExactEstimator {
    points: Matrix,
    offsets: Vec<f64>,
}

impl ExactEstimator {
    pub fn new(points: Matrix, offsets: Vec<f64>) -> Result<Self> {
        if offsets.len() != points.rows() {
            return Err(Error::DimensionMismatch {
                expected: points.rows(),
                got: offsets.len(),
            });
        }
        Ok(Self { points, offsets })
    }

    /// Estimators matching `QuadraticFormSearch`'s layout for `gv`, with
    /// `offset(block, i)` added to every estimate.
    pub fn layout_for(
        gv: &GroundVectors,
        variant: QfsVariant,
        offset: impl Fn(usize, usize) -> f64,
    ) -> Vec<ExactEstimator> {
        let (n, d) = (gv.n(), gv.d());
        let blocks = match variant {
            QfsVariant::Flat => 1,
            QfsVariant::Columns => d,
        };
        (0..blocks)
            .map(|c| {
                let width = if blocks == 1 { d * d } else { d };
                let mut pts = Matrix::zeros(n, width);
                for i in 0..n {
                    let p = if blocks == 1 {
                        flatten(gv.row(i))
                    } else {
                        column_point(gv.row(i), c)
                    };
                    pts.row_mut(i).copy_from_slice(&p);
                }
                ExactEstimator {
                    points: pts,
                    offsets: (0..n).map(|i| offset(c, i)).collect(),
                }
            })
            .collect()
    }
}

impl InnerProductEstimator for ExactEstimator {
    fn len(&self) -> usize {
        self.points.rows()
    }

    fn dim(&self) -> usize {
        self.points.cols()
    }

    fn estimate(&self, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: q.len(),
            });
        }
        Ok((0..self.len())
            .map(|i| dot(self.points.row(i), q) + self.offsets[i])
            .collect())
    }

    fn update(&mut self, i: usize, z: &[f64]) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.len() });
        }
        self.points.row_mut(i).copy_from_slice(z);
        Ok(())
    }
}
