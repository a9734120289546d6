//! Embedding representation of a submodular instance.
//!
//! An instance is a set of ground vectors `u_1..u_n` together with a matrix
//! oracle `h` such that the marginal gain of adding `i` to `S` is
//! `u_iᵀ h(S) u_i` and `f(S)` is the sum of marginal gains along any chain
//! building `S` from the empty set.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, quadratic_form, Matrix};

/// Relative slack accepted on every norm-bound check.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Relative tolerance for the exact-math identities (chain sums, closed forms).
pub const ACCUMULATION_TOLERANCE: f64 = 1e-9;

pub(crate) fn within_bound(norm: f64, bound: f64) -> bool {
    norm <= bound * (1.0 + NORM_TOLERANCE)
}

/// Ground vectors `u_i ∈ ℝᵈ`, stored as the rows of an `n × d` matrix,
/// together with a norm bound `D ≥ max ‖u_i‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundVectors {
    rows: Matrix,
    norm_bound: f64,
}

impl GroundVectors {
    /// Uses the largest row norm as `D` when no bound is given.
    pub fn new(rows: Matrix, norm_bound: Option<f64>) -> Result<Self> {
        if rows.rows() == 0 || rows.cols() == 0 {
            return Err(Error::InvalidInstance(
                "ground set needs n >= 1 and d >= 1".into(),
            ));
        }
        let max_norm = (0..rows.rows())
            .map(|i| norm(rows.row(i)))
            .fold(0.0, f64::max);
        if let Some(i) = (0..rows.rows()).find(|&i| !rows.row(i).iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInstance(format!("vector {i} has a non-finite entry")));
        }
        let bound = match norm_bound {
            Some(bound) => {
                if !(bound > 0.0 && bound.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "norm_bound",
                        value: bound,
                        range: "(0, inf)",
                    });
                }
                if let Some(i) = (0..rows.rows()).find(|&i| !within_bound(norm(rows.row(i)), bound)) {
                    return Err(Error::NormBound {
                        index: Some(i),
                        norm: norm(rows.row(i)),
                        bound,
                    });
                }
                bound
            }
            None if max_norm > 0.0 => max_norm,
            None => 1.0,
        };
        Ok(Self {
            rows,
            norm_bound: bound,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], norm_bound: Option<f64>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, norm_bound)
    }

    pub fn n(&self) -> usize {
        self.rows.rows()
    }

    pub fn d(&self) -> usize {
        self.rows.cols()
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.n()).map(|i| norm(self.row(i))).fold(0.0, f64::max)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.rows
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n(),
            });
        }
        Ok(())
    }

    /// Replaces `u_i` by `z`; `z` must respect the norm bound.
    pub fn set_row(&mut self, i: usize, z: &[f64]) -> Result<()> {
        self.check_index(i)?;
        if z.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: z.len(),
            });
        }
        let zn = norm(z);
        if !within_bound(zn, self.norm_bound) {
            return Err(Error::NormBound {
                index: Some(i),
                norm: zn,
                bound: self.norm_bound,
            });
        }
        self.rows.row_mut(i).copy_from_slice(z);
        Ok(())
    }

    /// Rows rescaled as `u_i · factors[i]`, with the bound recomputed from the result.
    pub fn rescaled(&self, factors: &[f64]) -> Result<GroundVectors> {
        if factors.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: factors.len(),
            });
        }
        let mut rows = self.rows.clone();
        for (i, f) in factors.iter().enumerate() {
            rows.row_mut(i).iter_mut().for_each(|v| *v *= f);
        }
        GroundVectors::new(rows, None)
    }
}

/// Set-indexed gain matrix `h : 2^[n] → ℝ^{d×d}`.
///
/// `evaluate` must depend on the set only, not on the order of its entries.
pub trait MarginalOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn evaluate(&self, gv: &GroundVectors, set: &[usize]) -> Matrix;

    /// Advances `h` from `h(prior)` to `h(prior ∪ {added})`.
    fn extend(&self, gv: &GroundVectors, h: &mut Matrix, prior: &[usize], added: usize) {
        let mut set = prior.to_vec();
        set.push(added);
        *h = self.evaluate(gv, &set);
    }

    /// `H ≥ sup_S ‖h(S)‖_F`.
    fn frobenius_bound(&self, gv: &GroundVectors) -> f64;

    /// True when every `h(S)` is positive semidefinite.
    fn is_psd(&self) -> bool;
}

/// `h(S) = B − 2λ Σ_{j∈S} u_j u_jᵀ`, which induces
/// `f(S) = Σ_{i∈S} u_iᵀ B u_i − λ Σ_{i≠j∈S} ⟨u_i, u_j⟩²`.
///
/// Submodular for `λ ≥ 0`; monotone when `λ` is at most
/// [`DiversityFamily::max_monotone_lambda`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityFamily {
    base: Matrix,
    lambda: f64,
    current: Matrix,
}

impl DiversityFamily {
    pub fn new(base: Matrix, lambda: f64) -> Result<Self> {
        if !base.is_square() || base.rows() == 0 {
            return Err(Error::InvalidInstance("base matrix must be square".into()));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                range: "finite",
            });
        }
        for i in 0..base.rows() {
            for j in 0..i {
                if (base[(i, j)] - base[(j, i)]).abs() > 1e-12 * (1.0 + base[(i, j)].abs()) {
                    return Err(Error::InvalidInstance("base matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self {
            current: base.clone(),
            base,
            lambda,
        })
    }

    pub fn base(&self) -> &Matrix {
        &self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The incrementally maintained `h(S)` for the elements passed to [`step`](Self::step).
    pub fn current(&self) -> &Matrix {
        &self.current
    }

    pub fn reset(&mut self) {
        self.current = self.base.clone();
    }

    /// `current ← current − 2λ u_j u_jᵀ`.
    pub fn step(&mut self, gv: &GroundVectors, j: usize) -> Result<()> {
        gv.check_index(j)?;
        if self.lambda != 0.0 {
            self.current.add_outer(-2.0 * self.lambda, gv.row(j));
        }
        Ok(())
    }

    /// Largest λ keeping every marginal gain nonnegative:
    /// `min_i u_iᵀ B u_i / (2 Σ_{j≠i} ⟨u_i, u_j⟩²)`, infinite if no pair overlaps.
    pub fn max_monotone_lambda(gv: &GroundVectors, base: &Matrix) -> f64 {
        let n = gv.n();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let ui = gv.row(i);
            let own = quadratic_form(base, ui);
            let overlap: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| dot(ui, gv.row(j)).powi(2))
                .sum();
            if overlap > 0.0 {
                best = best.min(own.max(0.0) / (2.0 * overlap));
            }
        }
        best
    }

    /// Closed-form `f(S)`.
    pub fn value(&self, gv: &GroundVectors, set: &[usize]) -> f64 {
        let own: f64 = set.iter().map(|&i| quadratic_form(&self.base, gv.row(i))).sum();
        let mut cross = 0.0;
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                cross += dot(gv.row(i), gv.row(j)).powi(2);
            }
        }
        own - 2.0 * self.lambda * cross
    }
}

impl MarginalOracle for DiversityFamily {
    fn dim(&self) -> usize {
        self.base.rows()
    }

    fn evaluate(&self, gv: &GroundVectors, set: &[usize]) -> Matrix {
        let mut h = self.base.clone();
        if self.lambda != 0.0 {
            for &j in set {
                h.add_outer(-2.0 * self.lambda, gv.row(j));
            }
        }
        h
    }

    fn extend(&self, gv: &GroundVectors, h: &mut Matrix, _prior: &[usize], added: usize) {
        if self.lambda != 0.0 {
            h.add_outer(-2.0 * self.lambda, gv.row(added));
        }
    }

    fn frobenius_bound(&self, gv: &GroundVectors) -> f64 {
        let spread: f64 = (0..gv.n()).map(|i| dot(gv.row(i), gv.row(i))).sum();
        self.base.frobenius_norm() + 2.0 * self.lambda.abs() * spread
    }

    fn is_psd(&self) -> bool {
        self.lambda <= 0.0 && self.base.min_symmetric_eigenvalue() >= -1e-12
    }
}

/// Ground vectors plus a shared gain-matrix oracle.
#[derive(Debug, Clone)]
pub struct Instance {
    pub vectors: GroundVectors,
    pub oracle: Arc<dyn MarginalOracle>,
}

impl Instance {
    pub fn new(vectors: GroundVectors, oracle: Arc<dyn MarginalOracle>) -> Result<Self> {
        if oracle.dim() != vectors.d() {
            return Err(Error::DimensionMismatch {
                expected: vectors.d(),
                got: oracle.dim(),
            });
        }
        Ok(Self { vectors, oracle })
    }

    pub fn n(&self) -> usize {
        self.vectors.n()
    }

    pub fn d(&self) -> usize {
        self.vectors.d()
    }

    pub fn marginal_gain(&self, set: &[usize], i: usize) -> Result<f64> {
        marginal_gain(&self.vectors, self.oracle.as_ref(), set, i)
    }

    pub fn value(&self, chain: &[usize]) -> Result<f64> {
        evaluate_f(&self.vectors, self.oracle.as_ref(), chain)
    }
}

/// Independence system over `[n]`.
pub trait Matroid: Send + Sync + fmt::Debug {
    fn ground_size(&self) -> usize;

    fn is_independent(&self, set: &[usize]) -> bool;

    fn rank(&self) -> usize;
}

/// Uniform matroid `U(k, n)`: every set of size at most `k` is independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformMatroid {
    pub n: usize,
    pub k: usize,
}

impl Matroid for UniformMatroid {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn is_independent(&self, set: &[usize]) -> bool {
        set.len() <= self.k && set.iter().all(|&i| i < self.n)
    }

    fn rank(&self) -> usize {
        self.k.min(self.n)
    }
}

/// Partition matroid: element `i` belongs to block `block_of[i]`, and a set is
/// independent when it holds at most `capacity[b]` elements of every block `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMatroid {
    block_of: Vec<usize>,
    capacity: Vec<usize>,
}

impl PartitionMatroid {
    pub fn new(block_of: Vec<usize>, capacity: Vec<usize>) -> Result<Self> {
        if let Some((i, &b)) = block_of.iter().enumerate().find(|(_, &b)| b >= capacity.len()) {
            return Err(Error::InvalidInstance(format!(
                "element {i} assigned to block {b}, but only {} blocks exist",
                capacity.len()
            )));
        }
        Ok(Self { block_of, capacity })
    }

    /// Element `i` goes to block `i mod blocks`, each block with the same capacity.
    pub fn round_robin(n: usize, blocks: usize, capacity: usize) -> Result<Self> {
        if blocks == 0 {
            return Err(Error::InvalidInstance("need at least one block".into()));
        }
        Self::new((0..n).map(|i| i % blocks).collect(), vec![capacity; blocks])
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }
}

impl Matroid for PartitionMatroid {
    fn ground_size(&self) -> usize {
        self.block_of.len()
    }

    fn is_independent(&self, set: &[usize]) -> bool {
        let mut used = vec![0usize; self.capacity.len()];
        for &i in set {
            let Some(&b) = self.block_of.get(i) else {
                return false;
            };
            used[b] += 1;
            if used[b] > self.capacity[b] {
                return false;
            }
        }
        true
    }

    fn rank(&self) -> usize {
        let mut sizes = vec![0usize; self.capacity.len()];
        for &b in &self.block_of {
            sizes[b] += 1;
        }
        sizes.iter().zip(&self.capacity).map(|(s, c)| *s.min(c)).sum()
    }
}

#[derive(Debug, Clone)]
pub enum Constraint {
    Cardinality(usize),
    Matroid(Arc<dyn Matroid>),
    Knapsack { weights: Vec<f64>, budget: f64 },
}

impl Constraint {
    pub fn knapsack(weights: Vec<f64>, budget: f64) -> Result<Self> {
        if let Some(&w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "weight",
                value: w,
                range: "(0, inf)",
            });
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "budget",
                value: budget,
                range: "(0, inf)",
            });
        }
        Ok(Constraint::Knapsack { weights, budget })
    }

    /// Feasibility of a whole set (downward closed for every variant).
    pub fn admits(&self, set: &[usize]) -> bool {
        match self {
            Constraint::Cardinality(k) => set.len() <= *k,
            Constraint::Matroid(m) => m.is_independent(set),
            Constraint::Knapsack { weights, budget } => {
                set.iter().map(|&i| weights[i]).sum::<f64>() <= *budget
            }
        }
    }
}

/// Counters reported by the maximizers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub queries: usize,
    pub deletes: usize,
    pub updates: usize,
    /// Steps where the search backend declined and an exact scan picked the element.
    pub fallbacks: usize,
}

/// Ordered selection chain with the exact marginal gain of every step.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRun {
    pub chain: Vec<usize>,
    pub gains: Vec<f64>,
    pub value: f64,
    pub timings: Vec<Duration>,
    /// Per step, the factor converting the backend's additive error into gain units.
    pub scales: Vec<f64>,
    pub stats: RunStats,
}

impl SelectionRun {
    pub fn empty() -> Self {
        Self {
            chain: Vec::new(),
            gains: Vec::new(),
            value: 0.0,
            timings: Vec::new(),
            scales: Vec::new(),
            stats: RunStats::default(),
        }
    }

    pub fn max_scale(&self) -> f64 {
        self.scales.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_time(&self) -> Duration {
        self.timings.iter().sum()
    }

    /// Checks the two structural invariants: no duplicates, value equals the gain sum.
    pub fn is_consistent(&self) -> bool {
        let unique: BTreeSet<_> = self.chain.iter().collect();
        let sum: f64 = self.gains.iter().sum();
        unique.len() == self.chain.len()
            && self.gains.len() == self.chain.len()
            && (self.value - sum).abs() <= ACCUMULATION_TOLERANCE * self.value.abs() + 1e-12
    }
}

/// `Δ_f(i | S) = u_iᵀ h(S) u_i`.
pub fn marginal_gain(
    gv: &GroundVectors,
    oracle: &dyn MarginalOracle,
    set: &[usize],
    i: usize,
) -> Result<f64> {
    gv.check_index(i)?;
    if let Some(&j) = set.iter().find(|&&j| j >= gv.n()) {
        return Err(Error::IndexOutOfRange { index: j, len: gv.n() });
    }
    if set.contains(&i) {
        return Err(Error::AlreadySelected(i));
    }
    Ok(quadratic_form(&oracle.evaluate(gv, set), gv.row(i)))
}

/// `f(S) = Σ_j Δ_f(i_j | S_{j−1})` along `chain`, with `f(∅) = 0`.
pub fn evaluate_f(gv: &GroundVectors, oracle: &dyn MarginalOracle, chain: &[usize]) -> Result<f64> {
    let mut seen = BTreeSet::new();
    for &i in chain {
        gv.check_index(i)?;
        if !seen.insert(i) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    let mut h = oracle.evaluate(gv, &[]);
    let mut total = 0.0;
    for (t, &i) in chain.iter().enumerate() {
        total += quadratic_form(&h, gv.row(i));
        oracle.extend(gv, &mut h, &chain[..t], i);
    }
    Ok(total)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub monotonicity_violations: usize,
    pub submodularity_violations: usize,
    pub psd_violations: usize,
    pub frobenius_violations: usize,
    /// Most negative marginal gain seen.
    pub worst_gain: f64,
}

impl ValidationReport {
    pub fn violations(&self) -> usize {
        self.monotonicity_violations
            + self.submodularity_violations
            + self.psd_violations
            + self.frobenius_violations
    }

    pub fn is_clean(&self) -> bool {
        self.violations() == 0
    }
}

/// Samples random `S ⊆ T` and `i ∉ T` and reports violations of monotonicity,
/// submodularity, PSD-ness (when the oracle claims it) and the Frobenius bound.
pub fn validate_instance<R: Rng + ?Sized>(
    gv: &GroundVectors,
    oracle: &dyn MarginalOracle,
    sample_budget: usize,
    rng: &mut R,
) -> ValidationReport {
    const SLACK: f64 = 1e-10;
    let n = gv.n();
    let bound = oracle.frobenius_bound(gv);
    let mut report = ValidationReport {
        worst_gain: f64::INFINITY,
        ..Default::default()
    };
    if n < 2 {
        let g = quadratic_form(&oracle.evaluate(gv, &[]), gv.row(0));
        report.worst_gain = g;
        report.monotonicity_violations = usize::from(g < -SLACK);
        return report;
    }
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..sample_budget {
        order.shuffle(rng);
        let (i, rest) = order.split_first().unwrap();
        let t_len = rng.random_range(0..rest.len() + 1);
        let s_len = rng.random_range(0..t_len + 1);
        let small = &rest[..s_len];
        let large = &rest[..t_len];
        let h_small = oracle.evaluate(gv, small);
        let h_large = oracle.evaluate(gv, large);
        let g_small = quadratic_form(&h_small, gv.row(*i));
        let g_large = quadratic_form(&h_large, gv.row(*i));
        report.samples += 1;
        report.worst_gain = report.worst_gain.min(g_small).min(g_large);
        if g_small < -SLACK || g_large < -SLACK {
            report.monotonicity_violations += 1;
        }
        if g_large > g_small + SLACK {
            report.submodularity_violations += 1;
        }
        if oracle.is_psd() && h_large.min_symmetric_eigenvalue() < -1e-8 {
            report.psd_violations += 1;
        }
        if h_small.frobenius_norm().max(h_large.frobenius_norm()) > bound * (1.0 + 1e-12) {
            report.frobenius_violations += 1;
        }
    }
    report
}

/// Shape of the base matrix `B` for generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Identity,
    /// Diagonal with entries drawn uniformly from `[0.5, 1.5]`.
    RandomDiagonal,
}

/// Random diversity instance. Vectors have uniformly random directions and
/// norms in `[0.2·D, D]`; `λ = lambda_scale · max_monotone_lambda`, so any
/// `lambda_scale ∈ [0, 1]` keeps the instance monotone.
pub fn random_diversity_instance<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    norm_bound: f64,
    lambda_scale: f64,
    base_kind: BaseKind,
    rng: &mut R,
) -> Result<(GroundVectors, DiversityFamily)> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidInstance("need n >= 1 and d >= 1".into()));
    }
    if !(norm_bound > 0.0 && norm_bound.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "norm_bound",
            value: norm_bound,
            range: "(0, inf)",
        });
    }
    if !(0.0..=1.0).contains(&lambda_scale) {
        return Err(Error::InvalidParameter {
            name: "lambda_scale",
            value: lambda_scale,
            range: "[0, 1]",
        });
    }
    let mut rows = Matrix::zeros(n, d);
    for i in 0..n {
        let dir: Vec<f64> = loop {
            let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            if norm(&g) > 1e-12 {
                break g;
            }
        };
        let length = norm_bound * rng.random_range(0.2..=1.0) / norm(&dir);
        for (dst, g) in rows.row_mut(i).iter_mut().zip(&dir) {
            *dst = g * length;
        }
    }
    let gv = GroundVectors::new(rows, Some(norm_bound))?;
    let base = match base_kind {
        BaseKind::Identity => Matrix::identity(d),
        BaseKind::RandomDiagonal => {
            let diag: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..=1.5)).collect();
            Matrix::diagonal(&diag)
        }
    };
    let lambda = if lambda_scale == 0.0 {
        0.0
    } else {
        let cap = DiversityFamily::max_monotone_lambda(&gv, &base);
        if cap.is_finite() {
            lambda_scale * cap
        } else {
            0.0
        }
    };
    Ok((gv, DiversityFamily::new(base, lambda)?))
}
