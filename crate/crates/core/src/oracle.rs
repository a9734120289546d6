//! Exhaustive ground truth for small instances.

use crate::error::{Error, Result};
use crate::instance::{evaluate_f, Constraint, GroundVectors, MarginalOracle};
use crate::linalg::{dot, quadratic_form, Matrix};

/// Exhaustive search is refused above this many elements.
pub const MAX_BRUTE_FORCE_N: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    /// Sorted ascending.
    pub best_set: Vec<usize>,
    pub best_value: f64,
    /// Feasible sets visited, including the empty set.
    pub enumerated: u64,
}

struct Search<'a> {
    gv: &'a GroundVectors,
    oracle: &'a dyn MarginalOracle,
    constraint: &'a Constraint,
    best: (Vec<usize>, f64),
    enumerated: u64,
}

impl Search<'_> {
    fn feasible_extension(&self, set: &[usize], weight: f64, i: usize) -> bool {
        match self.constraint {
            Constraint::Cardinality(k) => set.len() < *k,
            Constraint::Matroid(m) => {
                let mut s = set.to_vec();
                s.push(i);
                m.is_independent(&s)
            }
            Constraint::Knapsack { weights, budget } => weight + weights[i] <= *budget,
        }
    }

    // Preorder over sorted sets visits them in lexicographic order, so a
    // strict improvement test keeps the lexicographically smallest maximizer.
    fn visit(&mut self, set: &mut Vec<usize>, h: &Matrix, value: f64, weight: f64) {
        self.enumerated += 1;
        if value > self.best.1 {
            self.best = (set.clone(), value);
        }
        let start = set.last().map_or(0, |&l| l + 1);
        for i in start..self.gv.n() {
            if !self.feasible_extension(set, weight, i) {
                continue;
            }
            let gain = quadratic_form(h, self.gv.row(i));
            let mut next = h.clone();
            self.oracle.extend(self.gv, &mut next, set, i);
            let w = match self.constraint {
                Constraint::Knapsack { weights, .. } => weight + weights[i],
                _ => weight,
            };
            set.push(i);
            self.visit(set, &next, value + gain, w);
            set.pop();
        }
    }
}

/// Exact `max f(T)` over feasible `T`, ties broken toward the lexicographically smallest set.
pub fn brute_force_opt(
    gv: &GroundVectors,
    oracle: &dyn MarginalOracle,
    constraint: &Constraint,
) -> Result<OptResult> {
    if gv.n() > MAX_BRUTE_FORCE_N {
        return Err(Error::TooLarge {
            n: gv.n(),
            max: MAX_BRUTE_FORCE_N,
        });
    }
    if let Constraint::Knapsack { weights, .. } = constraint {
        if weights.len() != gv.n() {
            return Err(Error::DimensionMismatch {
                expected: gv.n(),
                got: weights.len(),
            });
        }
    }
    let mut search = Search {
        gv,
        oracle,
        constraint,
        best: (Vec::new(), 0.0),
        enumerated: 0,
    };
    let h = oracle.evaluate(gv, &[]);
    search.visit(&mut Vec::new(), &h, 0.0, 0.0);
    let (best_set, _) = search.best;
    let best_value = evaluate_f(gv, oracle, &best_set)?;
    Ok(OptResult {
        best_set,
        best_value,
        enumerated: search.enumerated,
    })
}

/// Exact argmax of `u_jᵀ M u_j` over `live`, smallest index on ties.
pub fn exact_qf_argmax(
    gv: &GroundVectors,
    m: &Matrix,
    live: impl IntoIterator<Item = usize>,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for j in live {
        gv.check_index(j)?;
        let v = quadratic_form(m, gv.row(j));
        match best {
            Some((bj, bv)) if v < bv || (v == bv && bj < j) => {}
            _ => best = Some((j, v)),
        }
    }
    best.ok_or(Error::EmptyCandidates)
}

pub fn exact_inner_products(points: &Matrix, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != points.cols() {
        return Err(Error::DimensionMismatch {
            expected: points.cols(),
            got: q.len(),
        });
    }
    Ok((0..points.rows()).map(|i| dot(points.row(i), q)).collect())
}
