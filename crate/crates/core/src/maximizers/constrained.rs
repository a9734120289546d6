use std::time::Instant;

use super::greedy::ChainBuilder;
use super::{build_backend, GreedyConfig};
use crate::error::{Error, Result};
use crate::instance::{Instance, Matroid, SelectionRun};

/// Greedy under a matroid: before every query, each live `j` with
/// `S ∪ {j} ∉ 𝓘` is deleted. Runs at most `rank` steps with failure budget `δ/rank`.
pub fn greedy_matroid(inst: &Instance, matroid: &dyn Matroid, cfg: &GreedyConfig) -> Result<SelectionRun> {
    if matroid.ground_size() != inst.n() {
        return Err(Error::DimensionMismatch {
            expected: inst.n(),
            got: matroid.ground_size(),
        });
    }
    let rank = matroid.rank();
    if rank == 0 {
        return Ok(SelectionRun::empty());
    }
    let gv = &inst.vectors;
    let mut backend = build_backend(gv, cfg, cfg.delta / rank as f64)?;
    let mut builder = ChainBuilder::new(inst.oracle.as_ref(), gv);
    let mut candidate = Vec::with_capacity(rank + 1);
    for _ in 0..rank {
        let started = Instant::now();
        let blocked: Vec<usize> = backend
            .live()
            .iter()
            .filter(|&j| {
                candidate.clear();
                candidate.extend_from_slice(builder.chain());
                candidate.push(j);
                !matroid.is_independent(&candidate)
            })
            .collect();
        for &j in &blocked {
            backend.delete(j)?;
        }
        builder.run_mut().stats.deletes += blocked.len();
        if backend.live().is_empty() {
            break;
        }
        let pick = backend.select(gv, builder.h())?;
        backend.delete(pick.index)?;
        let stats = &mut builder.run_mut().stats;
        stats.queries += 1;
        stats.deletes += 1;
        builder.push(gv, pick, started);
    }
    Ok(builder.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnapsackPass {
    /// Greedy on `Δ(j | S)`.
    Uniform,
    /// Greedy on `Δ(j | S) / w(j)`, realized by running on `u_j / √w(j)`.
    Ratio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackRun {
    pub uniform: SelectionRun,
    pub ratio: SelectionRun,
}

impl KnapsackRun {
    pub fn winner(&self) -> KnapsackPass {
        if self.ratio.value > self.uniform.value {
            KnapsackPass::Ratio
        } else {
            KnapsackPass::Uniform
        }
    }

    pub fn best(&self) -> &SelectionRun {
        match self.winner() {
            KnapsackPass::Uniform => &self.uniform,
            KnapsackPass::Ratio => &self.ratio,
        }
    }
}

/// Two greedy passes under `Σ w(j) ≤ W`; each queries until its backend is empty,
/// keeping the items that still fit. The better pass by exact `f` wins.
/// Each backend gets failure budget `δ/n`.
pub fn knapsack_two_pass(inst: &Instance, weights: &[f64], budget: f64, cfg: &GreedyConfig) -> Result<KnapsackRun> {
    let n = inst.n();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
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
    let factors: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let ratio_vectors = inst.vectors.rescaled(&factors)?;
    let mut passes = Vec::with_capacity(2);
    for scan in [&inst.vectors, &ratio_vectors] {
        let mut backend = build_backend(scan, cfg, cfg.delta / n as f64)?;
        let mut builder = ChainBuilder::new(inst.oracle.as_ref(), &inst.vectors);
        let mut used = 0.0;
        while !backend.live().is_empty() {
            let started = Instant::now();
            let pick = backend.select(scan, builder.h())?;
            backend.delete(pick.index)?;
            let stats = &mut builder.run_mut().stats;
            stats.queries += 1;
            stats.deletes += 1;
            let w = weights[pick.index];
            if used + w <= budget {
                used += w;
                builder.push(&inst.vectors, pick, started);
            }
        }
        passes.push(builder.finish());
    }
    let ratio = passes.pop().expect("two passes");
    let uniform = passes.pop().expect("two passes");
    Ok(KnapsackRun { uniform, ratio })
}
