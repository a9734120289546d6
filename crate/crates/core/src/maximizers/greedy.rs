use std::time::Instant;

use super::{build_backend, BackendKind, GreedyConfig, Pick, SelectionBackend};
use crate::error::{Error, Result};
use crate::instance::{GroundVectors, Instance, MarginalOracle, SelectionRun};
use crate::linalg::{quadratic_form, Matrix};

/// Tracks `h(S_t)` and the run record while a driver adds elements.
pub(crate) struct ChainBuilder<'a> {
    oracle: &'a dyn MarginalOracle,
    h: Matrix,
    run: SelectionRun,
}

impl<'a> ChainBuilder<'a> {
    pub(crate) fn new(oracle: &'a dyn MarginalOracle, gv: &GroundVectors) -> Self {
        Self {
            oracle,
            h: oracle.evaluate(gv, &[]),
            run: SelectionRun::empty(),
        }
    }

    pub(crate) fn h(&self) -> &Matrix {
        &self.h
    }

    pub(crate) fn chain(&self) -> &[usize] {
        &self.run.chain
    }

    pub(crate) fn run_mut(&mut self) -> &mut SelectionRun {
        &mut self.run
    }

    /// Appends `j` with its exact gain under `gv` and advances `h`.
    pub(crate) fn push(&mut self, gv: &GroundVectors, pick: Pick, started: Instant) {
        let j = pick.index;
        let gain = quadratic_form(&self.h, gv.row(j));
        self.oracle.extend(gv, &mut self.h, &self.run.chain, j);
        self.run.chain.push(j);
        self.run.gains.push(gain);
        self.run.value += gain;
        self.run.scales.push(pick.scale);
        self.run.timings.push(started.elapsed());
        if pick.fallback {
            self.run.stats.fallbacks += 1;
        }
    }

    pub(crate) fn finish(self) -> SelectionRun {
        self.run
    }
}

/// One query, one delete.
pub(crate) fn step(
    backend: &mut dyn SelectionBackend,
    builder: &mut ChainBuilder<'_>,
    scan: &GroundVectors,
    record: &GroundVectors,
) -> Result<()> {
    let started = Instant::now();
    let pick = backend.select(scan, builder.h())?;
    backend.delete(pick.index)?;
    let stats = &mut builder.run_mut().stats;
    stats.queries += 1;
    stats.deletes += 1;
    builder.push(record, pick, started);
    Ok(())
}

pub(crate) fn check_k(inst: &Instance, k: usize) -> Result<()> {
    if k > inst.n() {
        return Err(Error::CardinalityTooLarge { k, n: inst.n() });
    }
    Ok(())
}

/// Cardinality-constrained greedy with whatever backend `cfg` names; the
/// backend's failure budget is `δ/k`.
pub fn greedy(inst: &Instance, cfg: &GreedyConfig) -> Result<SelectionRun> {
    check_k(inst, cfg.k)?;
    if cfg.k == 0 {
        return Ok(SelectionRun::empty());
    }
    let mut backend = build_backend(&inst.vectors, cfg, cfg.delta / cfg.k as f64)?;
    let mut builder = ChainBuilder::new(inst.oracle.as_ref(), &inst.vectors);
    for _ in 0..cfg.k {
        step(backend.as_mut(), &mut builder, &inst.vectors, &inst.vectors)?;
    }
    Ok(builder.finish())
}

/// Exact greedy with a quadratic form per live vector per step.
pub fn greedy_naive(inst: &Instance, k: usize) -> Result<SelectionRun> {
    greedy(inst, &GreedyConfig::new(k, BackendKind::Exact))
}

/// Exact greedy computing gains a block of `d` vectors at a time; same chain as [`greedy_naive`].
pub fn greedy_batch(inst: &Instance, k: usize) -> Result<SelectionRun> {
    greedy(inst, &GreedyConfig::new(k, BackendKind::Batch))
}

/// Greedy over the sketch-backed quadratic form search.
pub fn greedy_fast(inst: &Instance, cfg: &GreedyConfig) -> Result<SelectionRun> {
    if !matches!(cfg.backend, BackendKind::Sketch(_)) {
        return Err(Error::Unsupported("greedy_fast needs a sketch backend"));
    }
    greedy(inst, cfg)
}

/// Greedy over the LSH backend; steps where the search FAILs are picked by an exact scan.
pub fn greedy_lsh(inst: &Instance, cfg: &GreedyConfig) -> Result<SelectionRun> {
    if !matches!(cfg.backend, BackendKind::Lsh { .. }) {
        return Err(Error::Unsupported("greedy_lsh needs an LSH backend"));
    }
    greedy(inst, cfg)
}
