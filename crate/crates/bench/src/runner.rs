use std::sync::Arc;

use anyhow::{bail, Result};
use clap::ValueEnum;
use quadsub::maximizers::{
    greedy, greedy_matroid, knapsack_two_pass, semi_online_run, BackendKind, GreedyConfig, RandomPerturb,
};
use quadsub::oracle::{brute_force_opt, MAX_BRUTE_FORCE_N};
use quadsub::qfs::QfsVariant;
use quadsub::sketch::EnsembleParams;
use quadsub::{Constraint, Instance, PartitionMatroid, SelectionRun};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Naive,
    Batch,
    FastFlat,
    FastColumns,
    Lsh,
    Matroid,
    Knapsack,
    Online,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Naive => "naive",
            Algo::Batch => "batch",
            Algo::FastFlat => "fast-flat",
            Algo::FastColumns => "fast-columns",
            Algo::Lsh => "lsh",
            Algo::Matroid => "matroid",
            Algo::Knapsack => "knapsack",
            Algo::Online => "online",
        }
    }
}

/// Selection backend used inside the matroid, knapsack and online drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Exact,
    Batch,
    FastFlat,
    FastColumns,
    Lsh,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
    pub tau: f64,
    pub backend: Option<Backend>,
    pub blocks: Option<usize>,
    pub budget: f64,
    pub sigma: f64,
    pub ensemble: Option<EnsembleParams>,
    pub memory_limit: Option<u128>,
}

fn backend_kind(b: Backend, s: &Settings) -> BackendKind {
    match b {
        Backend::Exact => BackendKind::Exact,
        Backend::Batch => BackendKind::Batch,
        Backend::FastFlat => BackendKind::Sketch(QfsVariant::Flat),
        Backend::FastColumns => BackendKind::Sketch(QfsVariant::Columns),
        Backend::Lsh => BackendKind::Lsh { c: s.c, tau: s.tau },
    }
}

fn config(s: &Settings, backend: BackendKind, seed: u64) -> GreedyConfig {
    let mut cfg = GreedyConfig::new(s.k, backend)
        .with_eps(s.eps)
        .with_delta(s.delta)
        .with_seed(seed);
    cfg.sketch.params = s.ensemble;
    if let Some(limit) = s.memory_limit {
        cfg.sketch.memory_limit = limit;
    }
    cfg
}

/// Weights in `[0.2, 1.5]`, fixed by `seed` so repeats share them.
pub fn knapsack_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b6e_6170);
    (0..n).map(|_| rng.random_range(0.2..=1.5)).collect()
}

fn matroid(n: usize, s: &Settings) -> Result<PartitionMatroid> {
    let blocks = s.blocks.unwrap_or(s.k).max(1);
    Ok(PartitionMatroid::round_robin(n, blocks, 1)?)
}

pub fn constraint(algo: Algo, n: usize, s: &Settings, seed: u64) -> Result<Option<Constraint>> {
    Ok(match algo {
        Algo::Online => None,
        Algo::Matroid => Some(Constraint::Matroid(Arc::new(matroid(n, s)?))),
        Algo::Knapsack => Some(Constraint::knapsack(knapsack_weights(n, seed), s.budget)?),
        _ => Some(Constraint::Cardinality(s.k)),
    })
}

/// Exhaustive optimum when the instance is small enough.
pub fn optimum(inst: &Instance, algo: Algo, s: &Settings, seed: u64) -> Result<Option<f64>> {
    if inst.n() > MAX_BRUTE_FORCE_N {
        return Ok(None);
    }
    match constraint(algo, inst.n(), s, seed)? {
        Some(c) => Ok(Some(brute_force_opt(&inst.vectors, inst.oracle.as_ref(), &c)?.best_value)),
        None => Ok(None),
    }
}

/// One run. `base_seed` fixes the constraint data, `seed` the randomness of the run.
pub fn run_once(inst: &Instance, algo: Algo, s: &Settings, base_seed: u64, seed: u64) -> Result<SelectionRun> {
    let fixed = |kind| config(s, kind, seed);
    let inner = |default| backend_kind(s.backend.unwrap_or(default), s);
    let run = match algo {
        Algo::Naive => greedy(inst, &fixed(BackendKind::Exact))?,
        Algo::Batch => greedy(inst, &fixed(BackendKind::Batch))?,
        Algo::FastFlat => greedy(inst, &fixed(BackendKind::Sketch(QfsVariant::Flat)))?,
        Algo::FastColumns => greedy(inst, &fixed(BackendKind::Sketch(QfsVariant::Columns)))?,
        Algo::Lsh => greedy(inst, &fixed(BackendKind::Lsh { c: s.c, tau: s.tau }))?,
        Algo::Matroid => greedy_matroid(inst, &matroid(inst.n(), s)?, &fixed(inner(Backend::Exact)))?,
        Algo::Knapsack => {
            let weights = knapsack_weights(inst.n(), base_seed);
            knapsack_two_pass(inst, &weights, s.budget, &fixed(inner(Backend::Exact)))?.best().clone()
        }
        Algo::Online => {
            let mut adversary = RandomPerturb::new(s.sigma, seed);
            semi_online_run(inst, &fixed(inner(Backend::FastFlat)), &mut adversary)?.run
        }
    };
    if !run.is_consistent() {
        bail!("{} produced an inconsistent run", algo.name());
    }
    Ok(run)
}
