//! Greedy drivers and the selection backends they run on.
//!
//! Every driver keeps `A_t = h(S_t)` up to date, asks a backend for a
//! (near-)argmax of `u_jᵀ A_t u_j` over the live candidates, records the
//! exact gain of the returned index and deletes it from the backend.

mod constrained;
mod greedy;
mod online;

pub use constrained::{greedy_matroid, knapsack_two_pass, KnapsackPass, KnapsackRun};
pub use greedy::{greedy, greedy_batch, greedy_fast, greedy_lsh, greedy_naive};
pub use online::{
    semi_online_run, Adversary, AdversaryView, GreedySpoiler, NullAdversary, OnlineRun, RandomPerturb,
};

use crate::error::{Error, Result};
use crate::instance::GroundVectors;
use crate::linalg::{gemm_blocked, quadratic_form, Matrix, DEFAULT_TILE};
use crate::lsh::{LshParams, LshQuadraticSearch};
use crate::qfs::{argmax_live, CandidateSet, QfsVariant, QuadraticFormSearch};
use crate::sketch::SketchOptions;

/// `1 − 1/e`.
pub const GREEDY_RATIO: f64 = 1.0 - 1.0 / std::f64::consts::E;
pub const MATROID_RATIO: f64 = 0.5;
/// `½ − 1/(2e)`.
pub const KNAPSACK_RATIO: f64 = 0.5 - 0.5 / std::f64::consts::E;

/// `(1 − 1/e)·opt − k(2 − 1/e)·ε` for a greedy run whose gain oracle is off by at most `ε`.
pub fn perturbed_greedy_bound(opt: f64, k: usize, eps: f64) -> f64 {
    GREEDY_RATIO * opt - k as f64 * (2.0 - 1.0 / std::f64::consts::E) * eps
}

/// Sign pattern of the mock oracle's `±ε` errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbPattern {
    /// `−ε` on every exact maximizer, `+ε` elsewhere.
    DemoteBest,
    /// `+ε` on even indices, `−ε` on odd ones.
    ByParity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackendKind {
    Exact,
    Batch,
    Sketch(QfsVariant),
    Lsh { c: f64, tau: f64 },
    /// Exact gains shifted by `±ε` (the config's `eps`), for worst-case testing.
    Perturbed(PerturbPattern),
}

impl BackendKind {
    pub fn name(&self) -> &'static str {
        match self {
            BackendKind::Exact => "exact",
            BackendKind::Batch => "batch",
            BackendKind::Sketch(QfsVariant::Flat) => "sketch-flat",
            BackendKind::Sketch(QfsVariant::Columns) => "sketch-columns",
            BackendKind::Lsh { .. } => "lsh",
            BackendKind::Perturbed(_) => "perturbed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyConfig {
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    pub backend: BackendKind,
    /// Fixed normalizer `H` for query matrices; `None` divides each `A_t` by `‖A_t‖_F`.
    pub h_bound: Option<f64>,
    pub seed: u64,
    pub sketch: SketchOptions,
}

impl GreedyConfig {
    pub fn new(k: usize, backend: BackendKind) -> Self {
        Self {
            k,
            eps: 0.1,
            delta: 0.1,
            backend,
            h_bound: None,
            seed: 0,
            sketch: SketchOptions::default(),
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_h_bound(mut self, h: f64) -> Self {
        self.h_bound = Some(h);
        self
    }
}

/// What a backend returned for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub index: usize,
    /// The approximate search declined and an exact scan chose `index`.
    pub fallback: bool,
    /// Gain units per unit of the backend's additive error.
    pub scale: f64,
}

pub trait SelectionBackend: Send {
    fn live(&self) -> &CandidateSet;

    /// Near-argmax over live `j` of `u_jᵀ a u_j`, where `u_j` are `gv`'s rows.
    fn select(&mut self, gv: &GroundVectors, a: &Matrix) -> Result<Pick>;

    fn delete(&mut self, i: usize) -> Result<()>;

    /// Backend-side replacement of `u_i` by `z`.
    fn update(&mut self, i: usize, z: &[f64]) -> Result<()>;
}

fn query_scale(a: &Matrix, h_bound: Option<f64>) -> f64 {
    match h_bound {
        Some(h) => h,
        None => {
            let f = a.frobenius_norm();
            if f > 0.0 {
                f
            } else {
                1.0
            }
        }
    }
}

fn exact_pick(gv: &GroundVectors, a: &Matrix, live: &CandidateSet) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in live.iter() {
        let g = quadratic_form(a, gv.row(j));
        if best.is_none_or(|(_, b)| g > b) {
            best = Some((j, g));
        }
    }
    best.map(|(j, _)| j).ok_or(Error::EmptyCandidates)
}

/// Full scan with one quadratic form per live vector.
#[derive(Debug, Clone)]
pub struct ExactScan {
    live: CandidateSet,
}

impl ExactScan {
    pub fn new(n: usize) -> Self {
        Self {
            live: CandidateSet::full(n),
        }
    }
}

impl SelectionBackend for ExactScan {
    fn live(&self) -> &CandidateSet {
        &self.live
    }

    fn select(&mut self, gv: &GroundVectors, a: &Matrix) -> Result<Pick> {
        Ok(Pick {
            index: exact_pick(gv, a, &self.live)?,
            fallback: false,
            scale: 0.0,
        })
    }

    fn delete(&mut self, i: usize) -> Result<()> {
        self.live.delete(i)
    }

    fn update(&mut self, _: usize, _: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// Full scan in blocks of `d` live vectors: `diag(Uᵀ A U)` through one blocked product per block.
#[derive(Debug, Clone)]
pub struct BatchScan {
    live: CandidateSet,
    tile: usize,
}

impl BatchScan {
    pub fn new(n: usize) -> Self {
        Self {
            live: CandidateSet::full(n),
            tile: DEFAULT_TILE,
        }
    }

    /// `u_jᵀ a u_j` for every live `j`, in ascending index order.
    pub fn block_gains(&self, gv: &GroundVectors, a: &Matrix) -> Vec<(usize, f64)> {
        let d = gv.d();
        let live: Vec<usize> = self.live.iter().collect();
        let mut out = Vec::with_capacity(live.len());
        for block in live.chunks(d) {
            let mut u = Matrix::zeros(d, block.len());
            for (col, &j) in block.iter().enumerate() {
                for (r, v) in gv.row(j).iter().enumerate() {
                    u[(r, col)] = *v;
                }
            }
            let au = gemm_blocked(a, &u, self.tile);
            for (col, &j) in block.iter().enumerate() {
                let mut diag = 0.0;
                for r in 0..d {
                    diag += u[(r, col)] * au[(r, col)];
                }
                out.push((j, diag));
            }
        }
        out
    }
}

impl SelectionBackend for BatchScan {
    fn live(&self) -> &CandidateSet {
        &self.live
    }

    fn select(&mut self, gv: &GroundVectors, a: &Matrix) -> Result<Pick> {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in self.block_gains(gv, a) {
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((j, g));
            }
        }
        let (index, _) = best.ok_or(Error::EmptyCandidates)?;
        Ok(Pick {
            index,
            fallback: false,
            scale: 0.0,
        })
    }

    fn delete(&mut self, i: usize) -> Result<()> {
        self.live.delete(i)
    }

    fn update(&mut self, _: usize, _: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// Sketch-backed quadratic form search; queries `A_t / H`.
pub struct SketchSearch {
    qfs: QuadraticFormSearch,
    h_bound: Option<f64>,
}

impl SketchSearch {
    pub fn new(gv: &GroundVectors, cfg: &GreedyConfig, variant: QfsVariant, delta: f64) -> Result<Self> {
        Ok(Self {
            qfs: QuadraticFormSearch::with_options(gv, cfg.eps, delta, variant, cfg.seed, &cfg.sketch)?,
            h_bound: cfg.h_bound,
        })
    }

    pub fn search(&self) -> &QuadraticFormSearch {
        &self.qfs
    }
}

impl SelectionBackend for SketchSearch {
    fn live(&self) -> &CandidateSet {
        self.qfs.live()
    }

    fn select(&mut self, _: &GroundVectors, a: &Matrix) -> Result<Pick> {
        let scale = query_scale(a, self.h_bound);
        Ok(Pick {
            index: self.qfs.query(&a.scaled(1.0 / scale))?,
            fallback: false,
            scale,
        })
    }

    fn delete(&mut self, i: usize) -> Result<()> {
        self.qfs.delete(i)
    }

    fn update(&mut self, i: usize, z: &[f64]) -> Result<()> {
        self.qfs.update(i, z)
    }
}

/// LSH-backed search over `u_i / D`; FAILs fall back to an exact scan.
pub struct LshSearch {
    search: LshQuadraticSearch,
    h_bound: Option<f64>,
    norm_bound: f64,
}

impl LshSearch {
    pub fn new(gv: &GroundVectors, cfg: &GreedyConfig, c: f64, tau: f64, delta: f64) -> Result<Self> {
        let d_bound = gv.norm_bound();
        let scaled = gv.rescaled(&vec![1.0 / d_bound; gv.n()])?;
        let params = LshParams::for_recall(gv.n(), c, tau, delta)?;
        Ok(Self {
            search: LshQuadraticSearch::with_params(&scaled, params, cfg.seed)?,
            h_bound: cfg.h_bound,
            norm_bound: d_bound,
        })
    }

    pub fn search(&self) -> &LshQuadraticSearch {
        &self.search
    }
}

impl SelectionBackend for LshSearch {
    fn live(&self) -> &CandidateSet {
        self.search.live()
    }

    fn select(&mut self, gv: &GroundVectors, a: &Matrix) -> Result<Pick> {
        let scale = query_scale(a, self.h_bound);
        let gain_scale = scale * self.norm_bound * self.norm_bound;
        match self.search.query(&a.scaled(1.0 / scale))? {
            Some(index) => Ok(Pick {
                index,
                fallback: false,
                scale: gain_scale,
            }),
            None => Ok(Pick {
                index: exact_pick(gv, a, self.search.live())?,
                fallback: true,
                scale: gain_scale,
            }),
        }
    }

    fn delete(&mut self, i: usize) -> Result<()> {
        self.search.delete(i)
    }

    fn update(&mut self, i: usize, z: &[f64]) -> Result<()> {
        let scaled: Vec<f64> = z.iter().map(|v| v / self.norm_bound).collect();
        self.search.update(i, &scaled)
    }
}

/// Exact gains with deterministic `±ε` errors; `ε` is in gain units.
#[derive(Debug, Clone)]
pub struct PerturbedScan {
    live: CandidateSet,
    eps: f64,
    pattern: PerturbPattern,
}

impl PerturbedScan {
    pub fn new(n: usize, eps: f64, pattern: PerturbPattern) -> Self {
        Self {
            live: CandidateSet::full(n),
            eps,
            pattern,
        }
    }

    /// Oracle values `O(S, j)` for all indices; dead indices get `−∞`.
    pub fn oracle_values(&self, gv: &GroundVectors, a: &Matrix) -> Vec<f64> {
        let exact: Vec<f64> = (0..gv.n())
            .map(|j| {
                if self.live.contains(j) {
                    quadratic_form(a, gv.row(j))
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let best = exact.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        exact
            .iter()
            .enumerate()
            .map(|(j, &g)| {
                let up = match self.pattern {
                    PerturbPattern::DemoteBest => g != best,
                    PerturbPattern::ByParity => j % 2 == 0,
                };
                if up {
                    g + self.eps
                } else {
                    g - self.eps
                }
            })
            .collect()
    }
}

impl SelectionBackend for PerturbedScan {
    fn live(&self) -> &CandidateSet {
        &self.live
    }

    fn select(&mut self, gv: &GroundVectors, a: &Matrix) -> Result<Pick> {
        let values = self.oracle_values(gv, a);
        Ok(Pick {
            index: argmax_live(&values, &self.live)?,
            fallback: false,
            scale: 1.0,
        })
    }

    fn delete(&mut self, i: usize) -> Result<()> {
        self.live.delete(i)
    }

    fn update(&mut self, _: usize, _: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// Builds the configured backend over `gv` with per-structure failure probability `delta`.
pub fn build_backend(gv: &GroundVectors, cfg: &GreedyConfig, delta: f64) -> Result<Box<dyn SelectionBackend>> {
    let n = gv.n();
    Ok(match cfg.backend {
        BackendKind::Exact => Box::new(ExactScan::new(n)),
        BackendKind::Batch => Box::new(BatchScan::new(n)),
        BackendKind::Sketch(variant) => Box::new(SketchSearch::new(gv, cfg, variant, delta)?),
        BackendKind::Lsh { c, tau } => Box::new(LshSearch::new(gv, cfg, c, tau, delta)?),
        BackendKind::Perturbed(pattern) => Box::new(PerturbedScan::new(n, cfg.eps, pattern)),
    })
}
