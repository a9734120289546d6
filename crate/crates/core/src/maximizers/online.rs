use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::greedy::{check_k, step, ChainBuilder};
use super::{build_backend, exact_pick, GreedyConfig};
use crate::error::{Error, Result};
use crate::instance::{GroundVectors, Instance, SelectionRun};
use crate::linalg::{norm, Matrix};
use crate::qfs::CandidateSet;

/// State shown to the adversary before each step.
pub struct AdversaryView<'a> {
    pub step: usize,
    pub vectors: &'a GroundVectors,
    pub h: &'a Matrix,
    pub live: &'a CandidateSet,
    pub chain: &'a [usize],
}

/// Between greedy steps, may replace one not-yet-selected `u_i` by `z`.
pub trait Adversary {
    fn propose(&mut self, view: &AdversaryView<'_>) -> Option<(usize, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NullAdversary;

impl Adversary for NullAdversary {
    fn propose(&mut self, _: &AdversaryView<'_>) -> Option<(usize, Vec<f64>)> {
        None
    }
}

/// Adds `N(0, σ²)` noise to a uniformly chosen live vector, shrinking the
/// result back onto the norm bound when it overshoots.
#[derive(Debug, Clone)]
pub struct RandomPerturb {
    sigma: f64,
    rng: ChaCha8Rng,
}

impl RandomPerturb {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Adversary for RandomPerturb {
    fn propose(&mut self, view: &AdversaryView<'_>) -> Option<(usize, Vec<f64>)> {
        if view.live.is_empty() {
            return None;
        }
        let pick = self.rng.random_range(0..view.live.len());
        let i = view.live.iter().nth(pick)?;
        let mut z: Vec<f64> = view
            .vectors
            .row(i)
            .iter()
            .map(|v| v + self.sigma * self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (zn, bound) = (norm(&z), view.vectors.norm_bound());
        if zn > bound {
            z.iter_mut().for_each(|v| *v *= bound / zn);
        }
        Some((i, z))
    }
}

/// Halves the vector of the current exact best candidate.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedySpoiler;

impl Adversary for GreedySpoiler {
    fn propose(&mut self, view: &AdversaryView<'_>) -> Option<(usize, Vec<f64>)> {
        let best = exact_pick(view.vectors, view.h, view.live).ok()?;
        Some((best, view.vectors.row(best).iter().map(|v| 0.5 * v).collect()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineRun {
    pub run: SelectionRun,
    /// Ground vectors after every accepted mutation.
    pub vectors: GroundVectors,
}

/// Cardinality greedy where an adversary may rewrite an unselected vector
/// before each step; the backend absorbs it through `update`.
pub fn semi_online_run(inst: &Instance, cfg: &GreedyConfig, adversary: &mut dyn Adversary) -> Result<OnlineRun> {
    check_k(inst, cfg.k)?;
    let mut vectors = inst.vectors.clone();
    if cfg.k == 0 {
        return Ok(OnlineRun {
            run: SelectionRun::empty(),
            vectors,
        });
    }
    let mut backend = build_backend(&vectors, cfg, cfg.delta / cfg.k as f64)?;
    let mut builder = ChainBuilder::new(inst.oracle.as_ref(), &vectors);
    for t in 0..cfg.k {
        let proposal = adversary.propose(&AdversaryView {
            step: t,
            vectors: &vectors,
            h: builder.h(),
            live: backend.live(),
            chain: builder.chain(),
        });
        if let Some((i, z)) = proposal {
            if builder.chain().contains(&i) {
                return Err(Error::AlreadySelected(i));
            }
            vectors.set_row(i, &z)?;
            backend.update(i, &z)?;
            builder.run_mut().stats.updates += 1;
        }
        step(backend.as_mut(), &mut builder, &vectors, &vectors)?;
    }
    Ok(OnlineRun {
        run: builder.finish(),
        vectors,
    })
}
