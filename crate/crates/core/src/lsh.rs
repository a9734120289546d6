//! Maximum inner product search with signed random hyperplanes.
//!
//! Points and queries are unit vectors, so a large inner product is a small
//! angle, and one hyperplane bit collides with probability `1 − θ/π`.
//! `K` bits are concatenated per table and `T` tables are probed.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::instance::{within_bound, GroundVectors};
use crate::ipe::{lift_p, lift_q};
use crate::linalg::{dot, norm, Matrix};
use crate::qfs::{check_frobenius, flatten, vectorize, CandidateSet};
use crate::sketch::check_unit_interval;

const UNIT_TOLERANCE: f64 = 1e-9;

/// Single-bit collision probability for two unit vectors with inner product `ip`.
pub fn collision_probability(ip: f64) -> f64 {
    1.0 - ip.clamp(-1.0, 1.0).acos() / PI
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LshParams {
    pub tables: usize,
    pub bits: usize,
    pub c: f64,
    pub tau: f64,
    pub delta: f64,
    /// Distinct candidates scored per query.
    pub candidate_cap: usize,
}

impl LshParams {
    /// `K = ⌈log₂ n⌉`, `T = max(8, ⌈4 ln(1/δ) / p₁^K⌉)` with `p₁` the collision
    /// probability at inner product `τ`, and a scan cap of `10·T`.
    pub fn for_recall(n: usize, c: f64, tau: f64, delta: f64) -> Result<Self> {
        check_unit_interval("c", c)?;
        check_unit_interval("tau", tau)?;
        check_unit_interval("delta", delta)?;
        let bits = ((n.max(2) as f64).log2().ceil() as usize).clamp(1, 64);
        let p1 = collision_probability(tau);
        let tables = ((4.0 * (1.0 / delta).ln() / p1.powi(bits as i32)).ceil() as usize).max(8);
        Ok(Self {
            tables,
            bits,
            c,
            tau,
            delta,
            candidate_cap: 10 * tables,
        })
    }
}

/// Result of one probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    /// Best scored candidate and its exact inner product.
    pub best: Option<(usize, f64)>,
    pub scanned: usize,
}

#[derive(Debug, Clone)]
pub struct HashEnsemble {
    params: LshParams,
    dim: usize,
    /// `[t][k][0..dim]`, flattened.
    planes: Vec<f64>,
    tables: Vec<HashMap<u64, Vec<usize>>>,
    /// `[i][t]`, flattened.
    codes: Vec<u64>,
    points: Matrix,
    present: Vec<bool>,
}

fn check_unit(v: &[f64], index: Option<usize>) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotUnit { index, norm: n });
    }
    Ok(())
}

impl HashEnsemble {
    pub fn new(points: &Matrix, params: LshParams, seed: u64) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::InvalidInstance("need n >= 1 and d >= 1".into()));
        }
        for i in 0..points.rows() {
            check_unit(points.row(i), Some(i))?;
        }
        if params.bits == 0 || params.bits > 64 || params.tables == 0 {
            return Err(Error::InvalidParameter {
                name: "bits",
                value: params.bits as f64,
                range: "[1, 64] with tables >= 1",
            });
        }
        let dim = points.cols();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut planes = Vec::with_capacity(params.tables * params.bits * dim);
        for _ in 0..params.tables * params.bits {
            let g: Vec<f64> = loop {
                let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                if norm(&g) > 0.0 {
                    break g;
                }
            };
            let gn = norm(&g);
            planes.extend(g.iter().map(|v| v / gn));
        }
        let mut ens = Self {
            params,
            dim,
            planes,
            tables: vec![HashMap::new(); params.tables],
            codes: vec![0; points.rows() * params.tables],
            points: points.clone(),
            present: vec![true; points.rows()],
        };
        for i in 0..points.rows() {
            ens.insert(i);
        }
        Ok(ens)
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.present.iter().all(|p| !p)
    }

    pub fn is_present(&self, i: usize) -> bool {
        self.present.get(i).copied().unwrap_or(false)
    }

    pub fn code(&self, t: usize, x: &[f64]) -> u64 {
        let (k, dim) = (self.params.bits, self.dim);
        let mut code = 0u64;
        for b in 0..k {
            let start = (t * k + b) * dim;
            if dot(&self.planes[start..start + dim], x) >= 0.0 {
                code |= 1 << b;
            }
        }
        code
    }

    fn insert(&mut self, i: usize) {
        let t_count = self.params.tables;
        for t in 0..t_count {
            let code = self.code(t, self.points.row(i));
            self.codes[i * t_count + t] = code;
            self.tables[t].entry(code).or_default().push(i);
        }
    }

    fn remove(&mut self, i: usize) {
        let t_count = self.params.tables;
        for t in 0..t_count {
            let code = self.codes[i * t_count + t];
            if let Some(bucket) = self.tables[t].get_mut(&code) {
                bucket.retain(|&j| j != i);
                if bucket.is_empty() {
                    self.tables[t].remove(&code);
                }
            }
        }
    }

    /// Number of buckets, over all tables, that hold `i`.
    pub fn occurrences(&self, i: usize) -> usize {
        self.tables
            .iter()
            .map(|t| t.values().map(|b| b.iter().filter(|&&j| j == i).count()).sum::<usize>())
            .sum()
    }

    pub fn delete(&mut self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.len() });
        }
        if !self.present[i] {
            return Err(Error::NotLive(i));
        }
        self.remove(i);
        self.present[i] = false;
        Ok(())
    }

    /// Replaces point `i` (which must be present) by the unit vector `p`.
    pub fn update(&mut self, i: usize, p: &[f64]) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.len() });
        }
        if !self.present[i] {
            return Err(Error::NotLive(i));
        }
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        check_unit(p, Some(i))?;
        self.remove(i);
        self.points.row_mut(i).copy_from_slice(p);
        self.insert(i);
        Ok(())
    }

    /// Scores bucket candidates exactly until the cap is reached.
    pub fn probe(&self, q: &[f64]) -> Result<ProbeOutcome> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: q.len(),
            });
        }
        check_unit(q, None)?;
        let mut seen = BTreeSet::new();
        let mut best: Option<(usize, f64)> = None;
        'tables: for t in 0..self.params.tables {
            let Some(bucket) = self.tables[t].get(&self.code(t, q)) else {
                continue;
            };
            for &i in bucket {
                if seen.len() >= self.params.candidate_cap {
                    break 'tables;
                }
                if !seen.insert(i) {
                    continue;
                }
                let ip = dot(self.points.row(i), q);
                if best.is_none_or(|(bi, bv)| ip > bv || (ip == bv && i < bi)) {
                    best = Some((i, ip));
                }
            }
        }
        Ok(ProbeOutcome {
            best,
            scanned: seen.len(),
        })
    }

    /// Best candidate if its inner product reaches `c·τ`, otherwise `None` (FAIL).
    pub fn query(&self, q: &[f64]) -> Result<Option<usize>> {
        let threshold = self.params.c * self.params.tau;
        Ok(self
            .probe(q)?
            .best
            .filter(|&(_, ip)| ip >= threshold)
            .map(|(i, _)| i))
    }
}

/// Quadratic form search through Max-IP over `Q(vec(u uᵀ))` with queries `P(vec M)`.
/// Requires `‖u_i‖ ≤ 1` and `‖M‖_F ≤ 1`.
#[derive(Debug, Clone)]
pub struct LshQuadraticSearch {
    ens: HashEnsemble,
    d: usize,
    live: CandidateSet,
}

fn lifted_point(u: &[f64], index: Option<usize>) -> Result<Vec<f64>> {
    let un = norm(u);
    if !within_bound(un, 1.0) {
        return Err(Error::NormBound { index, norm: un, bound: 1.0 });
    }
    Ok(lift_q(&flatten(u)))
}

impl LshQuadraticSearch {
    pub fn new(gv: &GroundVectors, c: f64, tau: f64, delta: f64, seed: u64) -> Result<Self> {
        let params = LshParams::for_recall(gv.n(), c, tau, delta)?;
        Self::with_params(gv, params, seed)
    }

    pub fn with_params(gv: &GroundVectors, params: LshParams, seed: u64) -> Result<Self> {
        let d = gv.d();
        let mut pts = Matrix::zeros(gv.n(), d * d + 2);
        for i in 0..gv.n() {
            pts.row_mut(i).copy_from_slice(&lifted_point(gv.row(i), Some(i))?);
        }
        Ok(Self {
            ens: HashEnsemble::new(&pts, params, seed)?,
            d,
            live: CandidateSet::full(gv.n()),
        })
    }

    pub fn ensemble(&self) -> &HashEnsemble {
        &self.ens
    }

    pub fn live(&self) -> &CandidateSet {
        &self.live
    }

    fn lift_query(&self, m: &Matrix) -> Result<Vec<f64>> {
        if m.rows() != self.d || m.cols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: m.rows(),
            });
        }
        check_frobenius(m)?;
        Ok(lift_p(&vectorize(m)))
    }

    pub fn probe(&self, m: &Matrix) -> Result<ProbeOutcome> {
        self.ens.probe(&self.lift_query(m)?)
    }

    pub fn query(&self, m: &Matrix) -> Result<Option<usize>> {
        self.ens.query(&self.lift_query(m)?)
    }

    pub fn delete(&mut self, i: usize) -> Result<()> {
        self.live.delete(i)?;
        self.ens.delete(i)
    }

    pub fn update(&mut self, i: usize, z: &[f64]) -> Result<()> {
        if z.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: z.len(),
            });
        }
        self.ens.update(i, &lifted_point(z, Some(i))?)
    }
}
