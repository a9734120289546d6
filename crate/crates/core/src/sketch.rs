//! Euclidean distance estimation robust to adaptively chosen queries.
//!
//! The ensemble holds `L` independent Gaussian projections of every point.
//! A query draws `r` of them with replacement from a per-query random stream
//! and reports, for each point, the median of the sketched distances.
//!
//! When the projection dimension `m` is at least the input dimension `d`,
//! a Gaussian map `Π ∈ ℝ^{m×d}` with `N(0, 1/m)` entries is represented by
//! the triangular factor `R` of its QR decomposition. `‖Πy‖ = ‖Ry‖` for every
//! `y`, and `R` has an exact closed-form law (Bartlett), so the sketch has the
//! same distribution as the dense one at `min(m, d)` numbers per point.

use std::borrow::Cow;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

/// Default ceiling on sketch storage.
pub const DEFAULT_MEMORY_LIMIT: u128 = 2 << 30;

/// Projection maps are cached only while they fit in this many bytes.
const MAP_CACHE_LIMIT: u128 = 256 << 20;

/// SplitMix64 finalizer over `seed ⊕ stream`; used to give every sketch and
/// every query its own independent generator.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const QUERY_STREAM: u64 = 0x5155_4552_595f_5354;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            range: "(0, 1)",
        })
    }
}

/// Ensemble size `L`, per-query sample `r` and projection dimension `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleParams {
    pub sketches: usize,
    pub sample: usize,
    pub proj_dim: usize,
}

impl EnsembleParams {
    /// `r = ⌈10 ln(2n/δ)⌉`, `L = max(32, 4r)`, `m = ⌈8 ε⁻² ln(8nL/δ)⌉`.
    pub fn for_accuracy(n: usize, eps: f64, delta: f64) -> Result<Self> {
        check_unit_interval("eps", eps)?;
        check_unit_interval("delta", delta)?;
        if n == 0 {
            return Err(Error::InvalidInstance("need at least one point".into()));
        }
        let n = n as f64;
        let sample = (10.0 * (2.0 * n / delta).ln()).ceil() as usize;
        let sketches = (4 * sample).max(32);
        let proj_dim = (8.0 / (eps * eps) * (8.0 * n * sketches as f64 / delta).ln()).ceil();
        Ok(Self {
            sketches,
            sample,
            proj_dim: proj_dim.min(usize::MAX as f64) as usize,
        })
    }

    pub fn custom(sketches: usize, sample: usize, proj_dim: usize) -> Result<Self> {
        for (name, v) in [("sketches", sketches), ("sample", sample), ("proj_dim", proj_dim)] {
            if v == 0 {
                return Err(Error::InvalidParameter {
                    name,
                    value: 0.0,
                    range: "[1, inf)",
                });
            }
        }
        Ok(Self {
            sketches,
            sample,
            proj_dim,
        })
    }

    /// Numbers stored per sketched point.
    pub fn sketch_dim(&self, dim: usize) -> usize {
        self.proj_dim.min(dim)
    }

    fn map_bytes(&self, dim: usize) -> u128 {
        let s = self.sketch_dim(dim) as u128;
        self.sketches as u128 * s * dim as u128 * 8
    }

    /// Bytes held by the sketched points plus the cached maps, if cached.
    pub fn storage_bytes(&self, n: usize, dim: usize) -> u128 {
        let points = self.sketches as u128 * n as u128 * self.sketch_dim(dim) as u128 * 8;
        let maps = self.map_bytes(dim);
        points + if maps <= MAP_CACHE_LIMIT { maps } else { 0 }
    }

    /// Multiply-adds needed to build the ensemble.
    pub fn init_flops(&self, n: usize, dim: usize) -> u128 {
        self.sketches as u128 * n as u128 * self.sketch_dim(dim) as u128 * dim as u128
    }

    /// Multiply-adds needed for one query.
    pub fn query_flops(&self, n: usize, dim: usize) -> u128 {
        let s = self.sketch_dim(dim) as u128;
        self.sample as u128 * (s * dim as u128 + n as u128 * s)
    }
}

/// Knobs shared by every sketch-backed structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchOptions {
    /// Overrides the accuracy-derived `(L, r, m)`.
    pub params: Option<EnsembleParams>,
    pub memory_limit: u128,
}

impl Default for SketchOptions {
    fn default() -> Self {
        Self {
            params: None,
            memory_limit: DEFAULT_MEMORY_LIMIT,
        }
    }
}

/// One random linear map, in whichever representation its shape allows.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionMap {
    /// Upper-triangular `dim × dim`, row-major with zeros below the diagonal.
    Triangular { dim: usize, data: Vec<f64> },
    /// `rows × dim` with i.i.d. `N(0, 1/rows)` entries.
    Dense { rows: usize, dim: usize, data: Vec<f64> },
}

impl ProjectionMap {
    pub fn sample<R: Rng + ?Sized>(proj_dim: usize, dim: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (proj_dim as f64).sqrt();
        if proj_dim >= dim {
            let mut data = vec![0.0; dim * dim];
            for i in 0..dim {
                let chi = ChiSquared::new((proj_dim - i) as f64).expect("positive degrees of freedom");
                data[i * dim + i] = chi.sample(rng).sqrt() * scale;
                for j in i + 1..dim {
                    let g: f64 = rng.sample(StandardNormal);
                    data[i * dim + j] = g * scale;
                }
            }
            ProjectionMap::Triangular { dim, data }
        } else {
            let data = (0..proj_dim * dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                .collect();
            ProjectionMap::Dense {
                rows: proj_dim,
                dim,
                data,
            }
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ProjectionMap::Triangular { dim, .. } => *dim,
            ProjectionMap::Dense { rows, .. } => *rows,
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ProjectionMap::Triangular { dim, data } => {
                for (i, o) in out.iter_mut().enumerate().take(*dim) {
                    let row = &data[i * dim..(i + 1) * dim];
                    let mut acc = 0.0;
                    for j in i..*dim {
                        acc += row[j] * x[j];
                    }
                    *o = acc;
                }
            }
            ProjectionMap::Dense { rows, dim, data } => {
                for (i, o) in out.iter_mut().enumerate().take(*rows) {
                    let row = &data[i * dim..(i + 1) * dim];
                    let mut acc = 0.0;
                    for (a, b) in row.iter().zip(x) {
                        acc += a * b;
                    }
                    *o = acc;
                }
            }
        }
    }

    /// Dense `rows × dim` matrix of the map (for tests and diagnostics).
    pub fn to_matrix(&self) -> Matrix {
        match self {
            ProjectionMap::Triangular { dim, data } => Matrix::from_vec(*dim, *dim, data.clone()),
            ProjectionMap::Dense { rows, dim, data } => Matrix::from_vec(*rows, *dim, data.clone()),
        }
        .expect("shape is consistent")
    }
}

#[derive(Debug)]
pub struct SketchEnsemble {
    n: usize,
    dim: usize,
    params: EnsembleParams,
    seed: u64,
    eps: Option<f64>,
    delta: Option<f64>,
    maps: Option<Vec<ProjectionMap>>,
    /// `[ℓ][i][0..s]`, flattened.
    sketched: Vec<f64>,
    queries: AtomicU64,
}

impl SketchEnsemble {
    /// Builds an ensemble meeting `(1 ± ε)` with probability `1 − δ`.
    pub fn new(points: &Matrix, eps: f64, delta: f64, seed: u64) -> Result<Self> {
        Self::with_options(points, eps, delta, seed, &SketchOptions::default())
    }

    pub fn with_options(
        points: &Matrix,
        eps: f64,
        delta: f64,
        seed: u64,
        opts: &SketchOptions,
    ) -> Result<Self> {
        check_unit_interval("eps", eps)?;
        check_unit_interval("delta", delta)?;
        let params = match opts.params {
            Some(p) => p,
            None => EnsembleParams::for_accuracy(points.rows(), eps, delta)?,
        };
        let mut ens = Self::with_params(points, params, seed, opts.memory_limit)?;
        ens.eps = Some(eps);
        ens.delta = Some(delta);
        Ok(ens)
    }

    pub fn with_params(points: &Matrix, params: EnsembleParams, seed: u64, memory_limit: u128) -> Result<Self> {
        let (n, dim) = (points.rows(), points.cols());
        if n == 0 || dim == 0 {
            return Err(Error::InvalidInstance("need n >= 1 and d >= 1".into()));
        }
        let required = params.storage_bytes(n, dim);
        if required > memory_limit {
            return Err(Error::Capacity {
                required,
                limit: memory_limit,
            });
        }
        let s = params.sketch_dim(dim);
        let maps = (params.map_bytes(dim) <= MAP_CACHE_LIMIT).then(|| {
            (0..params.sketches)
                .into_par_iter()
                .map(|l| Self::generate_map(seed, l, params.proj_dim, dim))
                .collect::<Vec<_>>()
        });
        let mut sketched = vec![0.0; params.sketches * n * s];
        sketched
            .par_chunks_mut(n * s)
            .enumerate()
            .for_each(|(l, block)| {
                let map = match &maps {
                    Some(maps) => Cow::Borrowed(&maps[l]),
                    None => Cow::Owned(Self::generate_map(seed, l, params.proj_dim, dim)),
                };
                for (i, out) in block.chunks_mut(s).enumerate() {
                    map.apply(points.row(i), out);
                }
            });
        Ok(Self {
            n,
            dim,
            params,
            seed,
            eps: None,
            delta: None,
            maps,
            sketched,
            queries: AtomicU64::new(0),
        })
    }

    fn generate_map(seed: u64, l: usize, proj_dim: usize, dim: usize) -> ProjectionMap {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, l as u64));
        ProjectionMap::sample(proj_dim, dim, &mut rng)
    }

    pub fn map(&self, l: usize) -> Cow<'_, ProjectionMap> {
        match &self.maps {
            Some(maps) => Cow::Borrowed(&maps[l]),
            None => Cow::Owned(Self::generate_map(self.seed, l, self.params.proj_dim, self.dim)),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> EnsembleParams {
        self.params
    }

    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn sketch_dim(&self) -> usize {
        self.params.sketch_dim(self.dim)
    }

    /// Number of queries answered so far; the next query uses this as its stream id.
    pub fn queries_served(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Stored sketch of point `i` under map `l`.
    pub fn sketched(&self, l: usize, i: usize) -> &[f64] {
        let s = self.sketch_dim();
        let start = (l * self.n + i) * s;
        &self.sketched[start..start + s]
    }

    /// Replaces point `i` by `z` in every sketch.
    pub fn update(&mut self, i: usize, z: &[f64]) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, len: self.n });
        }
        self.check_dim(z)?;
        let (n, s) = (self.n, self.sketch_dim());
        let maps = &self.maps;
        let (seed, proj_dim, dim) = (self.seed, self.params.proj_dim, self.dim);
        self.sketched
            .par_chunks_mut(n * s)
            .enumerate()
            .for_each(|(l, block)| {
                let out = &mut block[i * s..(i + 1) * s];
                match maps {
                    Some(maps) => maps[l].apply(z, out),
                    None => Self::generate_map(seed, l, proj_dim, dim).apply(z, out),
                }
            });
        Ok(())
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Distance estimates to every point, drawing the sketch sample from the next query stream.
    pub fn query(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(q)?;
        let stream = self.queries.fetch_add(1, Ordering::Relaxed);
        self.query_stream(q, stream)
    }

    /// Same as [`query`](Self::query) with an explicit stream id; does not advance the counter.
    pub fn query_stream(&self, q: &[f64], stream: u64) -> Result<Vec<f64>> {
        self.check_dim(q)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(self.seed, QUERY_STREAM), stream));
        let picks: Vec<usize> = (0..self.params.sample)
            .map(|_| rng.random_range(0..self.params.sketches))
            .collect();
        Ok(self.query_sketches(q, &picks))
    }

    /// Median over the listed sketches (repeats allowed) of `‖Π_ℓ x_i − Π_ℓ q‖`.
    pub fn query_sketches(&self, q: &[f64], picks: &[usize]) -> Vec<f64> {
        let s = self.sketch_dim();
        let per_pick: Vec<Vec<f64>> = picks
            .par_iter()
            .map(|&l| {
                let mut pq = vec![0.0; s];
                self.map(l).apply(q, &mut pq);
                (0..self.n)
                    .map(|i| squared_distance(self.sketched(l, i), &pq).sqrt())
                    .collect()
            })
            .collect();
        let mut column = vec![0.0; picks.len()];
        (0..self.n)
            .map(|i| {
                for (dst, row) in column.iter_mut().zip(&per_pick) {
                    *dst = row[i];
                }
                median(&mut column)
            })
            .collect()
    }

    /// Largest deviation between the stored sketches and a fresh re-projection of `points`.
    pub fn resketch_error(&self, points: &Matrix) -> f64 {
        let s = self.sketch_dim();
        let mut worst: f64 = 0.0;
        let mut out = vec![0.0; s];
        for l in 0..self.params.sketches {
            let map = self.map(l);
            for i in 0..self.n {
                map.apply(points.row(i), &mut out);
                for (a, b) in out.iter().zip(self.sketched(l, i)) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }
}

/// Median; mean of the two middle values for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}
