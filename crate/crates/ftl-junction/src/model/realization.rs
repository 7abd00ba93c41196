use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::stats;

/// Sampled types on the index window `[lo, hi]`, extended to the right until
/// every route has reappeared so that the same-route leader of each window
/// index is known.
///
/// The type of index `i` depends only on `(seed, i)`: overlapping windows
/// sampled from the same seed agree, and shifting the window shifts the
/// environment.
#[derive(Debug, Clone)]
pub struct Realization {
    seed: u64,
    lo: i64,
    hi: i64,
    types: Vec<usize>,
    routes: Vec<usize>,
    next_same: Vec<i64>,
}

/// Index-addressable stream of uniform draws: index `i` reads the two
/// ChaCha words at position `2 * (i - i64::MIN)`.
struct TypeStream {
    rng: ChaCha8Rng,
    cumulative: Vec<f64>,
}

impl TypeStream {
    fn new(spec: &ModelSpec, seed: u64, start: i64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offset = (start as i128 - i64::MIN as i128) as u128;
        rng.set_word_pos(2 * offset);
        let mut acc = 0.0;
        let cumulative = spec
            .types
            .iter()
            .map(|t| {
                acc += t.weight;
                acc
            })
            .collect();
        Self { rng, cumulative }
    }

    fn next_type(&mut self) -> usize {
        let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let total = self.cumulative[self.cumulative.len() - 1];
        let j = self.cumulative.partition_point(|&c| c <= u * total);
        j.min(self.cumulative.len() - 1)
    }
}

impl Realization {
    pub fn sample(spec: &ModelSpec, seed: u64, lo: i64, hi: i64) -> Result<Self> {
        let len = (hi - lo + 1).max(3) as f64;
        let cap = (64.0 / spec.min_route_weight() * len.ln()).ceil() as usize;
        Self::sample_capped(spec, seed, lo, hi, cap)
    }

    fn sample_capped(spec: &ModelSpec, seed: u64, lo: i64, hi: i64, cap: usize) -> Result<Self> {
        if hi < lo {
            return Err(Error::Precondition(format!("empty window [{lo}, {hi}]")));
        }
        let mut stream = TypeStream::new(spec, seed, lo);
        let mut types: Vec<usize> = (lo..=hi).map(|_| stream.next_type()).collect();
        let mut seen = vec![false; spec.roads + 1];
        let mut missing = spec.roads;
        let mut extra = 0;
        while missing > 0 {
            if extra == cap {
                return Err(Error::ExtensionCap { cap });
            }
            let z = stream.next_type();
            let k = spec.route(z);
            if !seen[k] {
                seen[k] = true;
                missing -= 1;
            }
            types.push(z);
            extra += 1;
        }
        let routes: Vec<usize> = types.iter().map(|&z| spec.route(z)).collect();
        let mut next_same = vec![i64::MAX; routes.len()];
        let mut last = vec![i64::MAX; spec.roads + 1];
        for j in (0..routes.len()).rev() {
            next_same[j] = last[routes[j]];
            last[routes[j]] = lo + j as i64;
        }
        next_same.truncate((hi - lo + 1) as usize);
        Ok(Self {
            seed,
            lo,
            hi,
            types,
            routes,
            next_same,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    /// Last index with a known type.
    pub fn ext_hi(&self) -> i64 {
        self.lo + self.types.len() as i64 - 1
    }

    fn slot(&self, i: i64) -> usize {
        assert!(i >= self.lo && i <= self.ext_hi(), "index {i} outside realization");
        (i - self.lo) as usize
    }

    pub fn type_of(&self, i: i64) -> usize {
        self.types[self.slot(i)]
    }

    pub fn route_of(&self, i: i64) -> usize {
        self.routes[self.slot(i)]
    }

    /// First `j > i` on the same route, for `i` in `[lo, hi]`.
    pub fn next_same(&self, i: i64) -> i64 {
        assert!(i >= self.lo && i <= self.hi, "index {i} outside window");
        self.next_same[(i - self.lo) as usize]
    }

    /// Last `j < i` on the same route within the realization.
    pub fn prev_same(&self, i: i64) -> Option<i64> {
        let k = self.route_of(i);
        (self.lo..i).rev().find(|&j| self.route_of(j) == k)
    }

    /// Copy with every index `i >= m` replaced by the slowest type of its
    /// route; routes and links are unchanged.
    pub fn with_slow_tail(&self, spec: &ModelSpec, m: i64) -> Self {
        let mut out = self.clone();
        let start = (m.max(self.lo) - self.lo) as usize;
        for j in start..out.types.len() {
            out.types[j] = spec.slowest_type(out.routes[j]);
        }
        out
    }

    /// Empirical frequency of road `k` on `[lo, hi]`.
    pub fn route_frequency(&self, k: usize) -> f64 {
        let n = (self.hi - self.lo + 1) as usize;
        self.routes[..n].iter().filter(|&&r| r == k).count() as f64 / n as f64
    }
}

/// `J_n(t)`: after `n` steps of the recursion
/// `J <- min_k (second-to-last index <= J on road k)`.
pub fn propagation_index(real: &Realization, t: i64, n: usize) -> Result<i64> {
    let roads = real.routes.iter().copied().max().unwrap_or(1);
    let mut j = t;
    for _ in 0..n {
        j = propagation_step(real, j, roads)?;
    }
    Ok(j)
}

fn propagation_step(real: &Realization, j: i64, roads: usize) -> Result<i64> {
    let mut count = vec![0u8; roads + 1];
    let mut pending = roads;
    let mut result = i64::MAX;
    let mut i = j;
    while pending > 0 {
        if i < real.lo {
            return Err(Error::WindowUnderflow {
                index: i,
                lo: real.lo,
                hi: real.ext_hi(),
            });
        }
        let k = real.route_of(i);
        if count[k] < 2 {
            count[k] += 1;
            if count[k] == 2 {
                pending -= 1;
                result = result.min(i);
            }
        }
        i -= 1;
    }
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub ci_half_width: f64,
    pub steps: usize,
    pub per_replicate: Vec<f64>,
}

/// Mean per-step drop of the propagation index over `n` steps and one
/// replicate per seed, with a normal 95% interval.
pub fn estimate_alpha(spec: &ModelSpec, seeds: &[u64], n: usize) -> Result<AlphaEstimate> {
    if n < 100 {
        return Err(Error::Precondition("need at least 100 propagation steps".into()));
    }
    let span = (8.0 * spec.roads as f64 / spec.min_route_weight() * n as f64).ceil() as i64 + 64;
    let per_replicate = seeds
        .par_iter()
        .map(|&seed| {
            let real = Realization::sample(spec, seed, -span, 0)?;
            let jn = propagation_index(&real, 0, n)?;
            Ok(-jn as f64 / n as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (alpha, sd) = stats::mean_sd(&per_replicate);
    Ok(AlphaEstimate {
        alpha,
        ci_half_width: stats::Z95 * sd / (per_replicate.len() as f64).sqrt(),
        steps: n,
        per_replicate,
    })
}
