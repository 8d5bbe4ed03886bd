//! Exact sampling of the timestamped loop soup restricted to a window of
//! roots and to half-lengths n ≤ n_trunc.
//!
//! Loops are sampled rooted: each root carries an independent Poisson process
//! of rate Σ_n L_{2n}β^{2n}/(2n), half-lengths follow the normalized weights,
//! and the path is a uniform bridge built from independent ±1 sequences in the
//! diagonal coordinates s = x1+x2, d = x2−x1.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::greens::{certified_rooted_tail, return_term, KillingRate};
use crate::lattice::{Direction, LatticePoint};
use crate::numerics::CompensatedSum;
use crate::rng::{coord_tag, domain, substream};

/// Largest half-length any length table may reach.
pub const LENGTH_CEILING: u64 = 50_000_000;

/// Rooted-loop half-length law truncated at n_trunc.
#[derive(Clone, Debug)]
pub struct LengthDistribution {
    pub kappa: KillingRate,
    pub n_trunc: u64,
    /// L_{2n}β^{2n}/(2n) for n = 1..=n_trunc.
    weights: Vec<f64>,
    /// Σ weights: the truncated rooted intensity per vertex.
    pub total_mass: f64,
    /// Certified bound on the omitted intensity.
    pub tail_bound: f64,
    alias: WeightedAliasIndex<f64>,
}

impl LengthDistribution {
    /// Smallest n_trunc with n_trunc·κ ≥ 1/2 and rooted tail ≤ `tail_tol`.
    pub fn new(kappa: KillingRate, tail_tol: f64) -> Result<Self> {
        if !(tail_tol > 0.0) {
            return Err(invalid("tail_tol", format!("must be > 0, got {tail_tol}")));
        }
        let mut n = (0.5 / kappa.value()).ceil().max(1.0) as u64;
        loop {
            let t = certified_rooted_tail(kappa, n).expect("n kappa >= 1/2");
            if t <= tail_tol {
                break;
            }
            n = n.max(1) + (n / 8).max(1);
            if n > LENGTH_CEILING {
                return Err(Error::TruncationCeiling { what: "loop length table".into(), ceiling: LENGTH_CEILING });
            }
        }
        // refine down to the smallest admissible value
        let floor = (0.5 / kappa.value()).ceil().max(1.0) as u64;
        let (mut lo, mut hi) = (floor, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if certified_rooted_tail(kappa, mid).is_some_and(|t| t <= tail_tol) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Self::with_n_trunc(kappa, lo)
    }

    pub fn with_n_trunc(kappa: KillingRate, n_trunc: u64) -> Result<Self> {
        if n_trunc < 1 {
            return Err(invalid("n_trunc", "must be >= 1"));
        }
        if n_trunc > LENGTH_CEILING {
            return Err(Error::TruncationCeiling { what: "loop length table".into(), ceiling: LENGTH_CEILING });
        }
        let ln_q = kappa.ln_half_decay();
        let weights: Vec<f64> = (1..=n_trunc).map(|n| return_term(ln_q, n) / (2 * n) as f64).collect();
        let total_mass = weights.iter().copied().collect::<CompensatedSum>().value();
        let tail_bound = certified_rooted_tail(kappa, n_trunc).unwrap_or(f64::INFINITY);
        let alias = WeightedAliasIndex::new(weights.clone()).map_err(|e| invalid("length weights", e.to_string()))?;
        Ok(Self { kappa, n_trunc, weights, total_mass, tail_bound, alias })
    }

    /// Unnormalized weight of half-length n.
    pub fn weight(&self, n: u64) -> f64 {
        if n == 0 || n > self.n_trunc {
            0.0
        } else {
            self.weights[(n - 1) as usize]
        }
    }

    pub fn pmf(&self, n: u64) -> f64 {
        self.weight(n) / self.total_mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.alias.sample(rng) as u64 + 1
    }
}

/// Builds the half-length law for a rooted-tail tolerance.
pub fn length_pmf(kappa: KillingRate, tail_tol: f64) -> Result<LengthDistribution> {
    LengthDistribution::new(kappa, tail_tol)
}

/// Closed nearest-neighbour walk of length 2n, steps packed two bits each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedLoop {
    pub root: LatticePoint,
    pub half_length: u64,
    packed: Vec<u8>,
}

impl RootedLoop {
    pub fn from_steps(root: LatticePoint, steps: &[Direction]) -> Result<Self> {
        if steps.is_empty() || !steps.len().is_multiple_of(2) {
            return Err(invalid("steps", "loop length must be even and >= 2"));
        }
        let mut p = LatticePoint::new(0, 0);
        for &s in steps {
            p = p.step(s);
        }
        if p != LatticePoint::new(0, 0) {
            return Err(invalid("steps", "steps do not return to the root"));
        }
        let mut packed = vec![0u8; steps.len().div_ceil(4)];
        for (i, &s) in steps.iter().enumerate() {
            packed[i / 4] |= (s as u8) << (2 * (i % 4));
        }
        Ok(Self { root, half_length: steps.len() as u64 / 2, packed })
    }

    pub fn len(&self) -> usize {
        2 * self.half_length as usize
    }

    pub fn is_empty(&self) -> bool {
        self.half_length == 0
    }

    pub fn packed_steps(&self) -> &[u8] {
        &self.packed
    }

    pub fn steps(&self) -> impl Iterator<Item = Direction> + '_ {
        (0..self.len()).map(move |i| Direction::from_code((self.packed[i / 4] >> (2 * (i % 4))) & 3))
    }

    /// Visited vertices in order, root first, 2n entries.
    pub fn path(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        let mut p = self.root;
        std::iter::once(self.root).chain(self.steps().take(self.len() - 1).map(move |s| {
            p = p.step(s);
            p
        }))
    }
}

/// Set of distinct vertices visited, root included.
pub fn loop_trace(l: &RootedLoop) -> BTreeSet<LatticePoint> {
    l.path().collect()
}

/// Reusable buffers for bridge sampling.
#[derive(Clone, Debug, Default)]
pub struct BridgeScratch {
    s: Vec<i8>,
    d: Vec<i8>,
}

impl BridgeScratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Draws the diagonal increments of a uniform closed walk of length 2n.
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, n: u64) {
        let n = n as usize;
        for v in [&mut self.s, &mut self.d] {
            v.clear();
            v.resize(n, 1);
            v.resize(2 * n, -1);
            v.shuffle(rng);
        }
    }

    pub fn directions(&self) -> impl Iterator<Item = Direction> + '_ {
        self.s.iter().zip(&self.d).map(|(&a, &b)| Direction::from_diagonal(a > 0, b > 0))
    }

    /// Calls `visit` with every vertex of the loop rooted at `root`, root first,
    /// until it returns false.
    #[inline]
    pub fn walk(&self, root: LatticePoint, mut visit: impl FnMut(LatticePoint) -> bool) {
        let (mut x, mut y) = (root.x1, root.x2);
        if !visit(root) {
            return;
        }
        let m = self.s.len();
        for i in 0..m.saturating_sub(1) {
            let (a, b) = (i64::from(self.s[i]), i64::from(self.d[i]));
            x += (a - b) / 2;
            y += (a + b) / 2;
            if !visit(LatticePoint::new(x, y)) {
                return;
            }
        }
    }
}

/// Uniform rooted loop of half-length n at `root`.
pub fn sample_rooted_loop<R: Rng + ?Sized>(rng: &mut R, root: LatticePoint, n: u64) -> Result<RootedLoop> {
    if n < 1 {
        return Err(invalid("half_length", "must be >= 1"));
    }
    let mut scratch = BridgeScratch::new();
    scratch.fill(rng, n);
    let steps: Vec<Direction> = scratch.directions().collect();
    RootedLoop::from_steps(root, &steps)
}

/// Inclusive axis-aligned box of roots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Window {
    pub fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Result<Self> {
        if x1 < x0 || y1 < y0 {
            return Err(invalid("window", format!("empty window ({x0},{y0},{x1},{y1})")));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn size(&self) -> u64 {
        ((self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)) as u64
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        (self.x0..=self.x1).contains(&p.x1) && (self.y0..=self.y1).contains(&p.x2)
    }

    /// Roots in row-major order.
    pub fn roots(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| LatticePoint::new(x, y)))
    }

    /// The window grown by `r` on every side.
    pub fn dilate(&self, r: u64) -> Self {
        let r = r as i64;
        Self { x0: self.x0 - r, y0: self.y0 - r, x1: self.x1 + r, y1: self.y1 + r }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoupLoop {
    pub rooted: RootedLoop,
    pub timestamp: f64,
}

/// Loops rooted in `window` with timestamps in [0, time_horizon].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoupSample {
    pub kappa: KillingRate,
    pub window: Window,
    pub time_horizon: f64,
    pub n_trunc: u64,
    pub rng_seed: u64,
    pub replica: u64,
    /// Number of sampled time slabs; the next extension uses this as its epoch.
    pub epochs: u64,
    /// Sorted by (root row-major, timestamp) within each epoch.
    pub loops: Vec<SoupLoop>,
}

fn sample_slab(
    dist: &LengthDistribution,
    window: Window,
    t0: f64,
    t1: f64,
    seed: u64,
    replica: u64,
    epoch: u64,
) -> Result<Vec<SoupLoop>> {
    let width = t1 - t0;
    let mean = width * dist.total_mass;
    let roots: Vec<LatticePoint> = window.roots().collect();
    let per_root: Vec<Vec<SoupLoop>> = roots
        .par_iter()
        .map(|&root| {
            let mut rng = substream(seed, &[domain::WINDOW_SOUP, replica, coord_tag(root.x1), coord_tag(root.x2), epoch]);
            let count = if mean > 0.0 { Poisson::new(mean).expect("positive finite mean").sample(&mut rng) as u64 } else { 0 };
            let mut scratch = BridgeScratch::new();
            let mut out: Vec<SoupLoop> = (0..count)
                .map(|_| {
                    let n = dist.sample(&mut rng);
                    let timestamp = t0 + width * rng.random::<f64>();
                    scratch.fill(&mut rng, n);
                    let steps: Vec<Direction> = scratch.directions().collect();
                    let rooted = RootedLoop::from_steps(root, &steps).expect("bridge closes");
                    SoupLoop { rooted, timestamp }
                })
                .collect();
            out.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            out
        })
        .collect();
    Ok(per_root.into_iter().flatten().collect())
}

/// Rooted soup on `window` over [0, time_horizon].
pub fn sample_window_soup(dist: &LengthDistribution, window: Window, time_horizon: f64, seed: u64, replica: u64) -> Result<SoupSample> {
    if !(time_horizon >= 0.0 && time_horizon.is_finite()) {
        return Err(invalid("time_horizon", format!("must be finite and >= 0, got {time_horizon}")));
    }
    let loops = if time_horizon > 0.0 { sample_slab(dist, window, 0.0, time_horizon, seed, replica, 0)? } else { Vec::new() };
    Ok(SoupSample {
        kappa: dist.kappa,
        window,
        time_horizon,
        n_trunc: dist.n_trunc,
        rng_seed: seed,
        replica,
        epochs: 1,
        loops,
    })
}

/// Adds an independent slab on (horizon, horizon + delta].
pub fn extend_soup(dist: &LengthDistribution, soup: &SoupSample, delta: f64) -> Result<SoupSample> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must be finite and >= 0, got {delta}")));
    }
    if dist.n_trunc != soup.n_trunc || dist.kappa != soup.kappa {
        return Err(invalid("length distribution", "does not match the soup being extended"));
    }
    let mut out = soup.clone();
    if delta == 0.0 {
        return Ok(out);
    }
    let t0 = soup.time_horizon;
    let mut fresh = sample_slab(dist, soup.window, t0, t0 + delta, soup.rng_seed, soup.replica, soup.epochs)?;
    for l in &mut fresh {
        // uniform on [t0, t1) may return t0 itself
        if l.timestamp <= t0 {
            l.timestamp = t0 + f64::EPSILON * t0.max(1.0);
        }
    }
    out.loops.extend(fresh);
    out.time_horizon = t0 + delta;
    out.epochs += 1;
    Ok(out)
}
