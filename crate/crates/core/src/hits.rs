//! Arrival stream of the loops that hit a finite target set.
//!
//! A loop of half-length n rooted at z stays within L1 distance n of z, so
//! only roots in R_n = {z : dist(z, A) ≤ n} matter. Arrivals with half-length
//! n occur at rate w_n |R_n| with w_n = L_{2n}β^{2n}/(2n), and are produced by
//! thinning a simpler proposal:
//!
//! * rectangles propose z uniformly on the rectangle grown by n on each side
//!   and keep z when it lies in R_n;
//! * other sets propose z = a + δ with a uniform in A and δ uniform in the
//!   L1 ball of radius n, and keep z with probability 1/m(z), where
//!   m(z) = #{a ∈ A : |z − a| ≤ n}.
//!
//! Both give every z ∈ R_n rate exactly w_n, so kept arrivals form the soup
//! restricted to loops that can reach A, truncated at n ≤ n_trunc.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::greens::{certified_return_tail, return_term, KillingRate};
use crate::lattice::LatticePoint;
use crate::sampler::{BridgeScratch, LENGTH_CEILING};
use crate::target::TargetSet;

/// Sets up to this size use a linear scan for membership.
const LINEAR_SCAN_MAX: usize = 16;

#[derive(Clone, Debug)]
enum Geometry {
    /// `order[k]` is the target index of the k-th cell in row-major order.
    Rectangle { x0: i64, y0: i64, x1: i64, y1: i64, order: Vec<u32> },
    Scattered { index: HashMap<LatticePoint, u32> },
}

/// Poisson stream of loops that can reach a target set.
#[derive(Clone, Debug)]
pub struct HitSampler {
    pub kappa: KillingRate,
    pub n_trunc: u64,
    /// Σ_{n>n_trunc} β^{2n} L_{2n}, bounding the measure of omitted loops through a vertex.
    pub visit_tail: f64,
    points: Vec<LatticePoint>,
    geometry: Geometry,
    /// Total proposal rate per unit time.
    rate: f64,
    mean_steps: f64,
    alias: WeightedAliasIndex<f64>,
}

/// Per-thread buffers.
#[derive(Clone, Debug, Default)]
pub struct HitScratch {
    bridge: BridgeScratch,
    stamp: Vec<u64>,
    hits: Vec<u32>,
    arrival: u64,
}

impl HitScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Smallest n with nκ ≥ 1/2 and 4e^{-nκ/4} ≤ tol.
pub fn visit_truncation(kappa: KillingRate, tol: f64) -> Result<u64> {
    if !(tol > 0.0) {
        return Err(invalid("tail_tol", format!("must be > 0, got {tol}")));
    }
    let k = kappa.value();
    let n = ((4.0 / k) * (4.0 / tol).ln()).ceil().max((0.5 / k).ceil()).max(1.0);
    if n > LENGTH_CEILING as f64 {
        return Err(Error::TruncationCeiling { what: "loop length for hitting".into(), ceiling: LENGTH_CEILING });
    }
    let mut n = n as u64;
    while n > 1 && certified_return_tail(kappa, n - 1).is_some_and(|t| t <= tol) {
        n -= 1;
    }
    Ok(n)
}

impl HitSampler {
    /// Stream for `target`, truncated so that the omitted loop measure through
    /// any vertex is at most `tail_tol`.
    pub fn new(kappa: KillingRate, target: &TargetSet, tail_tol: f64) -> Result<Self> {
        let n_trunc = visit_truncation(kappa, tail_tol)?;
        Self::with_n_trunc(kappa, target, n_trunc)
    }

    pub fn with_n_trunc(kappa: KillingRate, target: &TargetSet, n_trunc: u64) -> Result<Self> {
        if !(1..=LENGTH_CEILING).contains(&n_trunc) {
            return Err(invalid("n_trunc", format!("must lie in 1..={LENGTH_CEILING}")));
        }
        let points = target.points().to_vec();
        let a = points.len() as f64;
        let (geometry, size): (Geometry, Box<dyn Fn(f64) -> f64>) = match target.as_rectangle() {
            Some((x0, y0, x1, y1)) if points.len() > 1 => {
                let (w, h) = ((x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64);
                let mut order = vec![0u32; points.len()];
                for (i, p) in points.iter().enumerate() {
                    order[((p.x2 - y0) * (x1 - x0 + 1) + (p.x1 - x0)) as usize] = i as u32;
                }
                (Geometry::Rectangle { x0, y0, x1, y1, order }, Box::new(move |n| (w + 2.0 * n) * (h + 2.0 * n)))
            }
            _ => {
                let index = points.iter().enumerate().map(|(i, &p)| (p, i as u32)).collect();
                (Geometry::Scattered { index }, Box::new(move |n| a * (2.0 * n * n + 2.0 * n + 1.0)))
            }
        };
        let ln_q = kappa.ln_half_decay();
        let weights: Vec<f64> = (1..=n_trunc)
            .map(|n| return_term(ln_q, n) / (2 * n) as f64 * size(n as f64))
            .collect();
        let rate: f64 = weights.iter().sum();
        let mean_steps = weights.iter().zip(1..).map(|(w, n)| w * (2 * n) as f64).sum::<f64>() / rate;
        let alias = WeightedAliasIndex::new(weights).map_err(|e| invalid("proposal weights", e.to_string()))?;
        let visit_tail = certified_return_tail(kappa, n_trunc).unwrap_or(f64::INFINITY);
        Ok(Self { kappa, n_trunc, visit_tail, points, geometry, rate, mean_steps, alias })
    }

    pub fn target_points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn proposal_rate(&self) -> f64 {
        self.rate
    }

    /// Mean bridge length of a proposal.
    pub fn mean_proposal_steps(&self) -> f64 {
        self.mean_steps
    }

    /// Total-variation distance, up to time u, between the truncated and the
    /// full soup restricted to loops through the target: u·|A|·visit_tail.
    pub fn truncation_bias(&self, u: f64) -> f64 {
        u * self.points.len() as f64 * self.visit_tail
    }

    #[inline]
    fn index_of(&self, p: LatticePoint) -> Option<u32> {
        match &self.geometry {
            Geometry::Rectangle { x0, y0, x1, y1, order } => {
                if p.x1 >= *x0 && p.x1 <= *x1 && p.x2 >= *y0 && p.x2 <= *y1 {
                    Some(order[((p.x2 - y0) * (x1 - x0 + 1) + (p.x1 - x0)) as usize])
                } else {
                    None
                }
            }
            Geometry::Scattered { index } => {
                if self.points.len() <= LINEAR_SCAN_MAX {
                    self.points.iter().position(|&q| q == p).map(|i| i as u32)
                } else {
                    index.get(&p).copied()
                }
            }
        }
    }

    /// Draws one proposal; returns the kept root, or None when thinned.
    #[inline]
    fn propose<R: Rng + ?Sized>(&self, rng: &mut R, n: u64) -> Option<LatticePoint> {
        let ni = n as i64;
        match &self.geometry {
            Geometry::Rectangle { x0, y0, x1, y1, .. } => {
                let x = rng.random_range(x0 - ni..=x1 + ni);
                let y = rng.random_range(y0 - ni..=y1 + ni);
                let dx = (x0 - x).max(x - x1).max(0);
                let dy = (y0 - y).max(y - y1).max(0);
                (dx + dy <= ni).then_some(LatticePoint::new(x, y))
            }
            Geometry::Scattered { .. } => {
                let a = self.points[rng.random_range(0..self.points.len())];
                let (dx, dy) = loop {
                    let dx = rng.random_range(-ni..=ni);
                    let dy = rng.random_range(-ni..=ni);
                    if dx.abs() + dy.abs() <= ni {
                        break (dx, dy);
                    }
                };
                let z = LatticePoint::new(a.x1 + dx, a.x2 + dy);
                if self.points.len() == 1 {
                    return Some(z);
                }
                let m = self.points.iter().filter(|q| q.l1_distance(z) <= n).count();
                (rng.random_range(0..m) == 0).then_some(z)
            }
        }
    }

    /// Streams arrivals on (t0, t1] in increasing time. `visit(t, hits)` gets
    /// the distinct target indices hit by each loop that hits the target and
    /// returns false to stop. Returns true when stopped early.
    pub fn run<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        t0: f64,
        t1: f64,
        scratch: &mut HitScratch,
        mut visit: impl FnMut(f64, &[u32]) -> bool,
    ) -> bool {
        if scratch.stamp.len() != self.points.len() {
            scratch.stamp = vec![0; self.points.len()];
            scratch.arrival = 0;
        }
        let mut t = t0;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / self.rate;
            if t > t1 {
                return false;
            }
            let n = self.alias.sample(rng) as u64 + 1;
            let Some(root) = self.propose(rng, n) else { continue };
            scratch.bridge.fill(rng, n);
            scratch.arrival += 1;
            let stamp_id = scratch.arrival;
            scratch.hits.clear();
            let (stamp, hits) = (&mut scratch.stamp, &mut scratch.hits);
            scratch.bridge.walk(root, |p| {
                if let Some(i) = self.index_of(p) {
                    if stamp[i as usize] != stamp_id {
                        stamp[i as usize] = stamp_id;
                        hits.push(i);
                    }
                }
                true
            });
            if !scratch.hits.is_empty() && !visit(t, &scratch.hits) {
                return true;
            }
        }
    }

    /// Position of `p` in the target's point list.
    pub fn index(&self, p: LatticePoint) -> Option<usize> {
        self.index_of(p).map(|i| i as usize)
    }
}
