//! Cover times of finite sets and the Monte Carlo experiments built on them.
//!
//! Every replica streams the loops that reach the target in time order over
//! horizons H₀, 2H₀, 4H₀, ..., recording the first time each vertex lies on a
//! loop. T(A) is the largest of these first-hit times.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::greens::{mu_gamma_o, KillingRate};
use crate::hits::{HitSampler, HitScratch};
use crate::lattice::LatticePoint;
use crate::laws::{gumbel_cdf, kappa_inv_doubly_exponential, ExactLaws};
use crate::rng::{child_seed, domain, substream};
use crate::sampler::{extend_soup, sample_window_soup, LengthDistribution, Window};
use crate::stats::{kolmogorov_asymptotic_quantile, ks_distance, ks_null_quantile, ks_two_sample, proportion_standard_error, EmpiricalDistribution};
use crate::target::TargetSet;
use crate::verdict::{Direction, VerdictRecord};

pub const DEFAULT_TAIL_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_EPOCHS: u32 = 40;
/// Level of the simulated KS null quantile used as the noise allowance.
pub const NULL_LEVEL: f64 = 0.999;
pub const NULL_REPETITIONS: usize = 2000;
/// Fixed so that thresholds do not depend on the experiment seed.
pub const NULL_CALIBRATION_SEED: u64 = 0x6b73_6e75_6c6c;
/// Default ceiling on replicas × expected bridge steps for a Gumbel scan.
pub const DEFAULT_WORK_GUARD: f64 = 2e10;

const MU_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverSettings {
    /// Bound on the omitted loop measure through any single vertex.
    pub tail_tol: f64,
    /// Multiplies the default initial horizon.
    pub horizon_scale: f64,
    pub max_epochs: u32,
}

impl Default for CoverSettings {
    fn default() -> Self {
        Self { tail_tol: DEFAULT_TAIL_TOL, horizon_scale: 1.0, max_epochs: DEFAULT_MAX_EPOCHS }
    }
}

impl CoverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(invalid("tail_tol", format!("must lie in (0,1), got {}", self.tail_tol)));
        }
        if !(self.horizon_scale > 0.0 && self.horizon_scale.is_finite()) {
            return Err(invalid("horizon_scale", format!("must be finite and > 0, got {}", self.horizon_scale)));
        }
        if self.max_epochs == 0 || self.max_epochs > 1000 {
            return Err(invalid("max_epochs", format!("must lie in 1..=1000, got {}", self.max_epochs)));
        }
        Ok(())
    }
}

/// 2u* = 2 log|A|/μ for |A| ≥ 2, and 2/μ for a single vertex.
pub fn default_initial_horizon(mu: f64, set_size: usize) -> f64 {
    if set_size < 2 {
        2.0 / mu
    } else {
        2.0 * (set_size as f64).ln() / mu
    }
}

/// First-hit times up to a fixed horizon, for event estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct EventTrace {
    /// +∞ when the vertex is not hit by the horizon.
    pub first_hit: Vec<f64>,
    /// First time one loop hits both of the first two vertices; +∞ if none.
    pub first_shared: f64,
}

/// Cover-time sampler for one target.
#[derive(Clone, Debug)]
pub struct CoverEngine {
    pub kappa: KillingRate,
    pub mu: f64,
    pub target: TargetSet,
    pub settings: CoverSettings,
    sampler: HitSampler,
    initial_horizon: f64,
}

impl CoverEngine {
    pub fn new(kappa: KillingRate, target: &TargetSet, settings: CoverSettings) -> Result<Self> {
        let mu = mu_gamma_o(kappa, MU_REL_TOL)?.value;
        Self::with_mu(kappa, mu, target, settings)
    }

    /// As `new`, reusing a known μ(Γ_o).
    pub fn with_mu(kappa: KillingRate, mu: f64, target: &TargetSet, settings: CoverSettings) -> Result<Self> {
        settings.validate()?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid("mu", format!("must be finite and > 0, got {mu}")));
        }
        let sampler = HitSampler::new(kappa, target, settings.tail_tol)?;
        let initial_horizon = settings.horizon_scale * default_initial_horizon(mu, target.len());
        Ok(Self { kappa, mu, target: target.clone(), settings, sampler, initial_horizon })
    }

    pub fn sampler(&self) -> &HitSampler {
        &self.sampler
    }

    pub fn initial_horizon(&self) -> f64 {
        self.initial_horizon
    }

    pub fn horizon_ceiling(&self) -> f64 {
        self.initial_horizon * 2f64.powi(self.settings.max_epochs as i32 - 1)
    }

    /// Expected bridge steps per replica, assuming T(A) ≈ (log|A| + 3)/μ.
    pub fn expected_work_per_replica(&self) -> f64 {
        let t = ((self.target.len() as f64).ln() + 3.0) / self.mu;
        t * self.sampler.proposal_rate() * self.sampler.mean_proposal_steps()
    }

    fn stream<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        scratch: &mut HitScratch,
        mut visit: impl FnMut(f64, &[u32]) -> bool,
    ) -> Result<()> {
        let (mut t0, mut t1) = (0.0, self.initial_horizon);
        for _ in 0..self.settings.max_epochs {
            if self.sampler.run(rng, t0, t1, scratch, &mut visit) {
                return Ok(());
            }
            t0 = t1;
            t1 *= 2.0;
        }
        Err(Error::ResourceCeiling(format!(
            "target of {} points not covered by horizon {t0:.6e} after {} doublings",
            self.target.len(),
            self.settings.max_epochs
        )))
    }

    /// First time each target vertex lies on a loop.
    pub fn first_hits<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut HitScratch) -> Result<Vec<f64>> {
        let mut first = vec![f64::INFINITY; self.target.len()];
        let mut remaining = first.len();
        self.stream(rng, scratch, |t, hits| {
            for &h in hits {
                let slot = &mut first[h as usize];
                if slot.is_infinite() {
                    *slot = t;
                    remaining -= 1;
                }
            }
            remaining > 0
        })?;
        Ok(first)
    }

    pub fn cover_time<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut HitScratch) -> Result<f64> {
        Ok(self.first_hits(rng, scratch)?.into_iter().fold(0.0, f64::max))
    }

    /// Streams loops on (0, u_max] without stopping at coverage.
    pub fn trace<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut HitScratch, u_max: f64) -> EventTrace {
        let mut first_hit = vec![f64::INFINITY; self.target.len()];
        let mut first_shared = f64::INFINITY;
        self.sampler.run(rng, 0.0, u_max, scratch, |t, hits| {
            let (mut a, mut b) = (false, false);
            for &h in hits {
                let slot = &mut first_hit[h as usize];
                if slot.is_infinite() {
                    *slot = t;
                }
                a |= h == 0;
                b |= h == 1;
            }
            if a && b && first_shared.is_infinite() {
                first_shared = t;
            }
            true
        });
        EventTrace { first_hit, first_shared }
    }

    /// Cover times in replica order; replica r draws from (seed, COVER, r).
    pub fn cover_times(&self, replicas: usize, seed: u64) -> Result<Vec<f64>> {
        if replicas == 0 {
            return Err(invalid("replicas", "must be >= 1"));
        }
        (0..replicas as u64)
            .into_par_iter()
            .map_init(HitScratch::new, |scratch, r| {
                let mut rng = substream(seed, &[domain::COVER, r]);
                self.cover_time(&mut rng, scratch)
            })
            .collect()
    }

    pub fn ensemble(&self, replicas: usize, seed: u64) -> Result<CoverTimeSample> {
        self.sample_from(self.cover_times(replicas, seed)?, seed)
    }

    /// Wraps cover times produced by this engine.
    pub fn sample_from(&self, values: Vec<f64>, seed: u64) -> Result<CoverTimeSample> {
        let replicas = values.len();
        let values = EmpiricalDistribution::new(values)?;
        let t_max = values.values().last().copied().unwrap_or(0.0);
        Ok(CoverTimeSample {
            kappa: self.kappa,
            mu: self.mu,
            target: self.target.clone(),
            replicas,
            truncation_bias_bound: self.sampler.truncation_bias(t_max),
            n_trunc: self.sampler.n_trunc,
            seed,
            values,
        })
    }

    /// Cover times of each subset (given as target indices) under shared
    /// soups, one vector per subset in replica order.
    pub fn nested_cover_times(&self, subsets: &[Vec<usize>], replicas: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        for s in subsets {
            if s.is_empty() || s.iter().any(|&i| i >= self.target.len()) {
                return Err(invalid("subset", "indices must be nonempty and lie in the target"));
            }
        }
        let per_replica = (0..replicas as u64)
            .into_par_iter()
            .map_init(HitScratch::new, |scratch, r| {
                let mut rng = substream(seed, &[domain::COVER, r]);
                let first = self.first_hits(&mut rng, scratch)?;
                Ok(subsets.iter().map(|s| s.iter().map(|&i| first[i]).fold(0.0, f64::max)).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok((0..subsets.len()).map(|j| per_replica.iter().map(|v| v[j]).collect()).collect())
    }

    pub fn event_traces(&self, replicas: usize, seed: u64, u_max: f64) -> Result<Vec<EventTrace>> {
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(invalid("u_max", format!("must be finite and > 0, got {u_max}")));
        }
        Ok((0..replicas as u64)
            .into_par_iter()
            .map_init(HitScratch::new, |scratch, r| {
                let mut rng = substream(seed, &[domain::EVENTS, r]);
                self.trace(&mut rng, scratch, u_max)
            })
            .collect())
    }
}

/// Cover time of `target` under a fresh soup drawn from `rng`.
pub fn cover_time<R: Rng + ?Sized>(rng: &mut R, kappa: KillingRate, target: &TargetSet, tail_tol: f64) -> Result<f64> {
    let engine = CoverEngine::new(kappa, target, CoverSettings { tail_tol, ..CoverSettings::default() })?;
    engine.cover_time(rng, &mut HitScratch::new())
}

/// Cover time computed from an explicit windowed soup: roots in the bounding
/// box dilated by n_trunc, doubling the horizon until the target is covered.
pub fn cover_time_windowed(dist: &LengthDistribution, target: &TargetSet, initial_horizon: f64, seed: u64, replica: u64, max_epochs: u32) -> Result<f64> {
    let (x0, y0, x1, y1) = target.bounding_box();
    let window = Window::new(x0, y0, x1, y1)?.dilate(dist.n_trunc);
    let mut soup = sample_window_soup(dist, window, initial_horizon, seed, replica)?;
    let index: HashMap<LatticePoint, usize> = target.points().iter().enumerate().map(|(i, &p)| (p, i)).collect();
    for _ in 0..max_epochs {
        let mut first = vec![f64::INFINITY; target.len()];
        for l in &soup.loops {
            let mut p = l.rooted.root;
            for s in l.rooted.steps() {
                p = p.step(s);
                if let Some(&i) = index.get(&p) {
                    first[i] = first[i].min(l.timestamp);
                }
            }
        }
        if first.iter().all(|t| t.is_finite()) {
            return Ok(first.into_iter().fold(0.0, f64::max));
        }
        soup = extend_soup(dist, &soup, soup.time_horizon)?;
    }
    Err(Error::ResourceCeiling(format!("windowed soup did not cover the target after {max_epochs} doublings")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverTimeSample {
    pub kappa: KillingRate,
    pub mu: f64,
    pub target: TargetSet,
    pub replicas: usize,
    /// Sorted cover times.
    pub values: EmpiricalDistribution,
    /// Bound on the total-variation distance to the untruncated soup over [0, max T].
    pub truncation_bias_bound: f64,
    pub n_trunc: u64,
    pub seed: u64,
}

impl CoverTimeSample {
    /// μ(Γ_o)·T.
    pub fn scaled(&self) -> EmpiricalDistribution {
        self.values.map(|t| self.mu * t).expect("finite values")
    }
}

pub fn cover_time_ensemble(kappa: KillingRate, target: &TargetSet, replicas: usize, seed: u64, settings: CoverSettings) -> Result<CoverTimeSample> {
    CoverEngine::new(kappa, target, settings)?.ensemble(replicas, seed)
}

/// Simulated `NULL_LEVEL` quantile of the KS statistic for n exact samples.
pub fn ks_noise(n: usize) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&q) = cache.lock().expect("cache lock").get(&n) {
        return Ok(q);
    }
    let q = ks_null_quantile(n, NULL_LEVEL, NULL_REPETITIONS, NULL_CALIBRATION_SEED)?.quantile;
    cache.lock().expect("cache lock").insert(n, q);
    Ok(q)
}

/// sup_x (F_emp(x) − cdf(x)) over sample points.
pub fn ks_excess_above(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = emp.len() as f64;
    emp.values().iter().enumerate().map(|(i, &v)| (i + 1) as f64 / n - cdf(v)).fold(0.0, f64::max)
}

/// sup_x (cdf(x) − F_emp(x)) over sample points.
pub fn ks_excess_below(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = emp.len() as f64;
    emp.values().iter().enumerate().map(|(i, &v)| cdf(v) - i as f64 / n).fold(0.0, f64::max)
}

/// One goodness-of-fit comparison of μ(Γ_o)·T against a target law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsComparison {
    pub kappa: f64,
    pub mu: f64,
    pub set_size: usize,
    pub replicas: usize,
    pub distance: f64,
    pub noise: f64,
    pub truncation_bias: f64,
    /// Analytic allowance for the distance between the true and target laws.
    pub allowance: f64,
}

impl KsComparison {
    fn new(sample: &CoverTimeSample, emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64, allowance: f64) -> Result<Self> {
        Ok(Self {
            kappa: sample.kappa.value(),
            mu: sample.mu,
            set_size: sample.target.len(),
            replicas: sample.replicas,
            distance: ks_distance(emp, cdf),
            noise: ks_noise(sample.replicas)?,
            truncation_bias: sample.truncation_bias_bound,
            allowance,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.noise + self.truncation_bias + self.allowance
    }

    fn record(&self, check_id: &str, anchor: &str, detail: &str) -> VerdictRecord {
        VerdictRecord::inequality(
            check_id,
            anchor,
            self.distance,
            0.0,
            Direction::AtMost,
            self.threshold(),
            true,
            format!(
                "kappa={} |A|={} replicas={} noise={:.3e} bias={:.3e} allowance={:.3e}; {detail}",
                self.kappa, self.set_size, self.replicas, self.noise, self.truncation_bias, self.allowance
            ),
        )
    }
}

fn one_minus_exp(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        -(-u).exp_m1()
    }
}

/// Single-vertex cover time against 1 − e^{−u}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnePointReport {
    pub ks: KsComparison,
    pub mean: f64,
    pub mean_standard_error: f64,
    pub records: Vec<VerdictRecord>,
    #[serde(skip)]
    pub sample: Option<CoverTimeSample>,
}

pub fn run_one_point(kappa: KillingRate, replicas: usize, seed: u64, settings: CoverSettings) -> Result<OnePointReport> {
    let target = TargetSet::single(LatticePoint::new(0, 0));
    let sample = cover_time_ensemble(kappa, &target, replicas, seed, settings)?;
    let emp = sample.scaled();
    let ks = KsComparison::new(&sample, &emp, one_minus_exp, 0.0)?;
    let mean = emp.mean();
    // Exp(1) has unit variance
    let se = 1.0 / (replicas as f64).sqrt();
    let records = vec![
        ks.record("one-point-ks", "laws/one-point-exponential", "target 1-exp(-u)"),
        VerdictRecord::inequality(
            "one-point-mean",
            "laws/one-point-exponential",
            (mean - 1.0).abs(),
            0.0,
            Direction::AtMost,
            3.0 * se + ks.truncation_bias,
            true,
            format!("kappa={} mean={mean:.6}", kappa.value()),
        ),
    ];
    Ok(OnePointReport { ks, mean, mean_standard_error: se, records, sample: Some(sample) })
}

/// Monte Carlo estimate of a probability against its exact value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityCheck {
    pub quantity: String,
    pub u: f64,
    pub estimate: f64,
    pub exact: f64,
    pub standard_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEventReport {
    pub kappa: f64,
    pub x: LatticePoint,
    pub replicas: usize,
    /// Per u, the bias bound u·|A|·visit_tail.
    pub truncation_bias: Vec<f64>,
    pub checks: Vec<ProbabilityCheck>,
    pub records: Vec<VerdictRecord>,
}

/// Both vertices uncovered, no shared loop, and both covered, at each u.
pub fn run_pair_events(kappa: KillingRate, x: LatticePoint, us: &[f64], replicas: usize, seed: u64, settings: CoverSettings) -> Result<PairEventReport> {
    let o = LatticePoint::new(0, 0);
    if x == o {
        return Err(invalid("x", "must differ from the origin"));
    }
    if us.is_empty() || us.iter().any(|&u| !(u > 0.0 && u.is_finite())) {
        return Err(invalid("u", "need at least one finite u > 0"));
    }
    if replicas == 0 {
        return Err(invalid("replicas", "must be >= 1"));
    }
    let laws = ExactLaws::new(kappa)?;
    let target = TargetSet::new(vec![o, x])?;
    let engine = CoverEngine::with_mu(kappa, laws.mu(), &target, settings)?;
    let u_max = us.iter().copied().fold(0.0, f64::max);
    let traces = engine.event_traces(replicas, seed, u_max)?;
    let n = replicas as f64;
    let mut checks = Vec::new();
    let mut records = Vec::new();
    let mut biases = Vec::new();
    for &u in us {
        let bias = engine.sampler().truncation_bias(u);
        biases.push(bias);
        let count = |f: &dyn Fn(&EventTrace) -> bool| traces.iter().filter(|t| f(t)).count() as f64 / n;
        let rows = [
            ("pair-uncovered", "laws/pair-uncovered", count(&|t| t.first_hit[0] > u && t.first_hit[1] > u), laws.prob_pair_uncovered(x, u)?),
            ("no-shared-loop", "laws/no-shared-loop", count(&|t| t.first_shared > u), laws.prob_no_shared_loop(x, u)?),
            ("pair-cover-cdf", "laws/pair-cover-cdf", count(&|t| t.first_hit[0] <= u && t.first_hit[1] <= u), laws.pair_cover_cdf(x, u)?),
        ];
        for (id, anchor, estimate, exact) in rows {
            let se = proportion_standard_error(exact, replicas).max(proportion_standard_error(estimate, replicas));
            records.push(VerdictRecord::inequality(
                id,
                anchor,
                (estimate - exact).abs(),
                0.0,
                Direction::AtMost,
                3.0 * se + bias,
                true,
                format!("kappa={} x=({},{}) u={u} estimate={estimate:.6} exact={exact:.6}", kappa.value(), x.x1, x.x2),
            ));
            checks.push(ProbabilityCheck { quantity: id.into(), u, estimate, exact, standard_error: se });
        }
    }
    Ok(PairEventReport { kappa: kappa.value(), x, replicas, truncation_bias: biases, checks, records })
}

/// Coverage events of two vertices against the shared-loop probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiIndependenceReport {
    pub kappa: f64,
    pub k1: LatticePoint,
    pub k2: LatticePoint,
    pub u: f64,
    pub replicas: usize,
    pub p1: f64,
    pub p2: f64,
    pub p12: f64,
    pub shared: f64,
    pub covariance: f64,
    /// Standard error of |P(E₁∩E₂) − P(E₁)P(E₂)| − 4P(shared), by the delta method.
    pub combined_standard_error: f64,
    pub truncation_bias: f64,
    pub record: VerdictRecord,
}

/// E_i = {K_i covered by time u}; checks |Cov| ≤ 4 P(a loop hits both).
pub fn run_quasi_independence(kappa: KillingRate, k1: LatticePoint, k2: LatticePoint, u: f64, replicas: usize, seed: u64, settings: CoverSettings) -> Result<QuasiIndependenceReport> {
    if k1 == k2 {
        return Err(invalid("K2", "must differ from K1"));
    }
    if replicas < 2 {
        return Err(invalid("replicas", "must be >= 2"));
    }
    let target = TargetSet::new(vec![k1, k2])?;
    let engine = CoverEngine::new(kappa, &target, settings)?;
    let traces = engine.event_traces(replicas, seed, u)?;
    let n = replicas as f64;
    let ind: Vec<(f64, f64, f64)> = traces
        .iter()
        .map(|t| {
            let e1 = f64::from(u8::from(t.first_hit[0] <= u));
            let e2 = f64::from(u8::from(t.first_hit[1] <= u));
            (e1, e2, f64::from(u8::from(t.first_shared <= u)))
        })
        .collect();
    let p1 = ind.iter().map(|v| v.0).sum::<f64>() / n;
    let p2 = ind.iter().map(|v| v.1).sum::<f64>() / n;
    let p12 = ind.iter().map(|v| v.0 * v.1).sum::<f64>() / n;
    let shared = ind.iter().map(|v| v.2).sum::<f64>() / n;
    let covariance = p12 - p1 * p2;
    let sign = if covariance >= 0.0 { 1.0 } else { -1.0 };
    // influence function of sign·Cov − 4·P(shared)
    let psi: Vec<f64> = ind.iter().map(|&(a, b, s)| sign * (a * b - p2 * a - p1 * b) - 4.0 * s).collect();
    let psi_mean = psi.iter().sum::<f64>() / n;
    let var = psi.iter().map(|v| (v - psi_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let combined = (var / n).sqrt();
    let bias = engine.sampler().truncation_bias(u);
    // each of p1, p2, p12, shared moves by at most `bias` under truncation
    let bias_allowance = 7.0 * bias;
    let record = VerdictRecord::inequality(
        "quasi-independence",
        "laws/quasi-independence",
        covariance.abs(),
        0.0,
        Direction::AtMost,
        4.0 * shared + 3.0 * combined + bias_allowance,
        true,
        format!(
            "kappa={} K1=({},{}) K2=({},{}) u={u} p1={p1:.5} p2={p2:.5} p12={p12:.5} shared={shared:.3e}",
            kappa.value(),
            k1.x1,
            k1.x2,
            k2.x1,
            k2.x2
        ),
    );
    Ok(QuasiIndependenceReport {
        kappa: kappa.value(),
        k1,
        k2,
        u,
        replicas,
        p1,
        p2,
        p12,
        shared,
        covariance,
        combined_standard_error: combined,
        truncation_bias: bias,
        record,
    })
}

/// 32u·e^{−2u}·e^{−2/κ}/μ: distance between the law of μT for two far
/// vertices and that of the maximum of two independent Exp(1).
pub fn two_far_gap(kappa: KillingRate, mu: f64, u: f64) -> f64 {
    32.0 * u * (-2.0 * u).exp() * (-2.0 / kappa.value()).exp() / mu
}

/// Supremum of `two_far_gap` over u, attained at u = 1/2.
pub fn two_far_gap_sup(kappa: KillingRate, mu: f64) -> f64 {
    two_far_gap(kappa, mu, 0.5)
}

/// Smallest separation at which the far-point law is asserted.
pub fn far_separation_threshold(kappa: KillingRate) -> f64 {
    10.0 / (kappa.value() * kappa.value())
}

fn check_even_separation(separation: u64) -> Result<()> {
    if separation == 0 || !separation.is_multiple_of(2) {
        return Err(invalid("separation", format!("must be even and >= 2, got {separation}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapAtQuantile {
    pub level: f64,
    pub u: f64,
    pub gap: f64,
}

/// k far-apart vertices against the law of the maximum of k independent Exp(1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarPointsReport {
    pub count: u32,
    pub separation: u64,
    pub ks: KsComparison,
    pub pair_gap_sup: f64,
    pub gap_at_quantiles: Vec<GapAtQuantile>,
    pub records: Vec<VerdictRecord>,
    #[serde(skip)]
    pub sample: Option<CoverTimeSample>,
}

/// k points on a line, pairwise at least `separation` apart; the allowance is
/// k² times the two-point gap. Below `far_separation_threshold` the distance
/// is only reported.
pub fn run_example_many_sep(kappa: KillingRate, count: u32, separation: u64, replicas: usize, seed: u64, settings: CoverSettings) -> Result<FarPointsReport> {
    if count == 0 {
        return Err(invalid("count", "must be >= 1"));
    }
    if count > 1 {
        check_even_separation(separation)?;
    }
    let far = count == 1 || separation as f64 >= far_separation_threshold(kappa);
    let target = TargetSet::line(count, separation.max(1))?;
    let sample = cover_time_ensemble(kappa, &target, replicas, seed, settings)?;
    let emp = sample.scaled();
    let k = count as i32;
    let cdf = |u: f64| one_minus_exp(u).powi(k);
    let pair_gap_sup = if count > 1 { two_far_gap_sup(kappa, sample.mu) } else { 0.0 };
    let allowance = f64::from(count).powi(2) * pair_gap_sup;
    let ks = KsComparison::new(&sample, &emp, cdf, allowance)?;
    let gap_at_quantiles = [0.1, 0.25, 0.5, 0.75, 0.9]
        .iter()
        .map(|&level| {
            let u = emp.quantile(level).expect("nonempty");
            GapAtQuantile { level, u, gap: two_far_gap(kappa, sample.mu, u) }
        })
        .collect();
    let id = if count == 2 { "two-far" } else { "many-sep" };
    let strict = ks.noise + ks.truncation_bias;
    let ks_id = format!("{id}-ks-k{count}");
    let main = if far {
        ks.record(&ks_id, "examples/far-points", &format!("target (1-exp(-u))^{count}, separation {separation}"))
    } else {
        VerdictRecord::reported(
            ks_id,
            "examples/intermediate-separation",
            ks.distance,
            ks.threshold(),
            format!("separation {separation} < 10/kappa^2 = {}; nothing asserted", far_separation_threshold(kappa)),
        )
    };
    let records = vec![
        main,
        VerdictRecord::reported(
            format!("{id}-ks-k{count}-without-gap"),
            "examples/far-points",
            ks.distance,
            strict,
            format!("kappa={} distance against noise and bias alone", kappa.value()),
        ),
        VerdictRecord::reported(
            format!("{id}-gap-sup-k{count}"),
            "examples/far-points",
            pair_gap_sup,
            1.0,
            format!("kappa={} pair gap at u=1/2; vacuous when >= 1", kappa.value()),
        ),
    ];
    Ok(FarPointsReport { count, separation, ks, pair_gap_sup, gap_at_quantiles, records, sample: Some(sample) })
}

pub fn run_example_two_far(kappa: KillingRate, separation: u64, replicas: usize, seed: u64, settings: CoverSettings) -> Result<FarPointsReport> {
    run_example_many_sep(kappa, 2, separation, replicas, seed, settings)
}

/// e^{−u}(1 − 6^{−u/μ}), the neighbour-pair gap to a single exponential.
pub fn neighbor_gap(mu: f64, u: f64) -> f64 {
    (-u).exp() * (1.0 - 6f64.powf(-u / mu))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborRow {
    pub ks: KsComparison,
    pub gap_sup: f64,
    /// sup (F_emp − (1 − e^{−u})); positive values contradict T({o,x}) ≥ T({o}).
    pub excess_over_single: f64,
    /// sup ((1 − e^{−u})² − F_emp); positive values contradict positive association.
    pub deficit_under_independent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborsReport {
    pub x: LatticePoint,
    pub rows: Vec<NeighborRow>,
    pub records: Vec<VerdictRecord>,
    /// μT per grid point.
    #[serde(skip)]
    pub scaled: Vec<EmpiricalDistribution>,
}

fn sup_on_grid(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
    (1..=4000).map(|i| f(hi * i as f64 / 4000.0)).fold(0.0, f64::max)
}

/// μT({o,(1,1)}) against 1 − e^{−u} along a κ grid, expecting the distance to
/// shrink as κ decreases.
pub fn run_example_neighbors(kappa_grid: &[KillingRate], replicas: usize, seed: u64, settings: CoverSettings) -> Result<NeighborsReport> {
    if kappa_grid.is_empty() {
        return Err(invalid("kappa grid", "must be nonempty"));
    }
    let x = LatticePoint::new(1, 1);
    let target = TargetSet::new(vec![LatticePoint::new(0, 0), x])?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut scaled = Vec::new();
    for (i, &kappa) in kappa_grid.iter().enumerate() {
        let sample = cover_time_ensemble(kappa, &target, replicas, child_seed(seed, &[i as u64]), settings)?;
        let emp = sample.scaled();
        let ks = KsComparison::new(&sample, &emp, one_minus_exp, 0.0)?;
        let mu = sample.mu;
        let row = NeighborRow {
            gap_sup: sup_on_grid(|u| neighbor_gap(mu, u), 40.0),
            excess_over_single: ks_excess_above(&emp, one_minus_exp),
            deficit_under_independent: ks_excess_below(&emp, |u| one_minus_exp(u).powi(2)),
            ks,
        };
        let slack = row.ks.noise + row.ks.truncation_bias;
        let detail = format!("kappa={}", kappa.value());
        records.push(VerdictRecord::reported(format!("neighbors-ks-{i}"), "examples/neighbors", row.ks.distance, row.gap_sup, format!("{detail}; rhs is the sup of the gap bound")));
        records.push(VerdictRecord::inequality("neighbors-below-single", "examples/neighbors", row.excess_over_single, 0.0, Direction::AtMost, slack, true, detail.clone()));
        records.push(VerdictRecord::inequality("neighbors-above-independent", "examples/neighbors", row.deficit_under_independent, 0.0, Direction::AtMost, slack, true, detail));
        rows.push(row);
        scaled.push(emp);
    }
    records.extend(trend_records("neighbors-trend", "examples/neighbors", rows.iter().map(|r| (&r.ks, format!("kappa={}", r.ks.kappa)))));
    Ok(NeighborsReport { x, rows, records, scaled })
}

/// D_{i+1} ≤ D_i + noise_{i+1} + biases, for consecutive comparisons.
fn trend_records<'a>(id: &str, anchor: &str, items: impl Iterator<Item = (&'a KsComparison, String)>) -> Vec<VerdictRecord> {
    let items: Vec<_> = items.collect();
    items
        .windows(2)
        .map(|w| {
            let ((a, la), (b, lb)) = (&w[0], &w[1]);
            VerdictRecord::inequality(
                format!("{id}-{la}-to-{lb}"),
                anchor,
                b.distance,
                0.0,
                Direction::AtMost,
                a.distance + b.noise.max(a.noise) + a.truncation_bias + b.truncation_bias,
                true,
                format!("{la} distance={:.5}; {lb} distance={:.5}", a.distance, b.distance),
            )
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GumbelRow {
    pub side: u32,
    pub ks: KsComparison,
    /// Median of μT − log|A|.
    pub median_centered: f64,
    /// 12|A|^{−1/(800μ)}.
    pub limit_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GumbelReport {
    pub kappa: f64,
    pub mu: f64,
    pub replicas: usize,
    pub gumbel_median: f64,
    pub rows: Vec<GumbelRow>,
    pub records: Vec<VerdictRecord>,
    pub note: String,
    #[serde(skip)]
    pub centered: Vec<EmpiricalDistribution>,
}

pub const GUMBEL_REGIME_NOTE: &str = "the limit theorem needs 1/kappa >= exp(e^32), far beyond reach; \
this scan checks only that the distance to the Gumbel law shrinks as the box grows";

/// μT(A_n) − log|A_n| against exp(−e^{−z}) for n×n boxes of growing side.
pub fn run_gumbel_scan(kappa: KillingRate, sides: &[u32], replicas: usize, seed: u64, settings: CoverSettings, work_guard: f64) -> Result<GumbelReport> {
    if sides.is_empty() || sides.contains(&0) {
        return Err(invalid("boxes", "need at least one side >= 1"));
    }
    if replicas == 0 {
        return Err(invalid("replicas", "must be >= 1"));
    }
    let mu = mu_gamma_o(kappa, MU_REL_TOL)?.value;
    let engines = sides
        .iter()
        .map(|&n| CoverEngine::with_mu(kappa, mu, &TargetSet::square(n)?, settings))
        .collect::<Result<Vec<_>>>()?;
    let work: f64 = engines.iter().map(|e| e.expected_work_per_replica() * replicas as f64).sum();
    if work > work_guard {
        return Err(Error::ResourceCeiling(format!("gumbel scan needs about {work:.3e} bridge steps, above the guard {work_guard:.3e}")));
    }
    let mut rows = Vec::new();
    let mut centered = Vec::new();
    let mut records = Vec::new();
    for (&side, engine) in sides.iter().zip(&engines) {
        let sample = engine.ensemble(replicas, child_seed(seed, &[u64::from(side)]))?;
        let log_size = (sample.target.len() as f64).ln();
        let emp = sample.values.map(|t| mu * t - log_size)?;
        let ks = KsComparison::new(&sample, &emp, gumbel_cdf, 0.0)?;
        let limit_bound = 12.0 * (sample.target.len() as f64).powf(-1.0 / (800.0 * mu));
        records.push(VerdictRecord::inequality(
            format!("gumbel-limit-bound-{side}"),
            "covertime/gumbel-limit",
            ks.distance,
            0.0,
            Direction::AtMost,
            limit_bound,
            kappa_inv_doubly_exponential(kappa),
            format!("kappa={} side={side}", kappa.value()),
        ));
        rows.push(GumbelRow { side, ks, median_centered: emp.median().expect("nonempty"), limit_bound });
        centered.push(emp);
    }
    let gumbel_median = -(2f64.ln().ln());
    if let Some(last) = rows.last() {
        records.push(VerdictRecord::reported("gumbel-median", "covertime/gumbel-limit", last.median_centered, gumbel_median, format!("side={}", last.side)));
    }
    records.extend(trend_records("gumbel-trend", "covertime/gumbel-limit", rows.iter().map(|r| (&r.ks, format!("side{}", r.side)))));
    Ok(GumbelReport {
        kappa: kappa.value(),
        mu,
        replicas,
        gumbel_median,
        rows,
        records,
        note: GUMBEL_REGIME_NOTE.into(),
        centered,
    })
}

/// Two-sample KS distance against the asymptotic `NULL_LEVEL` threshold.
fn two_sample_record(check_id: &str, anchor: &str, a: &CoverTimeSample, b: &CoverTimeSample, detail: String) -> VerdictRecord {
    let (n, m) = (a.replicas as f64, b.replicas as f64);
    let d = ks_two_sample(&a.values, &b.values);
    let n_eff = (n * m / (n + m)).floor().max(1.0) as usize;
    let noise = kolmogorov_asymptotic_quantile(n_eff, NULL_LEVEL);
    let bias = a.truncation_bias_bound + b.truncation_bias_bound;
    VerdictRecord::inequality(check_id, anchor, d, 0.0, Direction::AtMost, noise + bias, true, detail)
}

/// μT({x}) has the same law for every x.
pub fn check_translation_invariance(kappa: KillingRate, x: LatticePoint, replicas: usize, seed: u64, settings: CoverSettings) -> Result<VerdictRecord> {
    let at_o = cover_time_ensemble(kappa, &TargetSet::single(LatticePoint::new(0, 0)), replicas, child_seed(seed, &[0]), settings)?;
    let at_x = cover_time_ensemble(kappa, &TargetSet::single(x), replicas, child_seed(seed, &[1]), settings)?;
    Ok(two_sample_record("translation-invariance", "covertime/translation-invariance", &at_o, &at_x, format!("kappa={} x={x}", kappa.value())))
}

/// The law of T(A) does not depend on the initial horizon.
pub fn check_horizon_invariance(kappa: KillingRate, target: &TargetSet, replicas: usize, seed: u64, settings: CoverSettings) -> Result<VerdictRecord> {
    let short = cover_time_ensemble(kappa, target, replicas, child_seed(seed, &[0]), CoverSettings { horizon_scale: 0.5, ..settings })?;
    let long = cover_time_ensemble(kappa, target, replicas, child_seed(seed, &[1]), CoverSettings { horizon_scale: 2.0, ..settings })?;
    Ok(two_sample_record(
        "horizon-invariance",
        "covertime/horizon-invariance",
        &short,
        &long,
        format!("kappa={} |A|={} initial horizons u* and 4u*", kappa.value(), target.len()),
    ))
}

/// Under shared soups, T(B) ≤ T(A) for nested B ⊆ A; counts violations.
pub fn check_monotonicity(kappa: KillingRate, target: &TargetSet, replicas: usize, seed: u64, settings: CoverSettings) -> Result<VerdictRecord> {
    let engine = CoverEngine::new(kappa, target, settings)?;
    let n = target.len();
    let subsets: Vec<Vec<usize>> = (1..=n).map(|k| (0..k).collect()).collect();
    let times = engine.nested_cover_times(&subsets, replicas, seed)?;
    let violations = (0..replicas).filter(|&r| times.windows(2).any(|w| w[0][r] > w[1][r])).count();
    Ok(VerdictRecord::inequality(
        "nested-monotonicity",
        "covertime/monotonicity",
        violations as f64,
        0.0,
        Direction::AtMost,
        0.0,
        true,
        format!("kappa={} |A|={n} replicas={replicas}", kappa.value()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verdict::Verdict;

    fn kap(k: f64) -> KillingRate {
        KillingRate::new(k).unwrap()
    }

    #[test]
    fn single_replica_and_determinism() {
        let set = TargetSet::single(LatticePoint::new(0, 0));
        let a = cover_time_ensemble(kap(0.5), &set, 1, 3, CoverSettings::default()).unwrap();
        assert_eq!(a.values.len(), 1);
        let b = cover_time_ensemble(kap(0.5), &set, 50, 3, CoverSettings::default()).unwrap();
        let c = cover_time_ensemble(kap(0.5), &set, 50, 3, CoverSettings::default()).unwrap();
        assert_eq!(b, c);
        assert!(b.values.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn gap_formulas() {
        let k = kap(1.0);
        assert!((two_far_gap_sup(k, 1.0) - 16.0 * (-1.0f64).exp() * (-2.0f64).exp()).abs() < 1e-15);
        assert!(two_far_gap(k, 1.0, 0.4) < two_far_gap_sup(k, 1.0));
        assert!(two_far_gap(k, 1.0, 0.6) < two_far_gap_sup(k, 1.0));
        assert_eq!(neighbor_gap(0.5, 0.0), 0.0);
    }

    #[test]
    fn far_separation_preconditions() {
        assert!(run_example_two_far(kap(1.0), 9, 10, 1, CoverSettings::default()).is_err());
        assert!(run_example_two_far(kap(1.0), 0, 10, 1, CoverSettings::default()).is_err());
        let near = run_example_many_sep(kap(0.5), 3, 20, 200, 1, CoverSettings::default()).unwrap();
        assert_eq!(near.records[0].verdict, Verdict::Reported);
        assert_eq!(near.records[0].anchor, "examples/intermediate-separation");
    }

    #[test]
    fn one_sided_excess() {
        let emp = EmpiricalDistribution::new(vec![0.25, 0.75]).unwrap();
        let id = |x: f64| x.clamp(0.0, 1.0);
        assert!((ks_excess_above(&emp, id) - 0.25).abs() < 1e-15);
        assert!((ks_excess_below(&emp, id) - 0.25).abs() < 1e-15);
    }
}
