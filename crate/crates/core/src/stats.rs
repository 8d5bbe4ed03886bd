//! Empirical distributions and the goodness-of-fit statistics used by the
//! Monte Carlo checks. Thresholds come from simulated null runs, not from
//! asymptotic constants.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};
use crate::numerics::CompensatedSum;
use crate::rng::{domain, substream};

/// Sorted finite sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sample", "values must be finite"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Right-continuous F(x) = #{v ≤ x}/n.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    /// Smallest sample value v with F(v) ≥ p.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        if self.values.is_empty() || !(0.0..=1.0).contains(&p) {
            return None;
        }
        let n = self.values.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        Some(self.values[k - 1])
    }

    pub fn median(&self) -> Option<f64> {
        self.quantile(0.5)
    }

    pub fn mean(&self) -> f64 {
        mean_and_standard_error(&self.values).0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// (mean, standard error of the mean).
pub fn mean_and_standard_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).collect::<CompensatedSum>().value();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Standard error of a Bernoulli proportion estimate.
pub fn proportion_standard_error(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// sup_x |F_emp(x) − F(x)| for a continuous F, attained at sample points.
pub fn ks_distance(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = emp.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in emp.values().iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// Two-sample statistic sup_x |F_a(x) − F_b(x)|.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (x, y) = (a.values(), b.values());
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Permutation p-value of the two-sample statistic, (1 + #{D* ≥ D})/(1 + perms).
pub fn ks_permutation_p_value(a: &EmpiricalDistribution, b: &EmpiricalDistribution, perms: usize, seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    let observed = ks_two_sample(a, b);
    let pooled: Vec<f64> = a.values().iter().chain(b.values()).copied().collect();
    let na = a.len();
    let exceed: usize = (0..perms)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(seed, &[domain::PERMUTATION, p as u64]);
            let mut v = pooled.clone();
            v.shuffle(&mut rng);
            let (l, r) = v.split_at(na);
            let d = ks_two_sample(
                &EmpiricalDistribution::new(l.to_vec()).expect("finite"),
                &EmpiricalDistribution::new(r.to_vec()).expect("finite"),
            );
            usize::from(d >= observed - 1e-15)
        })
        .sum();
    (1 + exceed) as f64 / (1 + perms) as f64
}

/// One draw of the one-sample statistic for n uniforms, through sorted
/// uniforms built from exponential spacings.
pub fn ks_null_draw<R: Rng + ?Sized>(rng: &mut R, n: usize) -> f64 {
    let mut cum = Vec::with_capacity(n);
    let mut s = 0.0;
    for _ in 0..n {
        let e: f64 = Exp1.sample(rng);
        s += e;
        cum.push(s);
    }
    let last: f64 = Exp1.sample(rng);
    let total = s + last;
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, c) in cum.iter().enumerate() {
        let u = c / total;
        d = d.max((i + 1) as f64 / nf - u).max(u - i as f64 / nf);
    }
    d
}

/// Simulated null distribution of the one-sample statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsNull {
    pub sample_size: usize,
    pub repetitions: usize,
    pub level: f64,
    pub quantile: f64,
}

/// `level` quantile of the statistic under exact sampling, from `reps` runs.
pub fn ks_null_quantile(n: usize, level: f64, reps: usize, seed: u64) -> Result<KsNull> {
    if n == 0 || reps == 0 {
        return Err(invalid("ks null", "sample size and repetitions must be >= 1"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", format!("must lie in (0,1), got {level}")));
    }
    let draws: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| ks_null_draw(&mut substream(seed, &[domain::NULL_CALIBRATION, n as u64, r as u64]), n))
        .collect();
    let emp = EmpiricalDistribution::new(draws)?;
    Ok(KsNull { sample_size: n, repetitions: reps, level, quantile: emp.quantile(level).expect("nonempty") })
}

/// Asymptotic Kolmogorov quantile K_level/√n, for cross-checking the null run.
pub fn kolmogorov_asymptotic_quantile(n: usize, level: f64) -> f64 {
    // P(K ≤ x) = 1 − 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²x²}
    let cdf = |x: f64| {
        let mut s = 0.0;
        for k in 1..100 {
            let kf = k as f64;
            let t = (-2.0 * kf * kf * x * x).exp();
            s += if k % 2 == 1 { t } else { -t };
            if t < 1e-18 {
                break;
            }
        }
        1.0 - 2.0 * s
    };
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / (n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson statistic for observed counts against expected counts.
pub fn chi_square_test(observed: &[u64], expected: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(invalid("chi-square", "need matching count vectors with >= 2 cells"));
    }
    if expected.iter().any(|&e| !(e > 0.0)) {
        return Err(invalid("chi-square", "expected counts must be > 0"));
    }
    let statistic: f64 = observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| invalid("chi-square", e.to_string()))?;
    Ok(ChiSquareTest { statistic, degrees_of_freedom: dof, p_value: 1.0 - dist.cdf(statistic) })
}
