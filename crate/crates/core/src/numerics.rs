//! Floating-point helpers shared by the series engines: error-free
//! accumulation and normalized binomial coefficients.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

/// Compensated accumulator (Knuth two-sum). Branch-free so that arrays of
/// accumulators vectorize.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        let bp = t - self.sum;
        let err = (self.sum - (t - bp)) + (x - bp);
        self.comp += err;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Natural log of a big integer, accurate to a few ulps of the result.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Exact ratio `num / 2^pow2` rounded to f64.
pub fn biguint_over_pow2(num: &BigUint, pow2: u64) -> f64 {
    let bits = num.bits();
    if bits <= 1000 && pow2 <= 1000 {
        return num.to_f64().unwrap_or(f64::INFINITY) * (-(pow2 as f64)).exp2();
    }
    let shift = bits.saturating_sub(64);
    let top = (num >> shift).to_f64().unwrap_or(0.0);
    top * ((shift as f64) - pow2 as f64).exp2()
}

const CENTRAL_TABLE_LEN: usize = 256;

fn central_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..CENTRAL_TABLE_LEN as u64)
            .map(|n| biguint_over_pow2(&binomial(2 * n, n), 2 * n))
            .collect()
    })
}

/// log of C(2n, n) / 4^n.
///
/// Below 256 the value comes from the exact coefficient; above it from the
/// asymptotic expansion of log Γ(n+1/2) − log Γ(n+1), whose omitted terms are
/// below 1e-19 there.
pub fn ln_central_binomial_normalized(n: u64) -> f64 {
    if (n as usize) < CENTRAL_TABLE_LEN {
        return central_table()[n as usize].ln();
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (-1.0 / 8.0 + inv2 * (1.0 / 192.0 + inv2 * (-1.0 / 640.0 + inv2 * (17.0 / 14336.0))));
    -0.5 * (std::f64::consts::PI * x).ln() + series
}

/// C(2n, n) / 4^n.
pub fn central_binomial_normalized(n: u64) -> f64 {
    if (n as usize) < CENTRAL_TABLE_LEN {
        return central_table()[n as usize];
    }
    ln_central_binomial_normalized(n).exp()
}

/// C(2n, n+j) / C(2n, n) = Π_{i=1..j} (n−i+1)/(n+i), zero when j > n.
pub fn binomial_shift_ratio(n: u64, j: u64) -> f64 {
    if j > n {
        return 0.0;
    }
    let mut r = 1.0;
    let nf = n as f64;
    for i in 1..=j {
        let i = i as f64;
        r *= (nf - i + 1.0) / (nf + i);
    }
    r
}

/// ln n! from the exact factorial, for moderate n.
pub fn ln_factorial_exact(n: u64) -> f64 {
    let mut acc = BigUint::one();
    for k in 2..=n {
        acc *= k;
    }
    ln_biguint(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_digits() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-12)).abs() < 1e-24 + 1e-16);
        let naive: f64 = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000)).sum();
        assert_eq!(naive, 1.0);
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 2), BigUint::from(6u32));
        assert_eq!(binomial(20, 10), BigUint::from(184_756u32));
        assert_eq!(binomial(3, 5), BigUint::from(0u32));
    }

    #[test]
    fn asymptotic_central_binomial_matches_exact_above_table() {
        for n in [256u64, 300, 777, 2000] {
            let exact = ln_biguint(&binomial(2 * n, n)) - 2.0 * n as f64 * std::f64::consts::LN_2;
            let asym = ln_central_binomial_normalized(n);
            // exact side carries ~1e-16 relative error on a number of size ~n
            assert!((exact - asym).abs() < 1e-12, "n={n}: {exact} vs {asym}");
        }
    }

    #[test]
    fn central_binomial_matches_recurrence_in_table_range() {
        let mut c = 1.0f64;
        for n in 1..256u64 {
            c *= (2 * n - 1) as f64 / (2 * n) as f64;
            let t = central_binomial_normalized(n);
            assert!((c - t).abs() <= 1e-13 * t);
        }
    }

    #[test]
    fn shift_ratio_matches_exact() {
        let n = 40;
        for j in 0..=12 {
            let exact = ln_biguint(&binomial(2 * n, n + j)) - ln_biguint(&binomial(2 * n, n));
            assert!((binomial_shift_ratio(n, j).ln() - exact).abs() < 1e-13);
        }
        assert_eq!(binomial_shift_ratio(3, 4), 0.0);
    }
}
