//! Green's function of the killed walk, G^{o,x} = Σ_n (4+κ)^{-n} W_n^{o,x},
//! evaluated with a certified truncation error.
//!
//! Even-|x| terms use the diagonal product formula in normalized form,
//! W_{2m}^{o,x} (4+κ)^{-2m} = c(m)² q^m r_a(m) r_b(m), where c(m) = C(2m,m)/4^m,
//! q = (4/(4+κ))², r_j(m) = C(2m,m+j)/C(2m,m) and (2a, 2b) are the absolute
//! diagonal coordinates of x. Odd |x| goes through the neighbour identity
//! G^{o,x} = (4+κ)^{-1} Σ_{y~x} G^{o,y}.
//!
//! The truncation point is the first half-length N with Nκ ≥ 1/2 whose
//! certified return tail 4e^{-Nκ/4} is below the requested tolerance. The
//! same bound dominates the tail at every x because even-length walk counts
//! are maximal at the origin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{LatticePoint, ORIGIN};
use crate::numerics::{central_binomial_normalized, ln_central_binomial_normalized, CompensatedSum};

/// Hard cap on the number of half-length terms any series may use.
pub const DEFAULT_N_CEILING: u64 = 400_000_000;

/// Relative bound on accumulated rounding in a summed series (terms carry a
/// few tens of ulps; the two-sum accumulator adds O(ulp)).
pub const ROUNDING_REL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct KillingRate(f64);

impl KillingRate {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa", format!("killing rate must be finite and > 0, got {kappa}")));
        }
        Ok(Self(kappa))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn inverse(self) -> f64 {
        1.0 / self.0
    }

    /// β = 1/(4+κ), the weight of one step.
    pub fn step_weight(self) -> f64 {
        1.0 / (4.0 + self.0)
    }

    /// ln q with q = (4β)², the per-half-length decay of normalized terms.
    pub fn ln_half_decay(self) -> f64 {
        -2.0 * (self.0 / 4.0).ln_1p()
    }
}

/// Σ_{m>n} (4+κ)^{-2m} L_{2m} ≤ 4 e^{-nκ/4}, valid once nκ ≥ 1/2.
pub fn certified_return_tail(kappa: KillingRate, n: u64) -> Option<f64> {
    let nk = n as f64 * kappa.value();
    (nk >= 0.5).then(|| 4.0 * (-nk / 4.0).exp())
}

/// (4+κ)^{-2m} L_{2m}.
#[inline]
pub(crate) fn return_term(ln_q: f64, m: u64) -> f64 {
    if m < 256 {
        let c = central_binomial_normalized(m);
        c * c * (m as f64 * ln_q).exp()
    } else {
        (2.0 * ln_central_binomial_normalized(m) + m as f64 * ln_q).exp()
    }
}

/// Absolute half-diagonal coordinates (a, b), a ≤ b, of a point with even |x|.
pub fn half_diagonal(x: LatticePoint) -> Option<(u64, u64)> {
    let t = x.diagonal();
    if t.s % 2 != 0 {
        return None;
    }
    let (a, b) = ((t.s / 2).unsigned_abs(), (t.d / 2).unsigned_abs());
    Some((a.min(b), a.max(b)))
}

/// Partial sums of several even-|x| series, accumulated in increasing
/// half-length with a shared truncation point.
pub(crate) struct EvenSeries {
    pub sums: Vec<f64>,
    pub n_trunc: u64,
    pub tail_bound: f64,
}

/// Sums the series for each (a, b) until `stop(tail, partials)` accepts the
/// certified tail. `partials` holds the running values in `coords` order.
pub(crate) fn sum_even_series(
    kappa: KillingRate,
    coords: &[(u64, u64)],
    ceiling: u64,
    what: &str,
    mut stop: impl FnMut(f64, &[f64]) -> bool,
) -> Result<EvenSeries> {
    let jmax = coords.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0) as usize;
    let ln_q = kappa.ln_half_decay();
    let mut acc = vec![CompensatedSum::new(); coords.len()];
    let mut ratios = vec![0.0f64; jmax + 1];
    let mut partials = vec![0.0f64; coords.len()];
    let first_check = (0.5 / kappa.value()).ceil() as u64;
    let mut m = 0u64;
    loop {
        let base = return_term(ln_q, m);
        let mf = m as f64;
        ratios[0] = 1.0;
        for j in 1..=jmax {
            let jf = j as f64;
            ratios[j] = ratios[j - 1] * ((mf - jf + 1.0).max(0.0) / (mf + jf));
        }
        for (slot, &(a, b)) in acc.iter_mut().zip(coords) {
            slot.add(base * ratios[a as usize] * ratios[b as usize]);
        }
        if m >= first_check {
            if let Some(tail) = certified_return_tail(kappa, m) {
                for (p, s) in partials.iter_mut().zip(&acc) {
                    *p = s.value();
                }
                if stop(tail, &partials) {
                    return Ok(EvenSeries { sums: partials, n_trunc: m, tail_bound: tail });
                }
            }
        }
        if m >= ceiling {
            return Err(Error::TruncationCeiling { what: what.to_string(), ceiling });
        }
        m += 1;
    }
}

/// A single Green's function value with its certified error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreensValue {
    pub value: f64,
    pub certified_error: f64,
    /// Last half-length included.
    pub n_trunc: u64,
    pub tail_bound: f64,
}

/// G^{o,x}(κ) truncated once the certified tail is below `rel_tol` times the
/// running value.
pub fn greens_value(kappa: KillingRate, x: LatticePoint, rel_tol: f64) -> Result<GreensValue> {
    greens_value_with_ceiling(kappa, x, rel_tol, DEFAULT_N_CEILING)
}

pub fn greens_value_with_ceiling(kappa: KillingRate, x: LatticePoint, rel_tol: f64, ceiling: u64) -> Result<GreensValue> {
    if !(rel_tol > 0.0) {
        return Err(invalid("rel_tol", format!("must be > 0, got {rel_tol}")));
    }
    let what = format!("G^{{o,{x}}} at kappa={}", kappa.value());
    if let Some(ab) = half_diagonal(x) {
        let s = sum_even_series(kappa, &[ab], ceiling, &what, |tail, p| tail <= rel_tol * p[0])?;
        let value = s.sums[0];
        return Ok(GreensValue {
            value,
            certified_error: s.tail_bound + ROUNDING_REL * value,
            n_trunc: s.n_trunc,
            tail_bound: s.tail_bound,
        });
    }
    // odd |x|: four even neighbours, tails summed with weight β each
    let beta = kappa.step_weight();
    let mut coords: Vec<(u64, u64)> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    for y in x.neighbors() {
        let ab = half_diagonal(y).expect("neighbour of odd point is even");
        match coords.iter().position(|&c| c == ab) {
            Some(i) => mult[i] += 1.0,
            None => {
                coords.push(ab);
                mult.push(1.0);
            }
        }
    }
    let combine = |p: &[f64]| beta * p.iter().zip(&mult).map(|(v, m)| v * m).sum::<f64>();
    let s = sum_even_series(kappa, &coords, ceiling, &what, |tail, p| 4.0 * beta * tail <= rel_tol * combine(p))?;
    let value = combine(&s.sums);
    Ok(GreensValue {
        value,
        certified_error: 4.0 * beta * s.tail_bound + ROUNDING_REL * value,
        n_trunc: s.n_trunc,
        tail_bound: 4.0 * beta * s.tail_bound,
    })
}

/// G^{o,x} on the disc |x| ≤ radius, symmetrized from one octant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreensTable {
    pub kappa: KillingRate,
    pub radius: u32,
    /// Keyed by the octant representative.
    values: BTreeMap<LatticePoint, f64>,
    errors: BTreeMap<LatticePoint, f64>,
    pub n_trunc: u64,
    pub tail_bound: f64,
    /// 1/(4+κ): g(x,y) = G^{x,y}/(4+κ).
    pub g_normalization: f64,
}

impl GreensTable {
    /// Value at any point of the disc, via lattice symmetry.
    pub fn get(&self, x: LatticePoint) -> Option<f64> {
        self.values.get(&x.canonical()).copied()
    }

    pub fn value(&self, x: LatticePoint) -> f64 {
        self.get(x).unwrap_or_else(|| panic!("{x} outside Green's table of radius {}", self.radius))
    }

    pub fn error_bound(&self, x: LatticePoint) -> Option<f64> {
        self.errors.get(&x.canonical()).copied()
    }

    pub fn at_origin(&self) -> f64 {
        self.value(ORIGIN)
    }

    /// g(x, y) = G^{x,y}/(4+κ), translation invariant.
    pub fn g(&self, x: LatticePoint, y: LatticePoint) -> Option<f64> {
        self.get(y - x).map(|v| v * self.g_normalization)
    }

    /// Octant representatives in increasing (|x|, x2) order.
    pub fn octant_points(&self) -> impl Iterator<Item = (LatticePoint, f64)> + '_ {
        let mut pts: Vec<_> = self.values.iter().map(|(&p, &v)| (p, v)).collect();
        pts.sort_by_key(|(p, _)| (p.norm1(), p.x2));
        pts.into_iter()
    }

    /// Every point of the disc, expanded from the octant.
    pub fn all_points(&self) -> Vec<LatticePoint> {
        let r = self.radius as i64;
        let mut out = Vec::new();
        for a in -r..=r {
            let rem = r - a.abs();
            for b in -rem..=rem {
                out.push(LatticePoint::new(a, b));
            }
        }
        out
    }
}

/// Builds the table with one truncation point, chosen for the worst case x = o:
/// every entry's absolute error is at most `rel_tol · G^{o,o}` plus rounding.
pub fn greens_table(kappa: KillingRate, radius: u32, rel_tol: f64) -> Result<GreensTable> {
    greens_table_with_ceiling(kappa, radius, rel_tol, DEFAULT_N_CEILING)
}

pub fn greens_table_with_ceiling(kappa: KillingRate, radius: u32, rel_tol: f64, ceiling: u64) -> Result<GreensTable> {
    if radius < 1 {
        return Err(invalid("radius", "must be >= 1"));
    }
    if !(rel_tol > 0.0) {
        return Err(invalid("rel_tol", format!("must be > 0, got {rel_tol}")));
    }
    let r = radius as i64;
    let mut octant = Vec::new();
    for k in 0..=r + 1 {
        for x2 in 0..=k / 2 {
            octant.push(LatticePoint::new(k - x2, x2));
        }
    }
    let mut coords: Vec<(u64, u64)> = vec![(0, 0)];
    for p in &octant {
        if let Some(ab) = half_diagonal(*p) {
            if !coords.contains(&ab) {
                coords.push(ab);
            }
        }
    }
    let what = format!("Green's table at kappa={}", kappa.value());
    let series = sum_even_series(kappa, &coords, ceiling, &what, |tail, p| tail <= rel_tol * p[0])?;
    let even_value = |p: LatticePoint| -> f64 {
        let ab = half_diagonal(p).expect("even point");
        series.sums[coords.iter().position(|&c| c == ab).expect("coords cover the disc")]
    };
    let beta = kappa.step_weight();
    let mut values = BTreeMap::new();
    let mut errors = BTreeMap::new();
    for &p in octant.iter().filter(|p| p.norm1() <= u64::from(radius)) {
        if p.parity() == 0 {
            let v = even_value(p);
            values.insert(p, v);
            errors.insert(p, series.tail_bound + ROUNDING_REL * v);
        } else {
            let v = beta * p.neighbors().iter().map(|&y| even_value(y)).sum::<f64>();
            values.insert(p, v);
            errors.insert(p, 4.0 * beta * series.tail_bound + ROUNDING_REL * v);
        }
    }
    Ok(GreensTable {
        kappa,
        radius,
        values,
        errors,
        n_trunc: series.n_trunc,
        tail_bound: series.tail_bound,
        g_normalization: beta,
    })
}

/// Σ_{m=0}^{N−1} (4+κ)^{-2m} L_{2m} for each requested N (any order).
pub fn return_partial_sums(kappa: KillingRate, ns: &[u64]) -> Vec<f64> {
    let top = ns.iter().copied().max().unwrap_or(0);
    let ln_q = kappa.ln_half_decay();
    let mut sorted: Vec<(usize, u64)> = ns.iter().copied().enumerate().collect();
    sorted.sort_by_key(|&(_, n)| n);
    let mut out = vec![0.0; ns.len()];
    let mut acc = CompensatedSum::new();
    let mut next = 0;
    for m in 0..=top {
        while next < sorted.len() && sorted[next].1 == m {
            out[sorted[next].0] = acc.value();
            next += 1;
        }
        acc.add(return_term(ln_q, m));
    }
    out
}

/// How a return Green's function value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesMethod {
    /// Truncated at the certified exponential tail.
    CertifiedTail,
    /// Finite sum plus a rigorous exponential-integral enclosure of the tail,
    /// used when the certified-tail route would exceed the term ceiling.
    IntegralTailEnclosure,
}

/// E1(x) = ∫_x^∞ e^{-t}/t dt for x > 0.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs x > 0");
    const EULER: f64 = 0.577_215_664_901_532_9;
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER - x.ln() - sum
    } else {
        // modified Lentz on the continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Rigorous enclosure of G^{o,o} from M explicit terms and
/// 1/√(π(m+½)) ≤ c(m) ≤ 1/√(πm) beyond them.
pub fn return_green_enclosure(kappa: KillingRate, explicit_terms: u64) -> (f64, f64) {
    let ln_q = kappa.ln_half_decay();
    let lambda = -ln_q;
    let mut acc = CompensatedSum::new();
    for m in 0..=explicit_terms {
        acc.add(return_term(ln_q, m));
    }
    let head = acc.value();
    let mf = explicit_terms as f64;
    let tail_hi = exp_integral_e1(lambda * mf) / std::f64::consts::PI;
    let tail_lo = (lambda / 2.0).exp() * exp_integral_e1(lambda * (mf + 1.5)) / std::f64::consts::PI;
    let round = ROUNDING_REL * head;
    (head + tail_lo - round, head + tail_hi + round)
}

/// μ(Γ_o) = log G^{o,o}, the loop measure through a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuGammaO {
    pub kappa: KillingRate,
    pub value: f64,
    /// Certified numerical enclosure of the value.
    pub enclosure: (f64, f64),
    /// [log(log κ⁻¹/π + 1 − 4/(3π)), log(log κ⁻¹/π + 2)], when κ < 1.
    pub analytic_enclosure: Option<(f64, f64)>,
    pub method: SeriesMethod,
}

impl MuGammaO {
    pub fn green_at_origin(&self) -> f64 {
        self.value.exp()
    }
}

/// Lower and upper analytic bounds on G^{o,o}; the upper one needs κ < 1.
pub fn return_green_analytic_bounds(kappa: KillingRate) -> (f64, Option<f64>) {
    let l = kappa.inverse().ln() / std::f64::consts::PI;
    let lower = l + 1.0 - 4.0 / (3.0 * std::f64::consts::PI);
    let upper = (kappa.value() < 1.0).then_some(l + 2.0);
    (lower, upper)
}

/// Explicit terms used by the enclosure route.
const ENCLOSURE_TERMS: u64 = 20_000_000;

pub fn mu_gamma_o(kappa: KillingRate, rel_tol: f64) -> Result<MuGammaO> {
    let (lower, upper) = return_green_analytic_bounds(kappa);
    let analytic_enclosure = match upper {
        Some(u) if lower > 0.0 => Some((lower.ln(), u.ln())),
        _ => None,
    };
    let projected = (4.0 / kappa.value() * (4.0 / rel_tol).ln()).max(0.5 / kappa.value());
    if projected < DEFAULT_N_CEILING as f64 {
        let g = greens_value(kappa, ORIGIN, rel_tol)?;
        return Ok(MuGammaO {
            kappa,
            value: g.value.ln(),
            enclosure: ((g.value - g.certified_error).ln(), (g.value + g.certified_error).ln()),
            analytic_enclosure,
            method: SeriesMethod::CertifiedTail,
        });
    }
    let (lo, hi) = return_green_enclosure(kappa, ENCLOSURE_TERMS);
    Ok(MuGammaO {
        kappa,
        value: (0.5 * (lo + hi)).ln(),
        enclosure: (lo.ln(), hi.ln()),
        analytic_enclosure,
        method: SeriesMethod::IntegralTailEnclosure,
    })
}

/// Total rooted loop measure per vertex, Σ_{n≥1} L_{2n}(4+κ)^{-2n}/(2n).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootedIntensity {
    pub value: f64,
    pub tail_bound: f64,
    pub n_trunc: u64,
}

/// Certified tail of the rooted intensity beyond half-length n.
pub fn certified_rooted_tail(kappa: KillingRate, n: u64) -> Option<f64> {
    certified_return_tail(kappa, n).map(|t| t / (2.0 * (n + 1) as f64))
}

pub fn rooted_intensity(kappa: KillingRate, rel_tol: f64) -> Result<RootedIntensity> {
    if !(rel_tol > 0.0) {
        return Err(invalid("rel_tol", format!("must be > 0, got {rel_tol}")));
    }
    let ln_q = kappa.ln_half_decay();
    let mut acc = CompensatedSum::new();
    let mut n = 1u64;
    loop {
        acc.add(return_term(ln_q, n) / (2 * n) as f64);
        if let Some(tail) = certified_rooted_tail(kappa, n) {
            if tail <= rel_tol * acc.value() {
                return Ok(RootedIntensity { value: acc.value(), tail_bound: tail, n_trunc: n });
            }
        }
        if n >= DEFAULT_N_CEILING {
            return Err(Error::TruncationCeiling { what: "rooted intensity".into(), ceiling: DEFAULT_N_CEILING });
        }
        n += 1;
    }
}

/// Rooted intensity summed to a fixed half-length.
pub fn rooted_intensity_to(kappa: KillingRate, n_trunc: u64) -> f64 {
    let ln_q = kappa.ln_half_decay();
    (1..=n_trunc).map(|n| return_term(ln_q, n) / (2 * n) as f64).collect::<CompensatedSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{binomial, biguint_over_pow2};
    use crate::walks::count_walks_diagonal;

    fn k(v: f64) -> KillingRate {
        KillingRate::new(v).unwrap()
    }

    /// Direct series from exact walk counts, for small κ⁻¹ only.
    fn oracle_green(kappa: f64, x: LatticePoint, n_terms: u64) -> f64 {
        let ln4b = (4.0 / (4.0 + kappa)).ln();
        (0..n_terms)
            .map(|n| biguint_over_pow2(&count_walks_diagonal(n, x), 2 * n) * (n as f64 * ln4b).exp())
            .sum()
    }

    #[test]
    fn rejects_nonpositive_kappa() {
        assert!(KillingRate::new(0.0).is_err());
        assert!(KillingRate::new(-1.0).is_err());
        assert!(KillingRate::new(f64::NAN).is_err());
        assert!(greens_value(k(1.0), ORIGIN, 0.0).is_err());
    }

    #[test]
    fn matches_exact_count_oracle() {
        for &(kappa, x) in &[(1.0, ORIGIN), (1.0, LatticePoint::new(1, 0)), (0.5, LatticePoint::new(2, 1)), (2.0, LatticePoint::new(3, 3))] {
            let g = greens_value(k(kappa), x, 1e-13).unwrap();
            let o = oracle_green(kappa, x, 600);
            assert!((g.value - o).abs() <= g.certified_error + 1e-14, "{kappa} {x}: {} vs {o}", g.value);
        }
    }

    #[test]
    fn first_term_and_enclosure_examples() {
        let g = greens_value(k(1.0), ORIGIN, 1e-10).unwrap();
        assert!(g.value > 1.0);
        let g = greens_value(k(0.01), ORIGIN, 1e-10).unwrap();
        assert!(g.value >= 2.041 && g.value <= 3.466, "{}", g.value);
        let o = greens_value(k(0.1), ORIGIN, 1e-10).unwrap();
        let x = greens_value(k(0.1), LatticePoint::new(1, 0), 1e-10).unwrap();
        assert!(x.value < o.value - 0.75);
    }

    #[test]
    fn tolerance_self_consistency() {
        for kappa in [0.5, 0.05, 0.005] {
            for x in [ORIGIN, LatticePoint::new(3, 0), LatticePoint::new(2, 2)] {
                let a = greens_value(k(kappa), x, 1e-6).unwrap();
                let b = greens_value(k(kappa), x, 1e-7).unwrap();
                assert!((a.value - b.value).abs() <= 1e-6 * a.value, "{kappa} {x}");
                assert!((a.value - b.value).abs() <= a.certified_error);
            }
        }
    }

    #[test]
    fn table_symmetry_monotonicity_and_medium_gap() {
        let t1 = greens_table(k(0.1), 10, 1e-10).unwrap();
        let t2 = greens_table(k(0.2), 10, 1e-10).unwrap();
        for x in t1.all_points() {
            let swapped = LatticePoint::new(x.x2, x.x1);
            assert_eq!(t1.get(x), t1.get(swapped));
            assert!(t2.value(x) < t1.value(x));
            if x != ORIGIN {
                assert!(t1.at_origin() > t1.value(x));
            }
        }
        let t = greens_table(k(0.01), 5, 1e-10).unwrap();
        let gap = t.at_origin() - t.value(LatticePoint::new(4, 0));
        assert!(gap >= 4f64.ln() / std::f64::consts::PI);
        // table entries agree with single-point evaluation
        let single = greens_value(k(0.1), LatticePoint::new(3, 2), 1e-12).unwrap();
        let tv = t1.value(LatticePoint::new(-2, 3));
        assert!((single.value - tv).abs() <= single.certified_error + t1.error_bound(LatticePoint::new(3, 2)).unwrap());
        assert!((t1.g(ORIGIN, ORIGIN).unwrap() - t1.at_origin() / 4.1).abs() < 1e-15);
    }

    #[test]
    fn decays_with_distance() {
        let t = greens_table(k(0.1), 32, 1e-10).unwrap();
        for r in [8i64, 12, 16, 24, 32] {
            assert!(t.value(LatticePoint::new(r, 0)) < t.value(LatticePoint::new(r / 2, 0)));
        }
    }

    #[test]
    fn mu_examples() {
        let g = greens_value(k(0.01), ORIGIN, 1e-12).unwrap();
        let mu = mu_gamma_o(k(0.01), 1e-12).unwrap();
        assert_eq!(mu.method, SeriesMethod::CertifiedTail);
        assert!((mu.value - g.value.ln()).abs() < 1e-14);
        assert!((mu.green_at_origin() - g.value).abs() <= 1e-14 * g.value);
        let (lo, hi) = mu.analytic_enclosure.unwrap();
        assert!(lo <= mu.value && mu.value <= hi);
        let l = 100f64.ln() / std::f64::consts::PI;
        assert!((lo - (l + 1.0 - 4.0 / (3.0 * std::f64::consts::PI)).ln()).abs() < 1e-15);
        assert!((hi - (l + 2.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn mu_at_extreme_kappa_uses_enclosure() {
        let kappa = k((-30.0f64).exp());
        let mu = mu_gamma_o(kappa, 1e-10).unwrap();
        assert_eq!(mu.method, SeriesMethod::IntegralTailEnclosure);
        assert!(mu.enclosure.1 - mu.enclosure.0 < 1e-6);
        assert!((mu.value - 30f64.ln()).abs() < 2.0);
        let (lo, hi) = mu.analytic_enclosure.unwrap();
        assert!(lo <= mu.enclosure.0 && mu.enclosure.1 <= hi);
    }

    #[test]
    fn enclosure_contains_certified_value() {
        for kappa in [0.3, 0.01] {
            let g = greens_value(k(kappa), ORIGIN, 1e-12).unwrap();
            let (lo, hi) = return_green_enclosure(k(kappa), 50);
            assert!(lo <= g.value && g.value <= hi, "{kappa}: {lo} {} {hi}", g.value);
        }
    }

    #[test]
    fn central_binomial_sandwich_used_by_enclosure() {
        for n in 1..3000u64 {
            let c = biguint_over_pow2(&binomial(2 * n, n), 2 * n);
            let nf = n as f64;
            assert!(c >= 1.0 / (std::f64::consts::PI * (nf + 0.5)).sqrt());
            assert!(c <= 1.0 / (std::f64::consts::PI * nf).sqrt());
        }
    }

    #[test]
    fn exp_integral_reference_values() {
        for (x, v) in [(0.5, 0.559_773_594_776_160_8), (1.0, 0.219_383_934_395_520_3), (2.0, 0.048_900_510_708_061_12), (10.0, 4.156_968_929_685_324e-6)] {
            assert!((exp_integral_e1(x) - v).abs() <= 1e-13 * v, "E1({x})");
        }
    }

    #[test]
    fn rooted_intensity_examples() {
        let a = rooted_intensity(k(0.5), 1e-10).unwrap();
        let b = rooted_intensity(k(0.1), 1e-10).unwrap();
        assert!(a.value > 0.0 && b.value > a.value);
        for kappa in [0.1, 1.0, 3.0] {
            let beta = 1.0 / (4.0 + kappa);
            assert!(rooted_intensity(k(kappa), 1e-10).unwrap().value >= 2.0 * beta * beta);
        }
        let doubled = rooted_intensity_to(k(0.1), 2 * b.n_trunc);
        assert!((doubled - b.value).abs() <= 1e-10 * b.value);
        assert!(doubled - b.value <= b.tail_bound);
    }

    #[test]
    fn partial_sums_match_direct_terms() {
        let kappa = k(0.01);
        let ps = return_partial_sums(kappa, &[1, 50, 2]);
        assert_eq!(ps[0], 1.0);
        let beta: f64 = 1.0 / 4.01;
        assert!((ps[2] - (1.0 + 4.0 * beta * beta)).abs() < 1e-15);
        let lower = 1.0 + 50f64.ln() / std::f64::consts::PI - 0.5 / std::f64::consts::PI - 1.0 / (3.0 * std::f64::consts::PI);
        assert!(ps[1] >= lower);
    }
}
