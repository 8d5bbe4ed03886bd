//! Numerical checks of the Green's function inequalities and of the
//! walk-count estimates they rest on. Each check reports both sides and a
//! three-state verdict; bounds whose hypotheses are out of reach are
//! evaluated but never asserted.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::greens::{greens_table, greens_value, return_partial_sums, KillingRate, ROUNDING_REL};
use crate::lattice::{LatticePoint, ORIGIN};
use crate::numerics::{binomial, biguint_over_pow2, ln_biguint, ln_factorial_exact};
use crate::verdict::{Direction, VerdictRecord};
use crate::walks::{count_walks_diagonal, count_walks_dp};

pub const SERIES_REL_TOL: f64 = 1e-10;

/// Farthest point at which the far-field half bound is evaluated.
const FAR_HALF_MAX_DISTANCE: f64 = 5000.0;

/// κ⁻¹ threshold of the far-field half bound.
pub const FAR_HALF_KAPPA_INV: f64 = 1.068_647_458_152_446_2e13; // e^30

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenBoundsReport {
    pub radius: u32,
    pub records: Vec<VerdictRecord>,
}

fn kappa_tag(k: KillingRate) -> String {
    format!("kappa={}", k.value())
}

/// Runs every Green's function bound on each κ of the grid, for points with
/// 1 ≤ |x| ≤ radius.
pub fn check_green_bounds(kappa_grid: &[KillingRate], radius: u32) -> Result<GreenBoundsReport> {
    if radius < 1 {
        return Err(invalid("radius", "must be >= 1"));
    }
    let short_walks = ShortWalkWeights::new(radius);
    let mut records = Vec::new();
    for &kappa in kappa_grid {
        records.extend(bounds_for_kappa(kappa, radius, &short_walks)?);
    }
    Ok(GreenBoundsReport { radius, records })
}

fn bounds_for_kappa(kappa: KillingRate, radius: u32, short_walks: &ShortWalkWeights) -> Result<Vec<VerdictRecord>> {
    let k = kappa.value();
    let kinv = kappa.inverse();
    let lk = kinv.ln();
    let tag = kappa_tag(kappa);
    let table = greens_table(kappa, radius.max(1), SERIES_REL_TOL)?;
    let g_oo = table.at_origin();
    let e_oo = table.error_bound(ORIGIN).expect("origin in table");
    let mut out = Vec::new();

    // partial sums from below
    let ns: Vec<u64> = [1u64, 10, 50, 100, 1000, (1.0 / k).ceil() as u64]
        .into_iter()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let partial = return_partial_sums(kappa, &ns);
    let (mut worst, mut worst_n) = (None::<VerdictRecord>, 0);
    for (&n, &p) in ns.iter().zip(&partial) {
        let nf = n as f64;
        let rhs = 1.0 + nf.ln() / PI - nf * k / PI - 1.0 / (3.0 * PI);
        let r = VerdictRecord::inequality("", "", p, ROUNDING_REL * p, Direction::AtLeast, rhs, true, "");
        if worst.as_ref().is_none_or(|w| r.margin < w.margin) {
            worst = Some(r);
            worst_n = n;
        }
    }
    let mut w = worst.expect("nonempty grid");
    w.check_id = "partial-sum-lower".into();
    w.anchor = "greens/partial-sum-lower-bound".into();
    w.detail = format!("{tag} worst N={worst_n} over {ns:?}");
    out.push(w);

    // return value from below
    out.push(VerdictRecord::inequality(
        "return-lower",
        "greens/return-lower-bound",
        g_oo,
        e_oo,
        Direction::AtLeast,
        lk / PI + 1.0 - 4.0 / (3.0 * PI),
        true,
        tag.clone(),
    ));

    // logarithmic tail bound, 0 < κ < 1 and Nκ < 1
    {
        let hyp = k < 1.0;
        let n = ((0.5 / k).floor() as u64).max(1);
        let nk = n as f64 * k;
        let hyp = hyp && nk < 1.0;
        let tail = g_oo - return_partial_sums(kappa, &[n + 1])[0];
        let rhs = (1.0 / nk).ln() / PI + 1.0 / (6.0 * PI * n as f64) + 4.0;
        out.push(VerdictRecord::inequality(
            "tail-log",
            "greens/return-tail-log-bound",
            tail,
            e_oo + ROUNDING_REL * g_oo,
            Direction::AtMost,
            rhs,
            hyp,
            format!("{tag} N={n}"),
        ));
    }

    // exponential tail bound, Nκ ≥ 1/2
    {
        let ns: Vec<u64> = [0.5, 1.0, 4.0].iter().map(|f| ((f / k).ceil() as u64).max(1)).collect();
        let heads = return_partial_sums(kappa, &ns.iter().map(|n| n + 1).collect::<Vec<_>>());
        let mut worst: Option<VerdictRecord> = None;
        for (&n, &h) in ns.iter().zip(&heads) {
            let tail = g_oo - h;
            let rhs = 4.0 * (-(n as f64) * k / 4.0).exp();
            let r = VerdictRecord::inequality(
                "tail-exp",
                "greens/return-tail-exponential-bound",
                tail,
                e_oo + ROUNDING_REL * g_oo,
                Direction::AtMost,
                rhs,
                n as f64 * k >= 0.5,
                format!("{tag} N={n}"),
            );
            if worst.as_ref().is_none_or(|w| r.margin < w.margin) {
                worst = Some(r);
            }
        }
        out.push(worst.expect("three truncation points"));
    }

    // return value from above, 0 < κ < 1
    out.push(VerdictRecord::inequality(
        "return-upper",
        "greens/return-upper-bound",
        g_oo,
        e_oo,
        Direction::AtMost,
        lk / PI + 2.0,
        k < 1.0,
        tag.clone(),
    ));

    // uniform gap to every other point
    let mut worst_gap: Option<(VerdictRecord, LatticePoint)> = None;
    let mut worst_log: Option<(VerdictRecord, LatticePoint)> = None;
    for (x, gx) in table.octant_points() {
        if x == ORIGIN {
            continue;
        }
        let err = e_oo + table.error_bound(x).expect("in table");
        let gap = g_oo - gx;
        let r = VerdictRecord::inequality("", "", gap, err, Direction::AtLeast, 0.75, true, "");
        if worst_gap.as_ref().is_none_or(|(w, _)| r.margin < w.margin) {
            worst_gap = Some((r, x));
        }
        let nx = x.norm1() as f64;
        if nx >= 4.0 && nx <= 2.0 * kinv && kinv >= 2.0 {
            let r = VerdictRecord::inequality("", "", gap, err, Direction::AtLeast, nx.ln() / PI, true, "");
            if worst_log.as_ref().is_none_or(|(w, _)| r.margin < w.margin) {
                worst_log = Some((r, x));
            }
        }
    }
    let (mut r, x) = worst_gap.expect("radius >= 1");
    r.check_id = "uniform-gap".into();
    r.anchor = "greens/uniform-gap".into();
    r.detail = format!("{tag} worst x={x} over 1<=|x|<={radius}");
    out.push(r);
    match worst_log {
        Some((mut r, x)) => {
            r.check_id = "log-gap".into();
            r.anchor = "greens/logarithmic-gap".into();
            r.detail = format!("{tag} worst x={x} over 4<=|x|<=min({radius},2/kappa)");
            out.push(r);
        }
        None => out.push(VerdictRecord::inequality(
            "log-gap",
            "greens/logarithmic-gap",
            f64::NAN,
            0.0,
            Direction::AtLeast,
            f64::NAN,
            false,
            format!("{tag} no point with 4<=|x|<=min({radius},2/kappa) and 1/kappa>=2"),
        )),
    }

    // far-field half bound: asymptotic hypothesis, evaluated for the trend
    {
        let d = (2.0 * kinv).ceil();
        let hyp = kinv >= FAR_HALF_KAPPA_INV;
        if d <= FAR_HALF_MAX_DISTANCE {
            let x = LatticePoint::new(d as i64, 0);
            let gx = match table.get(x) {
                Some(v) => (v, table.error_bound(x).expect("in table")),
                None => {
                    let v = greens_value(kappa, x, SERIES_REL_TOL)?;
                    (v.value, v.certified_error)
                }
            };
            out.push(VerdictRecord::inequality(
                "far-half",
                "greens/far-field-half-bound",
                gx.0,
                gx.1,
                Direction::AtMost,
                g_oo / 2.0,
                hyp,
                format!("{tag} x={x}; requires 1/kappa >= e^30"),
            ));
        } else {
            out.push(VerdictRecord::inequality(
                "far-half",
                "greens/far-field-half-bound",
                f64::NAN,
                0.0,
                Direction::AtMost,
                g_oo / 2.0,
                hyp,
                format!("{tag} |x|={d} beyond evaluation range; requires 1/kappa >= e^30"),
            ));
        }
    }

    // short-walk contribution, stated for |x| large enough
    {
        let four_beta = 4.0 * kappa.step_weight();
        let mut worst: Option<(VerdictRecord, LatticePoint)> = None;
        for (x, weights) in &short_walks.points {
            let lhs: f64 = weights.iter().map(|&(n, w)| w * four_beta.powi(n as i32)).sum();
            let rhs = 3.0 / x.norm1() as f64;
            let r = VerdictRecord::inequality("", "", lhs, ROUNDING_REL * lhs, Direction::AtMost, rhs, false, "");
            if worst.as_ref().is_none_or(|(w, _)| r.margin < w.margin) {
                worst = Some((r, *x));
            }
        }
        if let Some((mut r, x)) = worst {
            r.check_id = "short-walk-sum".into();
            r.anchor = "greens/short-walk-contribution".into();
            r.detail = format!("{tag} worst x={x} over 3<=|x|<={radius}; stated only for |x| large enough");
            out.push(r);
        }
    }

    // diagonal neighbour from below
    let x11 = LatticePoint::new(1, 1);
    if let (Some(v), Some(e)) = (table.get(x11), table.error_bound(x11)) {
        out.push(VerdictRecord::inequality(
            "diagonal-neighbour-lower",
            "greens/diagonal-neighbour-lower-bound",
            v,
            e,
            Direction::AtLeast,
            lk / PI - 1.0,
            true,
            tag,
        ));
    }
    Ok(out)
}

/// (n, W_n^{o,x} 4^{-n}) for |x| ≤ n ≤ ⌊|x|²/(2 log|x|)⌋, per octant point.
struct ShortWalkWeights {
    points: Vec<(LatticePoint, Vec<(u64, f64)>)>,
}

impl ShortWalkWeights {
    fn new(radius: u32) -> Self {
        let mut points = Vec::new();
        for k in 3..=i64::from(radius) {
            let kf = k as f64;
            let top = (kf * kf / (2.0 * kf.ln())).floor() as u64;
            for x2 in 0..=k / 2 {
                let x = LatticePoint::new(k - x2, x2);
                let w = (k as u64..=top)
                    .step_by(2)
                    .map(|n| (n, biguint_over_pow2(&count_walks_diagonal(n, x), 2 * n)))
                    .collect();
                points.push((x, w));
            }
        }
        Self { points }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub n_max: u32,
    pub records: Vec<VerdictRecord>,
    /// Smallest C with P(S_n=x) ≤ (2/n)e^{-|x|²/(2n)} + C/(n|x|²) over 3 ≤ |x| ≤ n ≤ n_max.
    pub lclt_constant: f64,
    pub lclt_argmax: Option<(u32, LatticePoint)>,
}

/// Stirling bounds, the derived central binomial sandwich, and the minimal
/// local limit constant over the exact walk table.
pub fn verify_appendix_bounds(n_max: u32) -> Result<AppendixReport> {
    if n_max < 1 {
        return Err(invalid("n_max", "must be >= 1"));
    }
    if n_max > 400 {
        return Err(invalid("n_max", "exact table limited to n_max <= 400"));
    }
    let mut records = Vec::new();
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    let mut worst = [None::<(VerdictRecord, u64)>, None, None, None];
    let mut keep = |slot: usize, r: VerdictRecord, n: u64| {
        if worst[slot].as_ref().is_none_or(|(w, _)| r.margin < w.margin) {
            worst[slot] = Some((r, n));
        }
    };
    for n in 1..=u64::from(n_max) {
        let nf = n as f64;
        let ln_fact = ln_factorial_exact(n);
        let base = half_ln_2pi + (nf + 0.5) * nf.ln() - nf;
        let err = 4.0 * f64::EPSILON * ln_fact.abs().max(1.0);
        keep(0, VerdictRecord::inequality("", "", ln_fact, err, Direction::AtLeast, base, true, ""), n);
        keep(1, VerdictRecord::inequality("", "", ln_fact, err, Direction::AtMost, base + 1.0 / (12.0 * nf), true, ""), n);
        let ln_c = ln_biguint(&binomial(2 * n, n));
        let lead = 2.0 * nf * std::f64::consts::LN_2 - 0.5 * (PI * nf).ln();
        let err = 4.0 * f64::EPSILON * ln_c.abs().max(1.0);
        keep(2, VerdictRecord::inequality("", "", ln_c, err, Direction::AtLeast, lead - 1.0 / (6.0 * nf), true, ""), n);
        keep(3, VerdictRecord::inequality("", "", ln_c, err, Direction::AtMost, lead + 1.0 / (24.0 * nf), true, ""), n);
    }
    let names = [
        ("stirling-lower", "appendix/stirling-lower"),
        ("stirling-upper", "appendix/stirling-upper"),
        ("central-binomial-lower", "appendix/central-binomial-lower"),
        ("central-binomial-upper", "appendix/central-binomial-upper"),
    ];
    for (slot, (id, anchor)) in worst.into_iter().zip(names) {
        let (mut r, n) = slot.expect("n_max >= 1");
        r.check_id = id.into();
        r.anchor = anchor.into();
        r.detail = format!("log scale, worst n={n} over 1<=n<={n_max}");
        records.push(r);
    }

    let (c, arg) = lclt_minimal_constant(n_max)?;
    records.push(VerdictRecord::reported(
        "lclt-constant",
        "appendix/local-limit-constant",
        c,
        f64::NAN,
        match arg {
            Some((n, x)) => format!("minimal C over 3<=|x|<=n<={n_max}, attained at n={n} x={x}"),
            None => format!("minimal C over 3<=|x|<=n<={n_max} is 0: Gaussian term alone dominates"),
        },
    ));
    Ok(AppendixReport { n_max, records, lclt_constant: c, lclt_argmax: arg })
}

/// max(0, sup n|x|²(P(S_n=x) − (2/n)e^{-|x|²/(2n)})) with |x| the L1 norm.
pub fn lclt_minimal_constant(n_max: u32) -> Result<(f64, Option<(u32, LatticePoint)>)> {
    let table = count_walks_dp(n_max, n_max)?;
    let mut best = 0.0f64;
    let mut arg = None;
    for n in 3..=n_max {
        let nf = f64::from(n);
        for x in table.support(n) {
            let r = x.norm1() as f64;
            if r < 3.0 {
                continue;
            }
            let p = biguint_over_pow2(table.count_ref(n, x).expect("in support"), 2 * u64::from(n));
            let excess = nf * r * r * (p - 2.0 / nf * (-r * r / (2.0 * nf)).exp());
            if excess > best {
                best = excess;
                arg = Some((n, x));
            }
        }
    }
    Ok((best, arg))
}
