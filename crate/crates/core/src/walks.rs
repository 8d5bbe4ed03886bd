//! Exact counting of nearest-neighbour walks on Z².
//!
//! Three independent routes to W_n^{o,x}, the number of n-step walks from the
//! origin to x:
//!
//! * explicit enumeration of step sequences ([`count_walks_bruteforce`]),
//! * the layer-by-layer recursion W_{n+1}^{o,x} = Σ_{y~x} W_n^{o,y}
//!   ([`count_walks_dp`]), stored on one octant,
//! * the product formula in diagonal coordinates ([`count_walks_diagonal`]).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{invalid, Error, Result};
use crate::lattice::{Direction, LatticePoint, ORIGIN};
use crate::numerics::binomial;
use crate::verdict::{Direction as Side, VerdictRecord};

/// Enumeration budget: 4^14 ≈ 2.7e8 sequences.
pub const BRUTEFORCE_MAX_N: u32 = 14;

/// Number of n-step walks from o to x by explicit enumeration of step
/// sequences. Branches that can no longer reach x are pruned.
pub fn count_walks_bruteforce(n: u32, x: LatticePoint) -> Result<u64> {
    if n > BRUTEFORCE_MAX_N {
        return Err(invalid("n", format!("{n} exceeds the enumeration budget {BRUTEFORCE_MAX_N}")));
    }
    fn go(pos: LatticePoint, left: u32, target: LatticePoint) -> u64 {
        if left == 0 {
            return u64::from(pos == target);
        }
        let mut total = 0;
        for dir in Direction::ALL {
            let next = pos.step(dir);
            if next.l1_distance(target) <= u64::from(left - 1) {
                total += go(next, left - 1, target);
            }
        }
        total
    }
    if x.norm1() > u64::from(n) || !(u64::from(n) - x.norm1()).is_multiple_of(2) {
        return Ok(0);
    }
    Ok(go(ORIGIN, n, x))
}

/// Endpoint histogram of all 4^n step sequences (no pruning).
pub fn bruteforce_histogram(n: u32) -> Result<BTreeMap<LatticePoint, u64>> {
    if n > BRUTEFORCE_MAX_N {
        return Err(invalid("n", format!("{n} exceeds the enumeration budget {BRUTEFORCE_MAX_N}")));
    }
    fn go(pos: LatticePoint, left: u32, out: &mut BTreeMap<LatticePoint, u64>) {
        if left == 0 {
            *out.entry(pos).or_default() += 1;
            return;
        }
        for dir in Direction::ALL {
            go(pos.step(dir), left - 1, out);
        }
    }
    let mut out = BTreeMap::new();
    go(ORIGIN, n, &mut out);
    Ok(out)
}

/// L_{2n} = C(2n, n)², the number of closed walks of length 2n at a vertex.
pub fn count_loops_closed_form(n: u64) -> BigUint {
    let c = binomial(2 * n, n);
    &c * &c
}

/// W_n^{o,x} via the diagonal coordinates.
///
/// For even n = 2m and s, d even: C(2m, m + s/2) · C(2m, m + d/2). Odd n sums
/// the even-length counts over the neighbours of x.
pub fn count_walks_diagonal(n: u64, x: LatticePoint) -> BigUint {
    if n % 2 == 1 {
        return x.neighbors().iter().map(|&y| count_walks_diagonal(n - 1, y)).sum();
    }
    let t = x.diagonal();
    if t.s % 2 != 0 {
        return BigUint::zero();
    }
    let m = (n / 2) as i64;
    let (a, b) = (t.s / 2, t.d / 2);
    if a.abs() > m || b.abs() > m {
        return BigUint::zero();
    }
    binomial(n, (m + a) as u64) * binomial(n, (m + b) as u64)
}

/// Index into one octant {0 ≤ x2 ≤ x1, x1 + x2 ≤ r}.
fn octant_index(p: LatticePoint) -> usize {
    // rows by |x| = k hold (k/2 + 1) cells; cumulative count before row k
    let c = p.canonical();
    let k = (c.x1 + c.x2) as usize;
    let before = row_offset(k);
    before + c.x2 as usize
}

fn row_offset(k: usize) -> usize {
    // Σ_{j<k} (j/2 + 1)
    let half = k / 2;
    // pairs of rows (2i, 2i+1) contribute 2(i+1)
    let pairs = half * (half + 1);
    pairs + if k % 2 == 1 { half + 1 } else { 0 }
}

fn octant_len(radius: usize) -> usize {
    row_offset(radius + 1)
}

/// Exact walk counts W_n^{o,x} for 0 ≤ n ≤ n_max and |x| ≤ radius, stored on
/// one octant and only for cells with n ≡ |x| (mod 2) and |x| ≤ n.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkCountTable {
    n_max: u32,
    radius: u32,
    /// layers[n][octant_index(x)]; cells with |x| > min(n, radius) absent.
    layers: Vec<Vec<BigUint>>,
}

const CACHE_MAGIC: &[u8; 8] = b"LSWCT\0\0\0";
const CACHE_VERSION: u32 = 1;

impl WalkCountTable {
    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// W_n^{o,x}; zero outside the support. Panics when n or |x| exceed the table.
    pub fn count(&self, n: u32, x: LatticePoint) -> BigUint {
        assert!(n <= self.n_max, "n = {n} beyond table n_max = {}", self.n_max);
        let r = x.norm1();
        assert!(r <= u64::from(self.radius), "|x| = {r} beyond table radius {}", self.radius);
        if r > u64::from(n) || !(u64::from(n) - r).is_multiple_of(2) {
            return BigUint::zero();
        }
        self.layers[n as usize][octant_index(x)].clone()
    }

    pub fn count_ref(&self, n: u32, x: LatticePoint) -> Option<&BigUint> {
        let r = x.norm1();
        if n > self.n_max || r > u64::from(self.radius.min(n)) || !(u64::from(n) - r).is_multiple_of(2) {
            return None;
        }
        Some(&self.layers[n as usize][octant_index(x)])
    }

    /// Octant representatives x with |x| ≤ min(n, radius) and matching parity.
    pub fn support(&self, n: u32) -> impl Iterator<Item = LatticePoint> + '_ {
        let top = n.min(self.radius) as i64;
        (0..=top).flat_map(move |k| {
            (0..=k / 2).filter_map(move |x2| {
                let p = LatticePoint::new(k - x2, x2);
                ((i64::from(n) - k) % 2 == 0).then_some(p)
            })
        })
    }

    /// Number of lattice points in the symmetry orbit of an octant point.
    pub fn orbit_size(p: LatticePoint) -> u64 {
        let c = p.canonical();
        match (c.x1, c.x2) {
            (0, 0) => 1,
            (_, 0) => 4,
            (a, b) if a == b => 4,
            _ => 8,
        }
    }

    /// Writes the table to a versioned binary cache file keyed by (n_max, radius).
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Cache(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(CACHE_MAGIC).map_err(io)?;
        w.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&self.n_max.to_le_bytes()).map_err(io)?;
        w.write_all(&self.radius.to_le_bytes()).map_err(io)?;
        for layer in &self.layers {
            w.write_all(&(layer.len() as u64).to_le_bytes()).map_err(io)?;
            for v in layer {
                let bytes = v.to_bytes_le();
                w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(io)?;
                w.write_all(&bytes).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    /// Reads a cache file, checking magic, version and the (n_max, radius) key.
    pub fn read_cache(path: &Path, n_max: u32, radius: u32) -> Result<Self> {
        let io = |e: std::io::Error| Error::Cache(format!("{}: {e}", path.display()));
        let mut r = BufReader::new(File::open(path).map_err(io)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Cache(format!("{}: bad magic", path.display())));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut BufReader<File>| -> Result<u32> {
            r.read_exact(&mut word).map_err(io)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = read_u32(&mut r)?;
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported cache version {version}")));
        }
        let (file_n, file_r) = (read_u32(&mut r)?, read_u32(&mut r)?);
        if (file_n, file_r) != (n_max, radius) {
            return Err(Error::Cache(format!(
                "cache keyed by (n_max={file_n}, radius={file_r}), requested ({n_max}, {radius})"
            )));
        }
        let mut layers = Vec::with_capacity(n_max as usize + 1);
        for _ in 0..=n_max {
            let mut len = [0u8; 8];
            r.read_exact(&mut len).map_err(io)?;
            let len = u64::from_le_bytes(len) as usize;
            let mut layer = Vec::with_capacity(len);
            for _ in 0..len {
                let mut blen = [0u8; 4];
                r.read_exact(&mut blen).map_err(io)?;
                let mut buf = vec![0u8; u32::from_le_bytes(blen) as usize];
                r.read_exact(&mut buf).map_err(io)?;
                layer.push(BigUint::from_bytes_le(&buf));
            }
            layers.push(layer);
        }
        Ok(Self { n_max, radius, layers })
    }
}

/// Builds the exact table by the neighbour recursion on one octant.
///
/// Requires radius ≥ n_max, which makes every reported count exact: a walk
/// of length n ≤ n_max never leaves |x| ≤ n.
pub fn count_walks_dp(n_max: u32, radius: u32) -> Result<WalkCountTable> {
    if radius < n_max {
        return Err(invalid("radius", format!("radius {radius} < n_max {n_max}")));
    }
    let mut layers: Vec<Vec<BigUint>> = Vec::with_capacity(n_max as usize + 1);
    let mut first = vec![BigUint::zero(); octant_len(0)];
    first[0] = BigUint::from(1u32);
    layers.push(first);
    for n in 1..=n_max {
        let top = n.min(radius) as i64;
        let prev = &layers[(n - 1) as usize];
        let prev_top = (n - 1).min(radius) as u64;
        let mut next = vec![BigUint::zero(); octant_len(top as usize)];
        for k in 0..=top {
            if (i64::from(n) - k) % 2 != 0 {
                continue;
            }
            for x2 in 0..=k / 2 {
                let p = LatticePoint::new(k - x2, x2);
                let mut acc = BigUint::zero();
                for y in p.neighbors() {
                    let r = y.norm1();
                    if r <= prev_top {
                        acc += &prev[octant_index(y)];
                    }
                }
                next[octant_index(p)] = acc;
            }
        }
        layers.push(next);
    }
    Ok(WalkCountTable { n_max, radius, layers })
}

/// One (n, x) pair where the even-length count at x exceeds the return count.
#[derive(Clone, Debug, PartialEq)]
pub struct DominanceViolation {
    pub half_length: u32,
    pub x: LatticePoint,
    pub count_x: BigUint,
    pub count_o: BigUint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominanceReport {
    pub n_max: u32,
    pub radius: u32,
    pub pairs_checked: u64,
    pub violations: Vec<DominanceViolation>,
}

/// Checks W_{2n}^{o,x} ≤ W_{2n}^{o,o} for every 0 ≤ n ≤ n_max and every x with
/// even |x| ≤ radius.
pub fn verify_dominance(n_max: u32, radius: u32) -> Result<DominanceReport> {
    let table = count_walks_dp(2 * n_max, radius.max(2 * n_max))?;
    let mut violations = Vec::new();
    let mut pairs_checked = 0;
    for n in 0..=n_max {
        let len = 2 * n;
        let at_o = table.count(len, ORIGIN);
        for p in table.support(len) {
            if p.norm1() > u64::from(radius) {
                continue;
            }
            pairs_checked += WalkCountTable::orbit_size(p);
            let at_x = table.count(len, p);
            if at_x > at_o {
                violations.push(DominanceViolation { half_length: n, x: p, count_x: at_x, count_o: at_o.clone() });
            }
        }
    }
    Ok(DominanceReport { n_max, radius, pairs_checked, violations })
}

/// Agreement of the three counting routes.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkOracleReport {
    pub n_enumerated: u32,
    pub n_closed_form: u32,
    pub cells_checked: u64,
    /// (n, x) where enumeration, recursion and the product formula disagree.
    pub mismatches: Vec<(u32, LatticePoint)>,
    /// Half-lengths m where W_{2m}^{o,o} from recursion or product formula differs from C(2m, m)².
    pub return_mismatches: Vec<u32>,
    pub records: Vec<VerdictRecord>,
}

/// Compares all three routes for n ≤ n_enumerated and |x| ≤ n, and the return
/// counts against C(2m, m)² for m ≤ n_closed_form.
pub fn verify_walk_counts(n_enumerated: u32, n_closed_form: u32) -> Result<WalkOracleReport> {
    let table = count_walks_dp(n_enumerated, n_enumerated)?;
    let mut mismatches = Vec::new();
    let mut cells_checked = 0;
    for n in 0..=n_enumerated {
        let r = i64::from(n);
        for x1 in -r..=r {
            let span = r - x1.abs();
            for x2 in -span..=span {
                let x = LatticePoint::new(x1, x2);
                let brute = BigUint::from(count_walks_bruteforce(n, x)?);
                cells_checked += 1;
                if brute != table.count(n, x) || brute != count_walks_diagonal(u64::from(n), x) {
                    mismatches.push((n, x));
                }
            }
        }
    }
    let returns = count_walks_dp(2 * n_closed_form, 2 * n_closed_form)?;
    let return_mismatches: Vec<u32> = (0..=n_closed_form)
        .filter(|&m| {
            let closed = count_loops_closed_form(u64::from(m));
            returns.count(2 * m, ORIGIN) != closed || count_walks_diagonal(2 * u64::from(m), ORIGIN) != closed
        })
        .collect();
    let records = vec![
        VerdictRecord::inequality(
            "walk-count-agreement",
            "walks/exact-counts",
            mismatches.len() as f64,
            0.0,
            Side::AtMost,
            0.0,
            true,
            format!("n<={n_enumerated}, |x|<=n, {cells_checked} cells"),
        ),
        VerdictRecord::inequality(
            "return-count-closed-form",
            "walks/return-count",
            return_mismatches.len() as f64,
            0.0,
            Side::AtMost,
            0.0,
            true,
            format!("W_2m(o,o) = C(2m,m)^2 for m<={n_closed_form}"),
        ),
    ];
    Ok(WalkOracleReport { n_enumerated, n_closed_form, cells_checked, mismatches, return_mismatches, records })
}

/// Verdict for a dominance run.
pub fn dominance_record(report: &DominanceReport) -> VerdictRecord {
    VerdictRecord::inequality(
        "even-count-dominance",
        "walks/return-dominance",
        report.violations.len() as f64,
        0.0,
        Side::AtMost,
        0.0,
        true,
        format!("n<={}, even |x|<={}, {} pairs", report.n_max, report.radius, report.pairs_checked),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn bruteforce_examples() {
        assert_eq!(count_walks_bruteforce(2, ORIGIN).unwrap(), 4);
        assert_eq!(count_walks_bruteforce(4, ORIGIN).unwrap(), 36);
        assert_eq!(count_walks_bruteforce(2, LatticePoint::new(1, 1)).unwrap(), 2);
        assert_eq!(count_walks_bruteforce(3, ORIGIN).unwrap(), 0);
        assert!(count_walks_bruteforce(15, ORIGIN).is_err());
    }

    #[test]
    fn octant_indexing_is_dense_and_injective() {
        let r = 9usize;
        let mut seen = vec![false; octant_len(r)];
        for k in 0..=r as i64 {
            for x2 in 0..=k / 2 {
                let idx = octant_index(LatticePoint::new(k - x2, x2));
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn dp_examples() {
        let t6 = count_walks_dp(6, 6).unwrap();
        assert_eq!(t6.count(6, ORIGIN), big(400));
        let t4 = count_walks_dp(4, 4).unwrap();
        // frozen from the brute-force oracle
        let oracle = count_walks_bruteforce(4, LatticePoint::new(2, 0)).unwrap();
        assert_eq!(oracle, 16);
        assert_eq!(t4.count(4, LatticePoint::new(2, 0)), big(16));
        let t5 = count_walks_dp(5, 5).unwrap();
        let x = LatticePoint::new(1, 0);
        let recursed: BigUint = x.neighbors().iter().map(|&y| t5.count(4, y)).sum();
        assert_eq!(t5.count(5, x), recursed);
        assert!(count_walks_dp(6, 5).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(count_loops_closed_form(1), big(4));
        assert_eq!(count_loops_closed_form(2), big(36));
        assert_eq!(count_loops_closed_form(10), big(34_134_779_536));
        let t = count_walks_dp(20, 20).unwrap();
        assert_eq!(t.count(20, ORIGIN), big(34_134_779_536));
    }

    #[test]
    fn diagonal_examples() {
        assert_eq!(count_walks_diagonal(2, LatticePoint::new(1, 1)), big(2));
        assert_eq!(count_walks_diagonal(4, LatticePoint::new(2, 0)), big(16));
        for n in 0..12 {
            assert_eq!(count_walks_diagonal(2 * n, ORIGIN), count_loops_closed_form(n));
        }
        assert_eq!(count_walks_diagonal(3, ORIGIN), big(0));
    }

    #[test]
    fn column_sums_are_powers_of_four() {
        let t = count_walks_dp(12, 12).unwrap();
        for n in 0..=12u32 {
            let total: BigUint =
                t.support(n).map(|p| t.count(n, p) * WalkCountTable::orbit_size(p)).sum();
            assert_eq!(total, BigUint::from(4u32).pow(n));
        }
    }

    #[test]
    fn dominance_example_and_spot_value() {
        let report = verify_dominance(10, 10).unwrap();
        assert!(report.violations.is_empty());
        let t = count_walks_dp(8, 8).unwrap();
        assert_eq!(t.count(8, ORIGIN), big(4900));
        assert!(t.count(8, LatticePoint::new(2, 2)) <= big(4900));
    }

    #[test]
    fn cache_roundtrip_and_key_check() {
        let dir = std::env::temp_dir().join(format!("lswct-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.bin");
        let t = count_walks_dp(9, 11).unwrap();
        t.write_cache(&path).unwrap();
        assert_eq!(WalkCountTable::read_cache(&path, 9, 11).unwrap(), t);
        assert!(matches!(WalkCountTable::read_cache(&path, 9, 12), Err(Error::Cache(_))));
        std::fs::remove_dir_all(&dir).ok();
    }

    proptest! {
        #[test]
        fn dp_symmetric_and_parity_consistent(n in 0u32..=12, a in -12i64..=12, b in -12i64..=12) {
            let t = count_walks_dp(12, 12).unwrap();
            let x = LatticePoint::new(a, b);
            prop_assume!(x.norm1() <= 12);
            let v = t.count(n, x);
            for y in x.symmetry_orbit() {
                prop_assert_eq!(&t.count(n, y), &v);
            }
            if u64::from(n) < x.norm1() || (u64::from(n) + x.norm1()) % 2 == 1 {
                prop_assert!(v.is_zero());
            }
            prop_assert_eq!(count_walks_diagonal(u64::from(n), x), v);
        }
    }
}
