//! Finite target sets and their textual specification.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::LatticePoint;

pub const SET_SPEC_GRAMMAR: &str = "box:<n> | points:(x1,y1);(x2,y2);... | line:<k>x<sep>";

/// Nonempty set of distinct lattice points, kept in insertion order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSet {
    points: Vec<LatticePoint>,
}

impl TargetSet {
    pub fn new(points: Vec<LatticePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("target set", "must be nonempty"));
        }
        let mut seen = BTreeSet::new();
        for p in &points {
            if !seen.insert(*p) {
                return Err(invalid("target set", format!("duplicate point {p}")));
            }
        }
        Ok(Self { points })
    }

    pub fn single(p: LatticePoint) -> Self {
        Self { points: vec![p] }
    }

    /// The n×n box {0..n-1}².
    pub fn square(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(invalid("box side", "must be >= 1"));
        }
        let n = i64::from(n);
        Ok(Self { points: (0..n).flat_map(|y| (0..n).map(move |x| LatticePoint::new(x, y))).collect() })
    }

    /// k points (i·sep, 0), i = 0..k-1.
    pub fn line(k: u32, sep: u64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("line count", "must be >= 1"));
        }
        if sep == 0 && k > 1 {
            return Err(invalid("line separation", "must be >= 1"));
        }
        Ok(Self { points: (0..i64::from(k)).map(|i| LatticePoint::new(i * sep as i64, 0)).collect() })
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// (x_min, y_min, x_max, y_max).
    pub fn bounding_box(&self) -> (i64, i64, i64, i64) {
        let mut b = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for p in &self.points {
            b = (b.0.min(p.x1), b.1.min(p.x2), b.2.max(p.x1), b.3.max(p.x2));
        }
        b
    }

    /// Largest L1 distance between two points.
    pub fn l1_diameter(&self) -> u64 {
        let (mut smax, mut smin, mut dmax, mut dmin) = (i64::MIN, i64::MAX, i64::MIN, i64::MAX);
        for p in &self.points {
            let t = p.diagonal();
            smax = smax.max(t.s);
            smin = smin.min(t.s);
            dmax = dmax.max(t.d);
            dmin = dmin.min(t.d);
        }
        (smax - smin).max(dmax - dmin) as u64
    }

    /// Smallest L1 distance between distinct points; None for a single point.
    pub fn min_separation(&self) -> Option<u64> {
        let mut best: Option<u64> = None;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                let d = a.l1_distance(*b);
                best = Some(best.map_or(d, |m| m.min(d)));
            }
        }
        best
    }

    /// Whether the set is exactly an axis-aligned filled rectangle.
    pub fn as_rectangle(&self) -> Option<(i64, i64, i64, i64)> {
        let b = self.bounding_box();
        let area = (b.2 - b.0 + 1) as u128 * (b.3 - b.1 + 1) as u128;
        (area == self.points.len() as u128).then_some(b)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.points[i]).collect())
    }
}

/// Parsed `--set` argument.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetSpec {
    Square(u32),
    Points(Vec<LatticePoint>),
    Line { count: u32, separation: u64 },
}

impl SetSpec {
    pub fn build(&self) -> Result<TargetSet> {
        match self {
            SetSpec::Square(n) => TargetSet::square(*n),
            SetSpec::Points(p) => TargetSet::new(p.clone()),
            SetSpec::Line { count, separation } => TargetSet::line(*count, *separation),
        }
    }
}

fn spec_error(s: &str, why: &str) -> Error {
    invalid("set spec", format!("cannot parse `{s}` ({why}); expected {SET_SPEC_GRAMMAR}"))
}

impl FromStr for SetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (kind, body) = t.split_once(':').ok_or_else(|| spec_error(s, "missing `:`"))?;
        match kind.trim() {
            "box" => {
                let n: u32 = body.trim().parse().map_err(|_| spec_error(s, "box side is not a positive integer"))?;
                if n == 0 {
                    return Err(spec_error(s, "box side must be >= 1"));
                }
                Ok(SetSpec::Square(n))
            }
            "line" => {
                let (k, sep) = body.split_once('x').ok_or_else(|| spec_error(s, "line needs <k>x<sep>"))?;
                let count: u32 = k.trim().parse().map_err(|_| spec_error(s, "bad point count"))?;
                let separation: u64 = sep.trim().parse().map_err(|_| spec_error(s, "bad separation"))?;
                if count == 0 || (count > 1 && separation == 0) {
                    return Err(spec_error(s, "count must be >= 1 and separation >= 1"));
                }
                Ok(SetSpec::Line { count, separation })
            }
            "points" => {
                let mut pts = Vec::new();
                for item in body.split(';').map(str::trim).filter(|x| !x.is_empty()) {
                    let inner = item
                        .strip_prefix('(')
                        .and_then(|x| x.strip_suffix(')'))
                        .ok_or_else(|| spec_error(s, "points must be written (x,y)"))?;
                    let (a, b) = inner.split_once(',').ok_or_else(|| spec_error(s, "point needs two coordinates"))?;
                    let a: i64 = a.trim().parse().map_err(|_| spec_error(s, "bad coordinate"))?;
                    let b: i64 = b.trim().parse().map_err(|_| spec_error(s, "bad coordinate"))?;
                    pts.push(LatticePoint::new(a, b));
                }
                if pts.is_empty() {
                    return Err(spec_error(s, "no points"));
                }
                TargetSet::new(pts.clone()).map_err(|e| spec_error(s, &e.to_string()))?;
                Ok(SetSpec::Points(pts))
            }
            _ => Err(spec_error(s, "unknown set kind")),
        }
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::Square(n) => write!(f, "box:{n}"),
            SetSpec::Line { count, separation } => write!(f, "line:{count}x{separation}"),
            SetSpec::Points(p) => {
                f.write_str("points:")?;
                for (i, q) in p.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "({},{})", q.x1, q.x2)?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_each_form() {
        assert_eq!("box:4".parse::<SetSpec>().unwrap().build().unwrap().len(), 16);
        let l = "line:3x10".parse::<SetSpec>().unwrap().build().unwrap();
        assert_eq!(l.points()[2], LatticePoint::new(20, 0));
        let p = "points:(0,0);(1,1)".parse::<SetSpec>().unwrap().build().unwrap();
        assert_eq!(p.min_separation(), Some(2));
    }

    #[test]
    fn rejects_malformed_specs() {
        for s in ["", "box", "box:0", "box:-3", "circle:3", "points:", "points:(1,2", "points:(0,0);(0,0)", "line:3", "line:2x0"] {
            let e = s.parse::<SetSpec>().unwrap_err().to_string();
            assert!(e.contains("box:<n>"), "{s}: {e}");
        }
    }

    #[test]
    fn rectangle_and_diameter() {
        let b = TargetSet::square(5).unwrap();
        assert_eq!(b.as_rectangle(), Some((0, 0, 4, 4)));
        assert_eq!(b.l1_diameter(), 8);
        assert!(TargetSet::line(3, 2).unwrap().as_rectangle().is_none());
        assert!(TargetSet::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn display_round_trips(pts in proptest::collection::btree_set((-50i64..50, -50i64..50), 1..6)) {
            let spec = SetSpec::Points(pts.into_iter().map(|(a, b)| LatticePoint::new(a, b)).collect());
            prop_assert_eq!(spec.to_string().parse::<SetSpec>().unwrap(), spec);
        }

        #[test]
        fn diameter_matches_pairwise_max(pts in proptest::collection::btree_set((-20i64..20, -20i64..20), 1..12)) {
            let set = TargetSet::new(pts.into_iter().map(|(a, b)| LatticePoint::new(a, b)).collect()).unwrap();
            let brute = set.points().iter().flat_map(|a| set.points().iter().map(move |b| a.l1_distance(*b))).max().unwrap();
            prop_assert_eq!(set.l1_diameter(), brute);
        }
    }
}
