//! Points, directions and the diagonal coordinate change on Z².

use std::fmt;

use serde::{Deserialize, Serialize};

/// A vertex of Z².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x1: i64,
    pub x2: i64,
}

pub const ORIGIN: LatticePoint = LatticePoint { x1: 0, x2: 0 };

impl LatticePoint {
    pub const fn new(x1: i64, x2: i64) -> Self {
        Self { x1, x2 }
    }

    /// L1 norm |x1| + |x2|.
    pub fn norm1(self) -> u64 {
        self.x1.unsigned_abs() + self.x2.unsigned_abs()
    }

    /// Euclidean norm squared.
    pub fn norm2_sq(self) -> u64 {
        (self.x1 * self.x1 + self.x2 * self.x2) as u64
    }

    /// Parity of |x|; walks of length n reach x only when n has this parity.
    pub fn parity(self) -> u64 {
        self.norm1() % 2
    }

    pub fn l1_distance(self, other: LatticePoint) -> u64 {
        (self - other).norm1()
    }

    pub fn step(self, dir: Direction) -> Self {
        let (dx, dy) = dir.delta();
        Self::new(self.x1 + dx, self.x2 + dy)
    }

    pub fn neighbors(self) -> [LatticePoint; 4] {
        Direction::ALL.map(|d| self.step(d))
    }

    /// Representative in the octant 0 ≤ x2 ≤ x1 under the 8 lattice symmetries.
    pub fn canonical(self) -> Self {
        let a = self.x1.abs();
        let b = self.x2.abs();
        if a >= b {
            Self::new(a, b)
        } else {
            Self::new(b, a)
        }
    }

    /// All images of the point under the dihedral group of the square (with repeats).
    pub fn symmetry_orbit(self) -> [LatticePoint; 8] {
        let (a, b) = (self.x1, self.x2);
        [
            Self::new(a, b),
            Self::new(-a, b),
            Self::new(a, -b),
            Self::new(-a, -b),
            Self::new(b, a),
            Self::new(-b, a),
            Self::new(b, -a),
            Self::new(-b, -a),
        ]
    }

    pub fn diagonal(self) -> DiagonalCoords {
        DiagonalCoords { s: self.x1 + self.x2, d: self.x2 - self.x1 }
    }
}

impl std::ops::Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl std::ops::Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x1, self.x2)
    }
}

/// Coordinates rotated by 45 degrees: s = x1 + x2, d = x2 − x1.
///
/// A nearest-neighbour step changes both s and d by ±1, independently, so a
/// walk on Z² is a pair of independent ±1 walks in (s, d).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DiagonalCoords {
    pub s: i64,
    pub d: i64,
}

impl DiagonalCoords {
    /// Inverse of [`LatticePoint::diagonal`]. `None` when s and d differ in parity.
    pub fn to_point(self) -> Option<LatticePoint> {
        if (self.s - self.d).rem_euclid(2) != 0 {
            return None;
        }
        Some(LatticePoint::new((self.s - self.d) / 2, (self.s + self.d) / 2))
    }
}

/// One of the four nearest-neighbour steps. The discriminant is the 2-bit code
/// used by packed step sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Direction {
    East = 0,
    North = 1,
    West = 2,
    South = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::East, Direction::North, Direction::West, Direction::South];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::East => (1, 0),
            Direction::North => (0, 1),
            Direction::West => (-1, 0),
            Direction::South => (0, -1),
        }
    }

    pub fn from_code(code: u8) -> Direction {
        Self::ALL[(code & 3) as usize]
    }

    /// Step with the given increments in the diagonal coordinates:
    /// E ↔ (+,−), N ↔ (+,+), W ↔ (−,+), S ↔ (−,−).
    pub fn from_diagonal(ds_positive: bool, dd_positive: bool) -> Direction {
        match (ds_positive, dd_positive) {
            (true, false) => Direction::East,
            (true, true) => Direction::North,
            (false, true) => Direction::West,
            (false, false) => Direction::South,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Direction::East => 'E',
            Direction::North => 'N',
            Direction::West => 'W',
            Direction::South => 'S',
        }
    }
}
