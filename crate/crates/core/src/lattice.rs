//! Geometry of the layered lattices `Z^2 x [h]`.
//!
//! Two horizontal connectivities are supported: nearest-neighbour (`q = 1`,
//! four horizontal neighbours) and king moves (`q = 2`, eight horizontal
//! neighbours). Layers are stacked along the vertical axis and connected only
//! straight up and down.
//!
//! Front geometry uses four horizontal directions indexed clockwise. For
//! `q = 2` they are the unit axis vectors; for `q = 1` they are the diagonal
//! half-vectors `(±1/2, ±1/2)`, stored as integer numerators over a common
//! denominator of 2 so that all arithmetic stays exact.

use std::cmp::Ordering;
use std::fmt;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of horizontal directions (fronts).
pub const DIRECTIONS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("lattice parameter q must be 1 or 2, got {0}")]
    BadQ(u8),
    #[error("layer count h must be at least 1")]
    ZeroHeight,
    #[error("cell {cell} has layer outside [1, {h}]")]
    LayerOutOfRange { cell: Cell, h: u32 },
}

/// A vertex `(x, y, k)` of the layered lattice.
///
/// Ordering is lexicographic by `(k, x, y)`; every set-valued operation in
/// the crate iterates in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 3]", into = "[i32; 3]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
    pub k: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32, k: i32) -> Self {
        Self { x, y, k }
    }

    /// The same horizontal position on another layer.
    pub const fn with_layer(self, k: i32) -> Self {
        Self { x: self.x, y: self.y, k }
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.k, self.x, self.y).cmp(&(other.k, other.x, other.y))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<[i32; 3]> for Cell {
    fn from([x, y, k]: [i32; 3]) -> Self {
        Self { x, y, k }
    }
}

impl From<Cell> for [i32; 3] {
    fn from(c: Cell) -> Self {
        [c.x, c.y, c.k]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.k)
    }
}

/// Which of the two layered lattices, and how many layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawKind", into = "RawKind")]
pub struct LatticeKind {
    q: u8,
    h: u32,
}

#[derive(Serialize, Deserialize)]
struct RawKind {
    q: u8,
    h: u32,
}

impl TryFrom<RawKind> for LatticeKind {
    type Error = LatticeError;

    fn try_from(raw: RawKind) -> Result<Self, Self::Error> {
        LatticeKind::new(raw.q, raw.h)
    }
}

impl From<LatticeKind> for RawKind {
    fn from(kind: LatticeKind) -> Self {
        RawKind { q: kind.q, h: kind.h }
    }
}

impl LatticeKind {
    pub fn new(q: u8, h: u32) -> Result<Self, LatticeError> {
        if q != 1 && q != 2 {
            return Err(LatticeError::BadQ(q));
        }
        if h == 0 {
            return Err(LatticeError::ZeroHeight);
        }
        Ok(Self { q, h })
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn q_i64(&self) -> i64 {
        i64::from(self.q)
    }

    pub fn h_i64(&self) -> i64 {
        i64::from(self.h)
    }

    pub fn contains_layer(&self, k: i32) -> bool {
        k >= 1 && i64::from(k) <= self.h_i64()
    }

    pub fn check(&self, c: Cell) -> Result<(), LatticeError> {
        if self.contains_layer(c.k) {
            Ok(())
        } else {
            Err(LatticeError::LayerOutOfRange { cell: c, h: self.h })
        }
    }

    /// Horizontal neighbour offsets, sorted by `(dx, dy)`.
    pub fn horizontal_offsets(&self) -> &'static [(i32, i32)] {
        const ORTHO: [(i32, i32); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const KING: [(i32, i32); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        if self.q == 1 {
            &ORTHO
        } else {
            &KING
        }
    }

    /// Calls `f` on every neighbour of `c`, in `(k, x, y)` order.
    ///
    /// Layer validity of `c` is not checked here; see [`neighbors`].
    #[inline]
    pub fn for_each_neighbor(&self, c: Cell, mut f: impl FnMut(Cell)) {
        if c.k > 1 {
            f(c.with_layer(c.k - 1));
        }
        for &(dx, dy) in self.horizontal_offsets() {
            f(Cell::new(c.x + dx, c.y + dy, c.k));
        }
        if i64::from(c.k) < self.h_i64() {
            f(c.with_layer(c.k + 1));
        }
    }

    /// Whether two distinct cells are adjacent.
    pub fn adjacent(&self, a: Cell, b: Cell) -> bool {
        if a.x == b.x && a.y == b.y {
            return (a.k - b.k).abs() == 1;
        }
        if a.k != b.k {
            return false;
        }
        let (dx, dy) = ((a.x - b.x).abs(), (a.y - b.y).abs());
        match self.q {
            1 => dx + dy == 1,
            _ => dx <= 1 && dy <= 1,
        }
    }

    /// The direction vector with index `i` (taken mod 4).
    pub fn direction(&self, i: usize) -> Direction {
        Direction::new(self.q, i)
    }
}

/// A horizontal direction, stored as an integer numerator pair over `den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    pub i: usize,
    pub num: (i32, i32),
    pub den: i32,
}

impl Direction {
    pub fn new(q: u8, i: usize) -> Self {
        let i = i % DIRECTIONS;
        if q == 1 {
            const DIAG: [(i32, i32); 4] = [(1, 1), (1, -1), (-1, -1), (-1, 1)];
            Self { i, num: DIAG[i], den: 2 }
        } else {
            const AXES: [(i32, i32); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];
            Self { i, num: AXES[i], den: 1 }
        }
    }

    /// Coordinate of a horizontal point along this direction.
    ///
    /// For a point `d θ_i + m θ_{i+1}` this returns `d` when applied with
    /// direction `i`, and `m` when applied with direction `i + 1`.
    #[inline]
    pub fn coordinate(&self, x: i32, y: i32) -> i32 {
        // Both the unit axes (q = 2) and the doubled diagonals (q = 1) give
        // back the exact coefficient with a plain dot product.
        self.num.0 * x + self.num.1 * y
    }
}

/// A finite segment `{d θ_i + m θ_{i+1} + k φ : m ∈ [-a, b)} ∩ Z^3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelSpec {
    pub i: usize,
    pub d: i64,
    pub a: i64,
    pub b: i64,
    pub k: i32,
}

impl LevelSpec {
    pub fn new(i: usize, d: i64, a: i64, b: i64, k: i32) -> Self {
        Self { i: i % DIRECTIONS, d, a, b, k }
    }

    /// Same segment on layer `k`.
    pub fn on_layer(self, k: i32) -> Self {
        Self { k, ..self }
    }

    /// The lattice point at offset `m`, if integral.
    pub fn point(&self, m: i64, kind: LatticeKind) -> Option<Cell> {
        point_on_line(kind, self.i, self.d, m, self.k)
    }
}

/// `d θ_i + m θ_{i+1} + k φ` if it is a lattice point.
pub fn point_on_line(kind: LatticeKind, i: usize, d: i64, m: i64, k: i32) -> Option<Cell> {
    let u = kind.direction(i);
    let v = kind.direction(i + 1);
    if u.den == 2 && (d - m).rem_euclid(2) != 0 {
        return None;
    }
    let den = i64::from(u.den);
    let x = (d * i64::from(u.num.0) + m * i64::from(v.num.0)) / den;
    let y = (d * i64::from(u.num.1) + m * i64::from(v.num.1)) / den;
    Some(Cell::new(x as i32, y as i32, k))
}

/// Open neighbourhood of `c`, ordered by `(k, x, y)`.
pub fn neighbors(c: Cell, kind: LatticeKind) -> Result<Vec<Cell>, LatticeError> {
    kind.check(c)?;
    let mut out = Vec::with_capacity(10);
    kind.for_each_neighbor(c, |n| out.push(n));
    Ok(out)
}

/// `U ∪ {v : v adjacent to some u ∈ U}`, ordered by `(k, x, y)`.
pub fn closed_neighborhood<'a, I>(cells: I, kind: LatticeKind) -> Result<Vec<Cell>, LatticeError>
where
    I: IntoIterator<Item = &'a Cell>,
{
    let mut set = FxHashSet::default();
    for &c in cells {
        kind.check(c)?;
        set.insert(c);
        kind.for_each_neighbor(c, |n| {
            set.insert(n);
        });
    }
    let mut out: Vec<Cell> = set.into_iter().collect();
    out.sort_unstable();
    Ok(out)
}

/// Cells of a level segment, in increasing `m`.
pub fn level_cells(spec: LevelSpec, kind: LatticeKind) -> Vec<Cell> {
    let mut out = Vec::with_capacity(spec.a.max(0) as usize + spec.b.max(0) as usize);
    for_each_level_cell(spec, kind, |c| out.push(c));
    out
}

/// Visits the cells of a level segment in increasing `m`.
#[inline]
pub fn for_each_level_cell(spec: LevelSpec, kind: LatticeKind, mut f: impl FnMut(Cell)) {
    let mut m = -spec.a;
    if kind.q() == 1 && (m - spec.d).rem_euclid(2) != 0 {
        m += 1;
    }
    let step = if kind.q() == 1 { 2 } else { 1 };
    while m < spec.b {
        if let Some(c) = spec.point(m, kind) {
            f(c);
        }
        m += step;
    }
}

/// O(1) membership test for a level segment.
#[inline]
pub fn level_contains(spec: LevelSpec, kind: LatticeKind, c: Cell) -> bool {
    if c.k != spec.k {
        return false;
    }
    let along = kind.direction(spec.i).coordinate(c.x, c.y);
    if i64::from(along) != spec.d {
        return false;
    }
    let m = i64::from(kind.direction(spec.i + 1).coordinate(c.x, c.y));
    -spec.a <= m && m < spec.b
}

/// Closed-form size of `L^k_{i,d}(a, b)`.
///
/// For `q = 2` this is `a + b`; for `q = 1` it is
/// `(a + b)/2 + (-1)^(a+d)/4 - (-1)^(b+d)/4`.
pub fn level_cardinality(a: i64, b: i64, d: i64, q: u8) -> i64 {
    if a + b <= 0 {
        return 0;
    }
    if q == 2 {
        return a + b;
    }
    let sign = |e: i64| if e.rem_euclid(2) == 0 { 1 } else { -1 };
    (2 * (a + b) + sign(a + d) - sign(b + d)) / 4
}
