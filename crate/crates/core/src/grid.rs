//! Finite dyadic grid on the unit cube `[0,1)^d`.
//!
//! Cells (the cubes of the finest level) are stored in Morton order, so every
//! dyadic cube owns one contiguous range of cells. Cubes themselves are
//! enumerated level-major and then lexicographically by index, which is the
//! canonical order used for every tie-break in the crate.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported depth per dimension (both give `2^14` cells).
pub const MAX_DEPTH_1D: u32 = 14;
pub const MAX_DEPTH_2D: u32 = 7;

/// A dyadic cube `2^-level ([0,1)^d + index)`.
///
/// Ordering is level-major, then lexicographic in the index tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    level: u32,
    index: [u32; 2],
    dim: u32,
}

impl Cube {
    pub fn new(dim: u32, level: u32, index: &[u32]) -> Result<Cube> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("dimension {dim} is not 1 or 2")));
        }
        if index.len() != dim as usize {
            return Err(Error::Config(format!(
                "cube index has {} coordinates, expected {dim}",
                index.len()
            )));
        }
        if level > 31 {
            return Err(Error::Config(format!("cube level {level} too large")));
        }
        let side = 1u64 << level;
        if index.iter().any(|&i| u64::from(i) >= side) {
            return Err(Error::Config(format!(
                "cube index {index:?} out of range for level {level}"
            )));
        }
        let mut idx = [0u32; 2];
        idx[..index.len()].copy_from_slice(index);
        Ok(Cube { level, index: idx, dim })
    }

    /// The root cube `[0,1)^d`.
    pub fn root(dim: u32) -> Cube {
        Cube { level: 0, index: [0, 0], dim }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> &[u32] {
        &self.index[..self.dim as usize]
    }

    /// Side length `2^-level`.
    pub fn side_length(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Lebesgue measure `2^(-d level)`.
    pub fn volume(&self) -> f64 {
        (-((self.dim * self.level) as f64)).exp2()
    }

    /// `log2` of the side length, i.e. `-level`.
    pub fn log2_side(&self) -> i64 {
        -i64::from(self.level)
    }

    pub fn parent(&self) -> Option<Cube> {
        self.ancestor(1).ok()
    }

    /// The `steps`-th dyadic ancestor; `steps = 0` is the cube itself.
    pub fn ancestor(&self, steps: u32) -> Result<Cube> {
        if steps > self.level {
            return Err(Error::AncestorBeyondRoot { level: self.level, steps });
        }
        Ok(Cube {
            level: self.level - steps,
            index: [self.index[0] >> steps, self.index[1] >> steps],
            dim: self.dim,
        })
    }

    /// The `2^d` children in canonical (lexicographic) order, without any
    /// depth check.
    pub fn children_unchecked(&self) -> Vec<Cube> {
        let level = self.level + 1;
        let [x, y] = self.index;
        match self.dim {
            1 => (0..2)
                .map(|a| Cube { level, index: [2 * x + a, 0], dim: 1 })
                .collect(),
            _ => (0..4)
                .map(|c| Cube { level, index: [2 * x + (c >> 1), 2 * y + (c & 1)], dim: 2 })
                .collect(),
        }
    }

    /// `true` if `other ⊆ self`.
    pub fn contains(&self, other: &Cube) -> bool {
        if other.dim != self.dim || other.level < self.level {
            return false;
        }
        let shift = other.level - self.level;
        (other.index[0] >> shift) == self.index[0] && (other.index[1] >> shift) == self.index[1]
    }

    pub fn intersects(&self, other: &Cube) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// Morton code of the cube among the cubes of its level. In this code the
    /// children of a cube with code `c` are `2^d c .. 2^d c + 2^d` in canonical
    /// order.
    pub fn morton(&self) -> usize {
        match self.dim {
            1 => self.index[0] as usize,
            _ => interleave(self.index[0], self.index[1]),
        }
    }

    /// Lexicographic rank among the cubes of the same level.
    pub fn lex_rank(&self) -> usize {
        match self.dim {
            1 => self.index[0] as usize,
            _ => ((self.index[0] as usize) << self.level) | self.index[1] as usize,
        }
    }

    fn from_morton(dim: u32, level: u32, code: usize) -> Cube {
        match dim {
            1 => Cube { level, index: [code as u32, 0], dim },
            _ => {
                let (x, y) = deinterleave(code);
                Cube { level, index: [x, y], dim }
            }
        }
    }

    /// Lower corner of the cube in `[0,1)^d`.
    pub fn corner(&self) -> [f64; 2] {
        let s = self.side_length();
        [self.index[0] as f64 * s, self.index[1] as f64 * s]
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "{}:{}", self.level, self.index[0]),
            _ => write!(f, "{}:{},{}", self.level, self.index[0], self.index[1]),
        }
    }
}

/// Parses `level:i` (d = 1) or `level:i,j` (d = 2).
impl FromStr for Cube {
    type Err = Error;

    fn from_str(s: &str) -> Result<Cube> {
        let bad = || Error::Config(format!("cannot parse cube '{s}', expected level:i or level:i,j"));
        let (level, rest) = s.split_once(':').ok_or_else(bad)?;
        let level: u32 = level.trim().parse().map_err(|_| bad())?;
        let index = rest
            .split(',')
            .map(|t| t.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        Cube::new(index.len() as u32, level, &index)
    }
}

#[derive(Serialize, Deserialize)]
struct CubeRepr {
    level: u32,
    index: Vec<u32>,
}

impl Serialize for Cube {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CubeRepr { level: self.level, index: self.index().to_vec() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Cube {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Cube, D::Error> {
        let repr = CubeRepr::deserialize(deserializer)?;
        Cube::new(repr.index.len() as u32, repr.level, &repr.index)
            .map_err(serde::de::Error::custom)
    }
}

fn interleave(x: u32, y: u32) -> usize {
    let mut code = 0usize;
    for bit in 0..16 {
        code |= (((x >> bit) & 1) as usize) << (2 * bit + 1);
        code |= (((y >> bit) & 1) as usize) << (2 * bit);
    }
    code
}

fn deinterleave(code: usize) -> (u32, u32) {
    let (mut x, mut y) = (0u32, 0u32);
    for bit in 0..16 {
        x |= (((code >> (2 * bit + 1)) & 1) as u32) << bit;
        y |= (((code >> (2 * bit)) & 1) as u32) << bit;
    }
    (x, y)
}

/// A dyadic grid of dimension `d ∈ {1,2}` and depth `L`, rooted at `[0,1)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    dim: u32,
    depth: u32,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    dim: u32,
    depth: u32,
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Grid> {
        Grid::new(r.dim, r.depth)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> GridRepr {
        GridRepr { dim: g.dim, depth: g.depth }
    }
}

impl Grid {
    pub fn new(dim: u32, depth: u32) -> Result<Grid> {
        let max = match dim {
            1 => MAX_DEPTH_1D,
            2 => MAX_DEPTH_2D,
            _ => return Err(Error::Config(format!("dimension {dim} is not 1 or 2"))),
        };
        if depth == 0 || depth > max {
            return Err(Error::Config(format!(
                "depth {depth} outside 1..={max} for dimension {dim}"
            )));
        }
        Ok(Grid { dim, depth })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn num_cells(&self) -> usize {
        1usize << (self.dim * self.depth)
    }

    pub fn num_cubes_at(&self, level: u32) -> usize {
        1usize << (self.dim * level)
    }

    pub fn num_cubes(&self) -> usize {
        (0..=self.depth).map(|k| self.num_cubes_at(k)).sum()
    }

    pub fn cell_volume(&self) -> f64 {
        (-((self.dim * self.depth) as f64)).exp2()
    }

    pub fn root(&self) -> Cube {
        Cube::root(self.dim)
    }

    /// `true` if the cube lives on this grid.
    pub fn contains(&self, q: &Cube) -> bool {
        q.dim == self.dim && q.level <= self.depth
    }

    pub fn check(&self, q: &Cube) -> Result<()> {
        if self.contains(q) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "cube {q} (d={}) not on grid d={}, L={}",
                q.dim, self.dim, self.depth
            )))
        }
    }

    /// Number of finest cells inside `q`.
    pub fn cells_in(&self, q: &Cube) -> usize {
        1usize << (self.dim * (self.depth - q.level))
    }

    /// The contiguous range of cell indices covered by `q`.
    pub fn cell_range(&self, q: &Cube) -> Range<usize> {
        let shift = self.dim * (self.depth - q.level);
        let start = q.morton() << shift;
        start..start + (1usize << shift)
    }

    /// The finest-level cube occupying a cell index.
    pub fn cell_cube(&self, cell: usize) -> Cube {
        Cube::from_morton(self.dim, self.depth, cell)
    }

    /// The cube of the given level with the given Morton code.
    pub fn cube_at(&self, level: u32, code: usize) -> Cube {
        Cube::from_morton(self.dim, level, code)
    }

    /// The `i`-th ancestor of `q`; errors when that would leave the root.
    pub fn ancestor(&self, q: &Cube, i: u32) -> Result<Cube> {
        self.check(q)?;
        q.ancestor(i)
    }

    /// The `2^d` children of `q` in canonical order.
    pub fn children(&self, q: &Cube) -> Result<Vec<Cube>> {
        self.check(q)?;
        if q.level >= self.depth {
            return Err(Error::NoChildren(q.level));
        }
        Ok(q.children_unchecked())
    }

    /// Position of `q` in the canonical (level-major, lexicographic) order.
    pub fn canonical_index(&self, q: &Cube) -> usize {
        let offset: usize = (0..q.level).map(|k| self.num_cubes_at(k)).sum();
        offset + q.lex_rank()
    }

    /// Cubes of one level in canonical order.
    pub fn cubes_at_level(&self, level: u32) -> impl Iterator<Item = Cube> + '_ {
        let dim = self.dim;
        let n = self.num_cubes_at(level);
        (0..n).map(move |rank| match dim {
            1 => Cube { level, index: [rank as u32, 0], dim },
            _ => Cube {
                level,
                index: [(rank >> level) as u32, (rank & ((1 << level) - 1)) as u32],
                dim,
            },
        })
    }

    /// Every cube of the grid in canonical order.
    pub fn cubes(&self) -> impl Iterator<Item = Cube> + '_ {
        (0..=self.depth).flat_map(move |k| self.cubes_at_level(k))
    }

    /// Morton codes of the level-`level` cubes inside `q` (empty when
    /// `level < q.level`).
    pub fn codes_within(&self, q: &Cube, level: u32) -> Range<usize> {
        if level < q.level {
            return 0..0;
        }
        let shift = self.dim * (level - q.level);
        let start = q.morton() << shift;
        start..start + (1usize << shift)
    }

    /// Every subcube of `q` (including `q`) in level-major order. Within a
    /// level the order is Morton order, which coincides with the canonical
    /// order when `d = 1`.
    pub fn subcubes(&self, q: &Cube) -> impl Iterator<Item = Cube> + '_ {
        let q = *q;
        (q.level..=self.depth)
            .flat_map(move |k| self.codes_within(&q, k).map(move |c| self.cube_at(k, c)))
    }

    /// Cell-centre coordinates of a cell index.
    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let c = self.cell_cube(cell);
        let h = 0.5 * c.side_length();
        let [x, y] = c.corner();
        [x + h, if self.dim == 2 { y + h } else { 0.0 }]
    }
}
