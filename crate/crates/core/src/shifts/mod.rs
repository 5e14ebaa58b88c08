//! Generalized Haar shift operators of complexity type `(m, n)`.
//!
//! A shift is a finite family of components `S_Q`, one per dyadic cube, each
//! a sum of terms `|Q|^{-1} ⟨f, h⟩ k` where `h` is a child-constant profile
//! on a subcube `R' ⊆ Q` of side `2^{-n} ℓ(Q)` and `k` one on a subcube
//! `Q' ⊆ Q` of side `2^{-m} ℓ(Q)`.

mod engine;
mod norm;
mod positive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, Grid};

pub use engine::Orientation;
pub use positive::{build_positive_shift, PositiveShiftSpec, POSITIVE_SHIFT_CONSTANT};

const NORMALIZATION_SLACK: f64 = 1e-12;

/// A child-constant function on a cube: either one value on the whole cube,
/// or one value per child in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HaarProfile {
    Constant(f64),
    PerChild(Vec<f64>),
}

impl HaarProfile {
    pub fn sup_norm(&self) -> f64 {
        match self {
            HaarProfile::Constant(c) => c.abs(),
            HaarProfile::PerChild(v) => v.iter().fold(0.0, |m, c| m.max(c.abs())),
        }
    }

    /// Coefficient on child `j`.
    pub fn on_child(&self, j: usize) -> f64 {
        match self {
            HaarProfile::Constant(c) => *c,
            HaarProfile::PerChild(v) => v[j],
        }
    }

    fn is_nonnegative(&self) -> bool {
        match self {
            HaarProfile::Constant(c) => *c >= 0.0,
            HaarProfile::PerChild(v) => v.iter().all(|c| *c >= 0.0),
        }
    }

    fn validate(&self, grid: &Grid, cube: &Cube) -> Result<()> {
        match self {
            HaarProfile::Constant(c) if !c.is_finite() => {
                Err(Error::InvalidShift(format!("non-finite coefficient on {cube}")))
            }
            HaarProfile::Constant(_) => Ok(()),
            HaarProfile::PerChild(v) => {
                let fan = 1usize << grid.dim();
                if v.len() != fan {
                    return Err(Error::InvalidShift(format!(
                        "profile on {cube} has {} coefficients, expected {fan}",
                        v.len()
                    )));
                }
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidShift(format!("non-finite coefficient on {cube}")));
                }
                if cube.level() == grid.depth() && v.iter().any(|c| *c != v[0]) {
                    return Err(Error::InvalidShift(format!(
                        "{cube} is a finest cell; its profile must be constant"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// One term of a component: `⟨f, h⟩ k` with `h` living on `source` (`R'`)
/// and `k` on `target` (`Q'`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftTerm {
    pub target: Cube,
    pub source: Cube,
    pub h: HaarProfile,
    pub k: HaarProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftComponent {
    pub cube: Cube,
    pub terms: Vec<ShiftTerm>,
}

impl ShiftComponent {
    /// `‖s_Q‖_∞` of the component kernel `s_Q(x,y) = Σ k(x) h(y)`.
    ///
    /// Targets at one level are disjoint or equal, and so are sources, so the
    /// kernel on a pair of child cells only collects terms sharing both cubes.
    pub fn kernel_sup(&self, dim: u32) -> f64 {
        let fan = 1usize << dim;
        let mut pairs: Vec<(Cube, Cube, Vec<f64>)> = Vec::new();
        for t in &self.terms {
            let block = match pairs.iter_mut().find(|(a, b, _)| *a == t.target && *b == t.source) {
                Some(p) => &mut p.2,
                None => {
                    pairs.push((t.target, t.source, vec![0.0; fan * fan]));
                    &mut pairs.last_mut().unwrap().2
                }
            };
            for i in 0..fan {
                for j in 0..fan {
                    block[i * fan + j] += t.k.on_child(i) * t.h.on_child(j);
                }
            }
        }
        pairs
            .iter()
            .flat_map(|(_, _, b)| b.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Serialized form of a [`HaarShift`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShiftDocument {
    pub grid: Grid,
    pub complexity: [u32; 2],
    #[serde(default)]
    pub positive: bool,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    pub components: Vec<ShiftComponent>,
}

fn unit_scale() -> f64 {
    1.0
}

/// A validated Haar shift on a fixed grid.
///
/// `scale` multiplies every component; it defaults to 1 and is only changed
/// explicitly (see [`HaarShift::normalized`]).
#[derive(Clone, Debug)]
pub struct HaarShift {
    grid: Grid,
    complexity: (u32, u32),
    positive: bool,
    scale: f64,
    components: Vec<ShiftComponent>,
    /// `[level][morton]` → position in `components` plus one; zero when absent.
    slots: Vec<Vec<u32>>,
}

impl HaarShift {
    pub fn new(
        grid: Grid,
        complexity: (u32, u32),
        mut components: Vec<ShiftComponent>,
        positive: bool,
    ) -> Result<HaarShift> {
        let (m, n) = complexity;
        components.sort_by_key(|c| c.cube);
        for pair in components.windows(2) {
            if pair[0].cube == pair[1].cube {
                return Err(Error::InvalidShift(format!("duplicate component at {}", pair[0].cube)));
            }
        }
        for comp in &components {
            let q = comp.cube;
            grid.check(&q)?;
            for t in &comp.terms {
                check_subcube(&grid, &q, &t.target, m, "target")?;
                check_subcube(&grid, &q, &t.source, n, "source")?;
                t.h.validate(&grid, &t.source)?;
                t.k.validate(&grid, &t.target)?;
                if t.h.sup_norm() > 1.0 + NORMALIZATION_SLACK || t.k.sup_norm() > 1.0 + NORMALIZATION_SLACK {
                    return Err(Error::InvalidShift(format!(
                        "profiles in component {q} exceed sup-norm 1"
                    )));
                }
                if positive && !(t.h.is_nonnegative() && t.k.is_nonnegative()) {
                    return Err(Error::InvalidShift(format!(
                        "negative coefficient in component {q} of a positive shift"
                    )));
                }
            }
            let sup = comp.kernel_sup(grid.dim());
            if sup > 1.0 + NORMALIZATION_SLACK {
                return Err(Error::InvalidShift(format!(
                    "kernel of component {q} has sup-norm {sup} > 1"
                )));
            }
        }
        let mut slots: Vec<Vec<u32>> =
            (0..=grid.depth()).map(|k| vec![0; grid.num_cubes_at(k)]).collect();
        for (i, comp) in components.iter().enumerate() {
            slots[comp.cube.level() as usize][comp.cube.morton()] = i as u32 + 1;
        }
        Ok(HaarShift { grid, complexity, positive, scale: 1.0, components, slots })
    }

    /// The shift with no components.
    pub fn empty(grid: Grid) -> HaarShift {
        HaarShift::new(grid, (0, 0), Vec::new(), true).expect("empty shift is valid")
    }

    /// `f ↦ (avg_{Q_0} f) 1_{Q_0}`: one root component with `h = k = 1`.
    pub fn root_average(grid: Grid) -> HaarShift {
        let root = grid.root();
        let term = ShiftTerm {
            target: root,
            source: root,
            h: HaarProfile::Constant(1.0),
            k: HaarProfile::Constant(1.0),
        };
        HaarShift::new(grid, (0, 0), vec![ShiftComponent { cube: root, terms: vec![term] }], true)
            .expect("root averaging is a valid shift")
    }

    /// The Haar martingale transform `Σ_Q |Q|^{-1} ⟨f,h_Q⟩ h_Q` with the Haar
    /// function `h_Q = +1` on the lower half and `-1` on the upper half of `Q`
    /// along the first coordinate. Equals `f - avg_{Q_0} f`.
    pub fn martingale_transform(grid: Grid) -> HaarShift {
        let haar = match grid.dim() {
            1 => vec![1.0, -1.0],
            _ => vec![1.0, 1.0, -1.0, -1.0],
        };
        let components = grid
            .cubes()
            .filter(|q| q.level() < grid.depth())
            .map(|q| ShiftComponent {
                cube: q,
                terms: vec![ShiftTerm {
                    target: q,
                    source: q,
                    h: HaarProfile::PerChild(haar.clone()),
                    k: HaarProfile::PerChild(haar.clone()),
                }],
            })
            .collect();
        HaarShift::new(grid, (0, 0), components, false).expect("martingale transform is valid")
    }

    pub fn from_document(doc: ShiftDocument) -> Result<HaarShift> {
        if !(doc.scale.is_finite() && doc.scale > 0.0) {
            return Err(Error::InvalidShift(format!("scale {} must be positive", doc.scale)));
        }
        let [m, n] = doc.complexity;
        let s = HaarShift::new(doc.grid, (m, n), doc.components, doc.positive)?;
        Ok(s.with_scale(doc.scale))
    }

    pub fn to_document(&self) -> ShiftDocument {
        ShiftDocument {
            grid: self.grid,
            complexity: [self.complexity.0, self.complexity.1],
            positive: self.positive,
            scale: self.scale,
            components: self.components.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<HaarShift> {
        HaarShift::from_document(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn complexity_type(&self) -> (u32, u32) {
        self.complexity
    }

    /// `κ = max(m, n, 1)`.
    pub fn complexity(&self) -> u32 {
        self.complexity.0.max(self.complexity.1).max(1)
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(mut self, scale: f64) -> HaarShift {
        self.scale = scale;
        self
    }

    pub fn components(&self) -> &[ShiftComponent] {
        &self.components
    }

    pub fn component(&self, q: &Cube) -> Option<&ShiftComponent> {
        let slot = *self.slots.get(q.level() as usize)?.get(q.morton())?;
        (slot > 0).then(|| &self.components[slot as usize - 1])
    }

    pub fn num_terms(&self) -> usize {
        self.components.iter().map(|c| c.terms.len()).sum()
    }

    /// The shift keeping only the components whose cube satisfies `keep`.
    pub fn restricted_to(&self, keep: impl Fn(&Cube) -> bool) -> HaarShift {
        let components = self.components.iter().filter(|c| keep(&c.cube)).cloned().collect();
        HaarShift::new(self.grid, self.complexity, components, self.positive)
            .expect("a sub-family of a valid shift is valid")
            .with_scale(self.scale)
    }

    /// Returns the shift rescaled so that its `L^2` operator norm is at most 1,
    /// together with the measured norm before rescaling.
    pub fn normalized(&self) -> (HaarShift, f64) {
        let norm = self.operator_l2_norm();
        let shift = if norm > 1.0 { self.clone().with_scale(self.scale / norm) } else { self.clone() };
        (shift, norm)
    }

    /// Smallest `C` with `|K(x,y)| ≤ C / |x-y|^d` over pairs of distinct cells,
    /// distances measured between cell centres.
    pub fn kernel_decay_constant(&self) -> f64 {
        let kernel = self.kernel_matrix();
        let grid = self.grid;
        let n = grid.num_cells();
        let d = grid.dim() as i32;
        let centers: Vec<[f64; 2]> = (0..n).map(|c| grid.cell_center(c)).collect();
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                if x == y {
                    continue;
                }
                let dx = centers[x][0] - centers[y][0];
                let dy = centers[x][1] - centers[y][1];
                let dist = (dx * dx + dy * dy).sqrt();
                worst = worst.max(kernel[x * n + y].abs() * dist.powi(d));
            }
        }
        worst
    }

    /// Row-major kernel density `K(x,y)` sampled on cell pairs, so that
    /// `Sf(x) = Σ_y K(x,y) f(y) |cell|`.
    pub fn kernel_matrix(&self) -> Vec<f64> {
        let grid = self.grid;
        let n = grid.num_cells();
        let mut kernel = vec![0.0; n * n];
        for comp in &self.components {
            let factor = self.scale / comp.cube.volume();
            for t in &comp.terms {
                let rows = profile_cells(&grid, &t.target, &t.k);
                let cols = profile_cells(&grid, &t.source, &t.h);
                for &(x, kx) in &rows {
                    for &(y, hy) in &cols {
                        kernel[x * n + y] += factor * kx * hy;
                    }
                }
            }
        }
        kernel
    }
}

/// `(cell, value)` pairs of a profile expanded to the finest cells.
fn profile_cells(grid: &Grid, cube: &Cube, profile: &HaarProfile) -> Vec<(usize, f64)> {
    let range = grid.cell_range(cube);
    let per_child = range.len() >> grid.dim();
    range
        .clone()
        .map(|c| {
            let j = (c - range.start).checked_div(per_child).unwrap_or(0);
            (c, profile.on_child(j))
        })
        .collect()
}

fn check_subcube(grid: &Grid, q: &Cube, sub: &Cube, depth: u32, what: &str) -> Result<()> {
    if !grid.contains(sub) || !q.contains(sub) || sub.level() != q.level() + depth {
        return Err(Error::InvalidShift(format!(
            "{what} {sub} is not a subcube of {q} exactly {depth} levels down on the grid"
        )));
    }
    Ok(())
}
