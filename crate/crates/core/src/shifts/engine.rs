//! Exact evaluation of shifts: full application, adjoint, scale windows,
//! maximal truncation and cube-localised application.
//!
//! Each term pairs the input with one profile (via cube sums) and deposits a
//! multiple of the other profile into a per-level "delta" table; one top-down
//! pass then turns the table into cell values. Components are visited in
//! canonical order so the floating-point summation order is fixed.

use super::{HaarProfile, HaarShift, ShiftTerm};
use crate::error::{Error, Result};
use crate::function::{CubeSums, GridFunction};
use crate::grid::{Cube, Grid};

/// Which of `S` or its transpose `S*` to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Forward,
    Adjoint,
}

impl Orientation {
    /// `(input cube, input profile, output cube, output profile)`.
    fn sides<'a>(&self, t: &'a ShiftTerm) -> (&'a Cube, &'a HaarProfile, &'a Cube, &'a HaarProfile) {
        match self {
            Orientation::Forward => (&t.source, &t.h, &t.target, &t.k),
            Orientation::Adjoint => (&t.target, &t.k, &t.source, &t.h),
        }
    }
}

/// Per-level additive table over the subcubes of `top`.
struct DeltaTable {
    grid: Grid,
    top: Cube,
    levels: Vec<Vec<f64>>,
}

impl DeltaTable {
    fn new(grid: Grid, top: Cube) -> DeltaTable {
        let levels = (top.level()..=grid.depth())
            .map(|k| vec![0.0; grid.codes_within(&top, k).len()])
            .collect();
        DeltaTable { grid, top, levels }
    }

    fn add(&mut self, level: u32, code: usize, value: f64) {
        let start = self.grid.codes_within(&self.top, level).start;
        self.levels[(level - self.top.level()) as usize][code - start] += value;
    }

    /// Adds `coef · profile` on `cube`, clipped to `top`.
    fn deposit(&mut self, cube: &Cube, profile: &HaarProfile, coef: f64) {
        if self.top.contains(cube) {
            match profile {
                HaarProfile::Constant(c) => self.add(cube.level(), cube.morton(), coef * c),
                HaarProfile::PerChild(v) => {
                    if cube.level() == self.grid.depth() {
                        self.add(cube.level(), cube.morton(), coef * v[0]);
                    } else {
                        let fan = v.len();
                        let base = cube.morton() * fan;
                        for (j, c) in v.iter().enumerate() {
                            self.add(cube.level() + 1, base + j, coef * c);
                        }
                    }
                }
            }
        } else if cube.contains(&self.top) {
            let c = match profile {
                HaarProfile::Constant(c) => *c,
                HaarProfile::PerChild(v) => {
                    if cube.level() == self.grid.depth() {
                        v[0]
                    } else {
                        let child = self.top.ancestor(self.top.level() - cube.level() - 1).unwrap();
                        v[child.morton() - cube.morton() * v.len()]
                    }
                }
            };
            self.add(self.top.level(), self.top.morton(), coef * c);
        }
    }

    /// Cell values on `top`, accumulated from the coarsest level down.
    fn materialize(self) -> Vec<f64> {
        let bits = self.grid.dim();
        let mut levels = self.levels.into_iter();
        let mut acc = levels.next().expect("at least one level");
        for delta in levels {
            acc = delta.iter().enumerate().map(|(i, d)| acc[i >> bits] + d).collect();
        }
        acc
    }
}

/// Source of input integrals `∫_C f` for the pairing step.
trait InputSums {
    fn integral(&self, cube: &Cube) -> f64;
}

struct Whole<'a>(&'a CubeSums);

impl InputSums for Whole<'_> {
    fn integral(&self, cube: &Cube) -> f64 {
        self.0.integral(cube)
    }
}

/// Integrals of `1_top f` computed from the sums of `f`.
struct Localized<'a> {
    sums: &'a CubeSums,
    top: Cube,
}

impl InputSums for Localized<'_> {
    fn integral(&self, cube: &Cube) -> f64 {
        if self.top.contains(cube) {
            self.sums.integral(cube)
        } else if cube.contains(&self.top) {
            self.sums.integral(&self.top)
        } else {
            0.0
        }
    }
}

fn pairing(input: &impl InputSums, cube: &Cube, profile: &HaarProfile, grid: &Grid) -> f64 {
    match profile {
        HaarProfile::Constant(c) => c * input.integral(cube),
        HaarProfile::PerChild(v) if cube.level() == grid.depth() => v[0] * input.integral(cube),
        HaarProfile::PerChild(v) => cube
            .children_unchecked()
            .iter()
            .zip(v)
            .map(|(child, c)| c * input.integral(child))
            .sum(),
    }
}

impl HaarShift {
    fn check_input(&self, f: &GridFunction) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "shift on {:?}, function on {:?}",
                self.grid,
                f.grid()
            )));
        }
        Ok(())
    }

    fn accumulate<'a>(
        &self,
        table: &mut DeltaTable,
        input: &impl InputSums,
        orientation: Orientation,
        components: impl Iterator<Item = &'a super::ShiftComponent>,
    ) {
        for comp in components {
            let factor = self.scale / comp.cube.volume();
            for t in &comp.terms {
                let (in_cube, in_profile, out_cube, out_profile) = orientation.sides(t);
                if !table.top.intersects(out_cube) {
                    continue;
                }
                let p = pairing(input, in_cube, in_profile, &self.grid);
                if p != 0.0 {
                    table.deposit(out_cube, out_profile, factor * p);
                }
            }
        }
    }

    fn evaluate(&self, f: &GridFunction, orientation: Orientation, levels: Option<(u32, u32)>) -> GridFunction {
        let sums = CubeSums::new(f);
        let mut table = DeltaTable::new(self.grid, self.grid.root());
        let comps = self.components.iter().filter(|c| match levels {
            None => true,
            Some((lo, hi)) => (lo..=hi).contains(&c.cube.level()),
        });
        self.accumulate(&mut table, &Whole(&sums), orientation, comps);
        GridFunction::new(self.grid, table.materialize()).expect("finite output")
    }

    /// `S f`.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_input(f)?;
        Ok(self.evaluate(f, Orientation::Forward, None))
    }

    /// `S* g`, the transpose with respect to `⟨f,g⟩ = ∫ f g`.
    pub fn adjoint_apply(&self, g: &GridFunction) -> Result<GridFunction> {
        self.check_input(g)?;
        Ok(self.evaluate(g, Orientation::Adjoint, None))
    }

    pub fn apply_oriented(&self, f: &GridFunction, orientation: Orientation) -> Result<GridFunction> {
        self.check_input(f)?;
        Ok(self.evaluate(f, orientation, None))
    }

    /// `Σ_{ε ≤ ℓ(Q) ≤ υ} S_Q f`. An empty window (including `ε > υ`) gives 0.
    pub fn truncated_apply(&self, f: &GridFunction, eps: f64, upsilon: f64) -> Result<GridFunction> {
        self.check_input(f)?;
        match self.level_window(eps, upsilon) {
            Some(levels) => Ok(self.evaluate(f, Orientation::Forward, Some(levels))),
            None => Ok(GridFunction::zeros(self.grid)),
        }
    }

    /// Levels `k` with `ε ≤ 2^{-k} ≤ υ`, intersected with the grid.
    fn level_window(&self, eps: f64, upsilon: f64) -> Option<(u32, u32)> {
        let levels: Vec<u32> = (0..=self.grid.depth())
            .filter(|&k| {
                let side = (-(k as f64)).exp2();
                eps <= side && side <= upsilon
            })
            .collect();
        Some((*levels.first()?, *levels.last()?))
    }

    /// The contribution `Σ_{level(Q) = k} S_Q f` for every level `k = 0..=L`.
    pub fn level_contributions(&self, f: &GridFunction) -> Result<Vec<GridFunction>> {
        self.check_input(f)?;
        let sums = CubeSums::new(f);
        let input = Whole(&sums);
        Ok((0..=self.grid.depth())
            .map(|k| {
                let mut table = DeltaTable::new(self.grid, self.grid.root());
                let comps = self.components.iter().filter(|c| c.cube.level() == k);
                self.accumulate(&mut table, &input, Orientation::Forward, comps);
                GridFunction::new(self.grid, table.materialize()).expect("finite output")
            })
            .collect())
    }

    /// `S_♮ f = sup_{ε ≤ υ} |Σ_{ε ≤ ℓ(Q) ≤ υ} S_Q f|`.
    ///
    /// Windows are contiguous runs of levels, so with prefix sums
    /// `P_j = Σ_{k<j} C_k` every window sum is `P_s - P_t` and the supremum of
    /// its absolute value is `max_j P_j - min_j P_j`.
    pub fn maximal_truncation(&self, f: &GridFunction) -> Result<GridFunction> {
        let contributions = self.level_contributions(f)?;
        let n = self.grid.num_cells();
        let mut prefix = vec![0.0; n];
        let mut hi = vec![0.0f64; n];
        let mut lo = vec![0.0f64; n];
        for c in &contributions {
            for x in 0..n {
                prefix[x] += c.values()[x];
                hi[x] = hi[x].max(prefix[x]);
                lo[x] = lo[x].min(prefix[x]);
            }
        }
        GridFunction::new(self.grid, hi.iter().zip(&lo).map(|(h, l)| h - l).collect())
    }

    /// Values of `1_Q S(1_Q f)` (or of the adjoint) on the cells of `Q`.
    ///
    /// Only components at ancestors of `Q` and at subcubes of `Q` can
    /// contribute, so the cost is proportional to `|Q|` plus their terms.
    pub fn localized_apply(&self, sums: &CubeSums, q: &Cube, orientation: Orientation) -> Vec<f64> {
        let grid = self.grid;
        let input = Localized { sums, top: *q };
        let mut table = DeltaTable::new(grid, *q);
        let ancestors = (1..=q.level()).rev().filter_map(|i| self.component(&q.ancestor(i).unwrap()));
        self.accumulate(&mut table, &input, orientation, ancestors);
        let inside = (q.level()..=grid.depth()).flat_map(|k| {
            grid.codes_within(q, k).filter_map(move |code| {
                let slot = self.slots[k as usize][code];
                (slot > 0).then(|| &self.components[slot as usize - 1])
            })
        });
        self.accumulate(&mut table, &input, orientation, inside);
        table.materialize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shifts::{build_positive_shift, PositiveShiftSpec};

    fn g12() -> Grid {
        Grid::new(1, 2).unwrap()
    }

    fn f(vals: &[f64]) -> GridFunction {
        GridFunction::new(g12(), vals.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14)
    }

    fn s1_quarter() -> HaarShift {
        let spec = PositiveShiftSpec::new(vec![vec!["2:0".parse().unwrap()]], 1);
        build_positive_shift(g12(), &spec).unwrap()
    }

    #[test]
    fn apply_examples() {
        let s = HaarShift::root_average(g12());
        assert!(close(s.apply(&f(&[1.0; 4])).unwrap().values(), &[1.0; 4]));
        let mt = HaarShift::martingale_transform(g12());
        let out = mt.apply(&f(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(close(out.values(), &[0.75, -0.25, -0.25, -0.25]));
        let e = HaarShift::empty(g12());
        assert_eq!(e.apply(&f(&[3.0, 1.0, 4.0, 1.0])).unwrap().values(), &[0.0; 4]);
    }

    #[test]
    fn adjoint_examples() {
        let s = s1_quarter();
        let g = f(&[4.0, 0.0, 0.0, 0.0]);
        assert!(close(s.adjoint_apply(&g).unwrap().values(), &[2.0, 2.0, 0.0, 0.0]));
        let x = f(&[0.0, 4.0, 0.0, 0.0]);
        let lhs = s.apply(&x).unwrap().inner(&g).unwrap();
        let rhs = x.inner(&s.adjoint_apply(&g).unwrap()).unwrap();
        assert!((lhs - 2.0).abs() < 1e-14 && (rhs - 2.0).abs() < 1e-14);
        assert_eq!(HaarShift::empty(g12()).adjoint_apply(&g).unwrap().values(), &[0.0; 4]);
    }

    #[test]
    fn truncation_windows() {
        let mt = HaarShift::martingale_transform(g12());
        let x = f(&[1.0, 0.0, 0.0, 0.0]);
        let full = mt.apply(&x).unwrap();
        assert_eq!(mt.truncated_apply(&x, 0.0, 1.0).unwrap(), full);
        let mid = mt.truncated_apply(&x, 0.5, 0.5).unwrap();
        assert!(close(mid.values(), &[0.5, -0.5, 0.0, 0.0]));
        assert_eq!(mt.truncated_apply(&x, 1.5, 2.0).unwrap().values(), &[0.0; 4]);
        assert_eq!(mt.truncated_apply(&x, 0.5, 0.25).unwrap().values(), &[0.0; 4]);
    }

    #[test]
    fn maximal_truncation_examples() {
        let s = s1_quarter();
        let x = f(&[0.5, 4.0, 1.0, 2.0]);
        assert!(close(s.maximal_truncation(&x).unwrap().values(), s.apply(&x).unwrap().values()));
        let e = HaarShift::empty(g12());
        assert_eq!(e.maximal_truncation(&x).unwrap().values(), &[0.0; 4]);
        let mt = HaarShift::martingale_transform(g12());
        let x = f(&[1.0, 0.0, 0.0, 0.0]);
        let m = mt.maximal_truncation(&x).unwrap();
        // windows: level 0 alone gives ¼(1,1,-1,-1); level 1 alone gives (½,-½,0,0)
        assert!(close(m.values(), &[0.75, 0.5, 0.25, 0.25]));
    }

    #[test]
    fn localized_matches_global() {
        let g = Grid::new(1, 5).unwrap();
        let mt = HaarShift::martingale_transform(g);
        let x = GridFunction::from_cells(g, |c| ((c * 7 + 3) % 11) as f64 - 5.0);
        let sums = CubeSums::new(&x);
        for q in g.cubes() {
            for o in [Orientation::Forward, Orientation::Adjoint] {
                let local = mt.localized_apply(&sums, &q, o);
                let global = mt.apply_oriented(&x.restrict(&q), o).unwrap();
                assert!(close(&local, global.on(&q)), "cube {q}");
            }
        }
    }
}
