//! The positive shifts `S^(i) f = Σ_Q χ_Q^(i) avg_Q f` built from a sparse
//! family, where `χ_Q^(i)` is the sum of the indicators of the family cubes
//! whose `i`-th ancestor is `Q`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{HaarProfile, HaarShift, ShiftComponent, ShiftTerm};
use crate::error::{Error, Result};
use crate::grid::{Cube, Grid};

/// The constant `c` for which `c i^{-1} S^(i)` has `L^2` operator norm at most
/// one on sparse families from [`crate::lerner::sparse_decomposition`].
///
/// Measured on `d = 1`, `L = 10` over 24 random inputs and `i = 1..=5` (see
/// `examples/calibrate.rs`): the largest `‖S^(i)‖_2 / i` was 1.7522, at
/// `i = 1`, so `c = 0.57 ≤ 1/1.7522`.
pub const POSITIVE_SHIFT_CONSTANT: f64 = 0.57;

/// A sparse family (grouped in generations) and the ancestor offset `i ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveShiftSpec {
    pub generations: Vec<Vec<Cube>>,
    pub offset: u32,
}

impl PositiveShiftSpec {
    pub fn new(generations: Vec<Vec<Cube>>, offset: u32) -> PositiveShiftSpec {
        PositiveShiftSpec { generations, offset }
    }

    /// Keeps only the family cubes whose `offset`-th ancestor exists inside
    /// the root; the others would need an ancestor beyond the grid.
    pub fn dropping_shallow(generations: &[Vec<Cube>], offset: u32) -> PositiveShiftSpec {
        let generations = generations
            .iter()
            .map(|g| g.iter().copied().filter(|q| q.level() >= offset).collect())
            .collect();
        PositiveShiftSpec { generations, offset }
    }

    /// The normalization `c / i`.
    pub fn normalization(&self) -> f64 {
        POSITIVE_SHIFT_CONSTANT / self.offset.max(1) as f64
    }

    pub fn cubes(&self) -> impl Iterator<Item = &Cube> {
        self.generations.iter().flatten()
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.offset == 0 {
            return Err(Error::InvalidShift("offset i must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for (k, generation) in self.generations.iter().enumerate() {
            for q in generation {
                grid.check(q)?;
                if q.level() < self.offset {
                    return Err(Error::InvalidShift(format!(
                        "{q} has no ancestor {} levels up",
                        self.offset
                    )));
                }
                if !seen.insert(*q) {
                    return Err(Error::InvalidShift(format!("{q} appears twice in the family")));
                }
            }
            for (a, qa) in generation.iter().enumerate() {
                if let Some(qb) = generation[a + 1..].iter().find(|qb| qa.intersects(qb)) {
                    return Err(Error::InvalidShift(format!(
                        "generation {k} cubes {qa} and {qb} overlap"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Builds `S^(i)` unnormalized: one component per ancestor `Q`, one term per
/// family cube `Q'` with `(Q')^(i) = Q`, `k = 1_{Q'}` and `h = 1_Q`.
///
/// The complexity type is recorded as `(i, 0)`, so `κ = i`.
pub fn build_positive_shift(grid: Grid, spec: &PositiveShiftSpec) -> Result<HaarShift> {
    spec.validate(&grid)?;
    let mut by_ancestor: BTreeMap<Cube, Vec<Cube>> = BTreeMap::new();
    for q in spec.cubes() {
        let parent = q.ancestor(spec.offset)?;
        by_ancestor.entry(parent).or_default().push(*q);
    }
    let components = by_ancestor
        .into_iter()
        .map(|(cube, mut targets)| {
            targets.sort();
            ShiftComponent {
                cube,
                terms: targets
                    .into_iter()
                    .map(|target| ShiftTerm {
                        target,
                        source: cube,
                        h: HaarProfile::Constant(1.0),
                        k: HaarProfile::Constant(1.0),
                    })
                    .collect(),
            }
        })
        .collect();
    HaarShift::new(grid, (spec.offset, 0), components, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::GridFunction;

    fn g12() -> Grid {
        Grid::new(1, 2).unwrap()
    }

    fn cube(s: &str) -> Cube {
        s.parse().unwrap()
    }

    #[test]
    fn examples() {
        let g = g12();
        let s = build_positive_shift(g, &PositiveShiftSpec::new(vec![vec![cube("2:0")]], 1)).unwrap();
        let out = s.apply(&GridFunction::new(g, vec![0.0, 4.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(out.values(), &[2.0, 0.0, 0.0, 0.0]);

        let s = build_positive_shift(g, &PositiveShiftSpec::new(vec![vec![cube("2:0")]], 2)).unwrap();
        let out = s.apply(&GridFunction::constant(g, 1.0)).unwrap();
        assert_eq!(out.values(), &[1.0, 0.0, 0.0, 0.0]);

        let cells: Vec<Cube> = g.cubes_at_level(2).collect();
        let s = build_positive_shift(g, &PositiveShiftSpec::new(vec![cells], 1)).unwrap();
        let out = s.apply(&GridFunction::constant(g, 1.0)).unwrap();
        assert_eq!(out.values(), &[1.0; 4]);
        assert!(s.is_positive());
        assert_eq!(s.complexity_type(), (1, 0));
    }

    #[test]
    fn normalization_is_reported_not_applied() {
        let spec = PositiveShiftSpec::new(vec![vec![cube("2:0")]], 2);
        let s = build_positive_shift(g12(), &spec).unwrap();
        assert_eq!(s.scale(), 1.0);
        assert_eq!(spec.normalization(), POSITIVE_SHIFT_CONSTANT / 2.0);
    }

    #[test]
    fn spec_violations() {
        let g = g12();
        let shallow = PositiveShiftSpec::new(vec![vec![cube("1:0")]], 2);
        assert!(matches!(build_positive_shift(g, &shallow), Err(Error::InvalidShift(_))));
        let overlap = PositiveShiftSpec::new(vec![vec![cube("1:0"), cube("2:1")]], 1);
        assert!(build_positive_shift(g, &overlap).is_err());
        let twice = PositiveShiftSpec::new(vec![vec![cube("2:0")], vec![cube("2:0")]], 1);
        assert!(build_positive_shift(g, &twice).is_err());
        let zero = PositiveShiftSpec::new(vec![vec![cube("2:0")]], 0);
        assert!(build_positive_shift(g, &zero).is_err());
        let dropped = PositiveShiftSpec::dropping_shallow(&[vec![cube("1:0"), cube("2:3")]], 2);
        assert_eq!(dropped.generations, vec![vec![cube("2:3")]]);
    }
}
