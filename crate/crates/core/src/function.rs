//! Piecewise-constant functions on the finest cells of a grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, Grid};

/// A real function that is constant on every finest cell. Values are stored
/// in the grid's Morton cell order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != grid.num_cells() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at cell {bad}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> GridFunction {
        GridFunction { grid, values: vec![0.0; grid.num_cells()] }
    }

    pub fn constant(grid: Grid, c: f64) -> GridFunction {
        GridFunction { grid, values: vec![c; grid.num_cells()] }
    }

    /// `1_Q`.
    pub fn indicator(grid: Grid, q: &Cube) -> GridFunction {
        let mut f = GridFunction::zeros(grid);
        f.values[grid.cell_range(q)].fill(1.0);
        f
    }

    /// Builds a function from the cell index.
    pub fn from_cells(grid: Grid, mut value: impl FnMut(usize) -> f64) -> GridFunction {
        GridFunction { grid, values: (0..grid.num_cells()).map(&mut value).collect() }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Values on the cells of `q`.
    pub fn on(&self, q: &Cube) -> &[f64] {
        &self.values[self.grid.cell_range(q)]
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    /// `∫_Q f`, an exact finite sum.
    pub fn integral(&self, q: &Cube) -> f64 {
        self.on(q).iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `(1/|Q|) ∫_Q f`.
    pub fn average(&self, q: &Cube) -> f64 {
        let vals = self.on(q);
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().map(|&v| op(v)).collect() }
    }

    pub fn zip_with(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect(),
        })
    }

    pub fn abs(&self) -> GridFunction {
        self.map(f64::abs)
    }

    /// `f · 1_Q`.
    pub fn restrict(&self, q: &Cube) -> GridFunction {
        let range = self.grid.cell_range(q);
        GridFunction::from_cells(self.grid, |c| if range.contains(&c) { self.values[c] } else { 0.0 })
    }

    /// Unweighted `⟨f, g⟩ = ∫ f g`.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Unweighted `L^2` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Raw cell sums of a function over every dyadic cube, stored per level in
/// Morton order. Built bottom-up in a fixed order.
#[derive(Clone, Debug)]
pub struct CubeSums {
    grid: Grid,
    levels: Vec<Vec<f64>>,
}

impl CubeSums {
    pub fn new(f: &GridFunction) -> CubeSums {
        CubeSums::from_values(f.grid(), f.values())
    }

    pub fn from_values(grid: Grid, values: &[f64]) -> CubeSums {
        let fan = 1usize << grid.dim();
        let mut levels = vec![Vec::new(); grid.depth() as usize + 1];
        levels[grid.depth() as usize] = values.to_vec();
        for k in (0..grid.depth() as usize).rev() {
            let below = &levels[k + 1];
            let sums = below.chunks_exact(fan).map(|c| c.iter().sum()).collect();
            levels[k] = sums;
        }
        CubeSums { grid, levels }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Sum of cell values inside `q`.
    pub fn sum(&self, q: &Cube) -> f64 {
        self.levels[q.level() as usize][q.morton()]
    }

    pub fn sum_at(&self, level: u32, code: usize) -> f64 {
        self.levels[level as usize][code]
    }

    /// `∫_Q f`.
    pub fn integral(&self, q: &Cube) -> f64 {
        self.sum(q) * self.grid.cell_volume()
    }

    /// `(1/|Q|) ∫_Q f`.
    pub fn average(&self, q: &Cube) -> f64 {
        self.sum(q) / self.grid.cells_in(q) as f64
    }

    pub fn level(&self, level: u32) -> &[f64] {
        &self.levels[level as usize]
    }
}
