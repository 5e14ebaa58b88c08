//! Weights, dual weights, dyadic maximal operators and the characteristics
//! `[w,σ]_{A_p}` and `[w]_{A_∞}`.
//!
//! All integrals are finite sums over cells. The `A_∞` characteristic uses
//! the dyadic maximal operator localised to the cube (Fujii–Wilson form).

use crate::error::{Error, Result};
use crate::function::{CubeSums, GridFunction};
use crate::grid::{Cube, Grid};

/// Cell values below this are rejected when building a [`Weight`].
pub const MIN_WEIGHT_VALUE: f64 = 1e-12;

/// Relative slack used when picking the first cube that attains a supremum.
const TIE_TOLERANCE: f64 = 1e-12;

/// A strictly positive grid function together with its cube measures.
#[derive(Clone, Debug)]
pub struct Weight {
    density: GridFunction,
    sums: CubeSums,
}

impl Weight {
    pub fn new(density: GridFunction) -> Result<Weight> {
        if let Some((cell, v)) =
            density.values().iter().enumerate().find(|(_, &v)| !(v >= MIN_WEIGHT_VALUE))
        {
            return Err(Error::InvalidWeight(format!(
                "cell {cell} has value {v}, weights must be >= {MIN_WEIGHT_VALUE}"
            )));
        }
        let sums = CubeSums::new(&density);
        Ok(Weight { density, sums })
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Weight> {
        Weight::new(GridFunction::new(grid, values)?)
    }

    /// The Lebesgue weight `w ≡ 1`.
    pub fn lebesgue(grid: Grid) -> Weight {
        Weight::new(GridFunction::constant(grid, 1.0)).expect("unit weight is positive")
    }

    pub fn grid(&self) -> Grid {
        self.density.grid()
    }

    pub fn density(&self) -> &GridFunction {
        &self.density
    }

    pub fn values(&self) -> &[f64] {
        self.density.values()
    }

    /// `w(Q)`.
    pub fn measure(&self, q: &Cube) -> f64 {
        self.sums.integral(q)
    }

    /// `w(Q)/|Q|`.
    pub fn average(&self, q: &Cube) -> f64 {
        self.sums.average(q)
    }

    pub fn sums(&self) -> &CubeSums {
        &self.sums
    }

    /// `λ w`.
    pub fn scaled(&self, factor: f64) -> Result<Weight> {
        Weight::new(self.density.map(|v| v * factor))
    }
}

/// The measure against which averages and norms are taken.
#[derive(Clone, Copy, Debug)]
pub enum Measure<'a> {
    Lebesgue,
    Weighted(&'a Weight),
}

impl Measure<'_> {
    fn cell_weight(&self, cell: usize) -> f64 {
        match self {
            Measure::Lebesgue => 1.0,
            Measure::Weighted(w) => w.values()[cell],
        }
    }
}

/// `w(Q)`, checking that the cube belongs to the weight's grid.
pub fn measure(u: &Weight, q: &Cube) -> Result<f64> {
    u.grid().check(q)?;
    Ok(u.measure(q))
}

/// `p' = p/(p-1)`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::Domain(format!("exponent p = {p} must lie in (1, inf)")));
    }
    Ok(p / (p - 1.0))
}

/// `σ = w^{1-p'}`.
pub fn dual_weight(w: &Weight, p: f64) -> Result<Weight> {
    let exponent = 1.0 - conjugate_exponent(p)?;
    Weight::new(w.density().map(|v| v.powf(exponent)))
}

/// Dyadic maximal function of `f` with respect to `μ`:
/// `sup_{Q ∋ x} μ(Q)^{-1} ∫_Q |f| dμ`.
///
/// With `restrict = Some(R)` the function is replaced by `f 1_R` and only
/// cubes inside `R` are used; the result vanishes outside `R`.
pub fn weighted_maximal(
    f: &GridFunction,
    mu: Measure<'_>,
    restrict: Option<&Cube>,
) -> Result<GridFunction> {
    let grid = f.grid();
    if let Measure::Weighted(w) = mu {
        if w.grid() != grid {
            return Err(Error::GridMismatch("function and measure on different grids".into()));
        }
    }
    let top = match restrict {
        Some(r) => {
            grid.check(r)?;
            *r
        }
        None => grid.root(),
    };
    let weighted: Vec<f64> =
        f.values().iter().enumerate().map(|(c, v)| v.abs() * mu.cell_weight(c)).collect();
    let num = CubeSums::from_values(grid, &weighted);
    let den = match mu {
        Measure::Lebesgue => None,
        Measure::Weighted(w) => Some(w.sums()),
    };
    let avg = |level: u32, code: usize| {
        let n = num.sum_at(level, code);
        match den {
            None => n / (1usize << (grid.dim() * (grid.depth() - level))) as f64,
            Some(d) => n / d.sum_at(level, code),
        }
    };

    let fan_bits = grid.dim();
    let first = grid.codes_within(&top, top.level());
    let mut best: Vec<f64> = first.clone().map(|c| avg(top.level(), c)).collect();
    let mut base = first.start;
    for level in top.level() + 1..=grid.depth() {
        let codes = grid.codes_within(&top, level);
        let next: Vec<f64> = codes
            .clone()
            .map(|c| best[(c >> fan_bits) - base].max(avg(level, c)))
            .collect();
        base = codes.start;
        best = next;
    }
    let range = grid.cell_range(&top);
    let mut out = GridFunction::zeros(grid);
    out.values_mut()[range].copy_from_slice(&best);
    Ok(out)
}

/// `A_p(w,σ;Q) = (w(Q)/|Q|) (σ(Q)/|Q|)^{p-1}`.
pub fn ap_local(w: &Weight, sigma: &Weight, p: f64, q: &Cube) -> f64 {
    w.average(q) * sigma.average(q).powf(p - 1.0)
}

/// `[w,σ]_{A_p}` and the first cube (canonical order) attaining it.
pub fn ap_two_weight(w: &Weight, sigma: &Weight, p: f64) -> Result<(f64, Cube)> {
    conjugate_exponent(p)?;
    if w.grid() != sigma.grid() {
        return Err(Error::GridMismatch("w and sigma on different grids".into()));
    }
    let grid = w.grid();
    sup_over_cubes(grid.cubes(), |q| ap_local(w, sigma, p, q))
        .ok_or_else(|| Error::Config("grid has no cubes".into()))
}

/// `[w]_{A_p} = [w, w^{1-p'}]_{A_p}`.
pub fn ap_characteristic(w: &Weight, p: f64) -> Result<(f64, Cube)> {
    let sigma = dual_weight(w, p)?;
    ap_two_weight(w, &sigma, p)
}

/// `A_∞(w,Q) = w(Q)^{-1} ∫_Q M(w 1_Q)`, with `M` the dyadic maximal operator
/// localised to `Q`.
pub fn ainfty_local(w: &Weight, q: &Cube) -> f64 {
    let grid = w.grid();
    let sums = w.sums();
    let bits = grid.dim();
    let first = grid.codes_within(q, q.level());
    let mut best: Vec<f64> = first.clone().map(|c| avg_at(sums, grid, q.level(), c)).collect();
    let mut base = first.start;
    for level in q.level() + 1..=grid.depth() {
        let codes = grid.codes_within(q, level);
        let next: Vec<f64> = codes
            .clone()
            .map(|c| best[(c >> bits) - base].max(avg_at(sums, grid, level, c)))
            .collect();
        base = codes.start;
        best = next;
    }
    // both numerator and w(Q) carry the same cell volume
    best.iter().sum::<f64>() / sums.sum(q)
}

fn avg_at(sums: &CubeSums, grid: Grid, level: u32, code: usize) -> f64 {
    sums.sum_at(level, code) / (1usize << (grid.dim() * (grid.depth() - level))) as f64
}

/// `[w]_{A_∞}` over all cubes (or all cubes inside `restrict`) together with
/// the first cube attaining it.
pub fn ainfty_with_cube(w: &Weight, restrict: Option<&Cube>) -> Result<(f64, Cube)> {
    let grid = w.grid();
    let top = match restrict {
        Some(r) => {
            grid.check(r)?;
            *r
        }
        None => grid.root(),
    };
    let mut cubes: Vec<Cube> = grid.subcubes(&top).collect();
    cubes.sort();
    sup_over_cubes(cubes.iter().copied(), |q| ainfty_local(w, q))
        .ok_or_else(|| Error::Config("no cubes".into()))
}

/// `[w]_{A_∞}`.
pub fn ainfty(w: &Weight, restrict: Option<&Cube>) -> Result<f64> {
    ainfty_with_cube(w, restrict).map(|(v, _)| v)
}

/// `‖f‖_{L^p(μ)}` for `p ∈ [1, ∞)`.
pub fn lp_norm(f: &GridFunction, mu: Measure<'_>, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::Domain(format!("exponent p = {p} must lie in [1, inf)")));
    }
    if let Measure::Weighted(w) = mu {
        if w.grid() != f.grid() {
            return Err(Error::GridMismatch("function and weight on different grids".into()));
        }
    }
    let total: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(c, v)| v.abs().powf(p) * mu.cell_weight(c))
        .sum();
    Ok((total * f.grid().cell_volume()).powf(1.0 / p))
}

/// Maximum of `value` over `cubes` (visited in the given order), returning the
/// first cube whose value is within a relative `1e-12` of the maximum.
pub(crate) fn sup_over_cubes(
    cubes: impl Iterator<Item = Cube>,
    value: impl Fn(&Cube) -> f64,
) -> Option<(f64, Cube)> {
    pick_sup(cubes.map(|q| (value(&q), q)).collect())
}

/// Same as [`sup_over_cubes`] for already scored cubes in canonical order.
pub(crate) fn pick_sup(scored: Vec<(f64, Cube)>) -> Option<(f64, Cube)> {
    let max = scored.iter().map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .find(|(v, _)| *v >= max - TIE_TOLERANCE * max.abs())
        .map(|(_, q)| (max, q))
}
