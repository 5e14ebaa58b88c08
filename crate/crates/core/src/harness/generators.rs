//! Weight families, random test functions and random shifts.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{Cube, Grid};
use crate::shifts::{HaarProfile, HaarShift, ShiftComponent, ShiftTerm};
use crate::weights::Weight;

/// How to build a weight on a grid.
///
/// The string form accepted by [`FromStr`] is `lebesgue`, `power:<alpha>`,
/// `step:<v1>,<v2>,...` or `random:<seed>:<roughness>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    /// `w ≡ 1`.
    Lebesgue,
    /// Cell averages of `x_1^α`, `α > -1`.
    Power { alpha: f64 },
    /// Piecewise constant values on the cubes of one level (their number must
    /// be `2^{d k}` for some `k ≤ L`), listed in canonical order.
    Step { values: Vec<f64> },
    /// `exp(roughness · Σ_k ξ_{Q_k(x)})` with independent `ξ ~ U(-1,1)` over
    /// the dyadic ancestors of each cell.
    Randomized { seed: u64, roughness: f64 },
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Lebesgue => write!(f, "lebesgue"),
            WeightSpec::Power { alpha } => write!(f, "power:{alpha}"),
            WeightSpec::Step { values } => {
                let parts: Vec<String> = values.iter().map(f64::to_string).collect();
                write!(f, "step:{}", parts.join(","))
            }
            WeightSpec::Randomized { seed, roughness } => write!(f, "random:{seed}:{roughness}"),
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<WeightSpec> {
        let bad = |msg: &str| Error::Config(format!("weight spec {s:?}: {msg}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("expected a number"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind.trim() {
            "lebesgue" | "one" => Ok(WeightSpec::Lebesgue),
            "power" => Ok(WeightSpec::Power { alpha: num(rest)? }),
            "step" => {
                let values = rest.split(',').map(num).collect::<Result<Vec<_>>>()?;
                Ok(WeightSpec::Step { values })
            }
            "random" | "randomized" => {
                let (seed, rough) = rest.split_once(':').ok_or_else(|| bad("expected random:<seed>:<roughness>"))?;
                let seed = seed.trim().parse().map_err(|_| bad("seed must be an integer"))?;
                Ok(WeightSpec::Randomized { seed, roughness: num(rough)? })
            }
            _ => Err(bad("unknown kind")),
        }
    }
}

/// Average of `x^α` over `[a, b)`.
fn power_average(alpha: f64, a: f64, b: f64) -> f64 {
    let e = alpha + 1.0;
    (b.powf(e) - a.powf(e)) / (e * (b - a))
}

/// Builds the weight described by `spec`.
pub fn generate_weight(spec: &WeightSpec, grid: Grid) -> Result<Weight> {
    match spec {
        WeightSpec::Lebesgue => Ok(Weight::lebesgue(grid)),
        WeightSpec::Power { alpha } => {
            if !alpha.is_finite() || *alpha <= -1.0 {
                return Err(Error::InvalidWeight(format!(
                    "power weight x^{alpha} is not integrable near 0 (need alpha > -1)"
                )));
            }
            let h = grid.cell_volume().powf(1.0 / grid.dim() as f64);
            Weight::new(GridFunction::from_cells(grid, |c| {
                let a = grid.cell_cube(c).corner()[0];
                power_average(*alpha, a, a + h)
            }))
        }
        WeightSpec::Step { values } => {
            let fan = 1usize << grid.dim();
            let level = (0..=grid.depth()).find(|k| fan.pow(*k) == values.len()).ok_or_else(|| {
                Error::InvalidWeight(format!(
                    "step weight has {} values; expected 2^(d k) for some level k <= {}",
                    values.len(),
                    grid.depth()
                ))
            })?;
            let cubes: Vec<Cube> = grid.cubes_at_level(level).collect();
            let mut by_code = vec![0.0; values.len()];
            for (q, v) in cubes.iter().zip(values) {
                by_code[q.morton()] = *v;
            }
            let shift = grid.dim() * (grid.depth() - level);
            Weight::new(GridFunction::from_cells(grid, |c| by_code[c >> shift]))
        }
        WeightSpec::Randomized { seed, roughness } => {
            if !(roughness.is_finite() && *roughness >= 0.0) {
                return Err(Error::InvalidWeight(format!("roughness {roughness} must be >= 0")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Weight::new(cascade(grid, &mut rng, *roughness).map(f64::exp))
        }
    }
}

/// `Σ_{k=1}^{L} a ξ_{Q_k(x)}`, one independent `ξ ~ U(-1,1)` per cube below
/// the root.
fn cascade(grid: Grid, rng: &mut impl Rng, amplitude: f64) -> GridFunction {
    let mut values = vec![0.0; 1];
    let fan = 1usize << grid.dim();
    for _ in 1..=grid.depth() {
        values = values
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, fan))
            .map(|v| v + amplitude * rng.random_range(-1.0..1.0))
            .collect();
    }
    GridFunction::new(grid, values).expect("finite values")
}

/// Families of random test functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    /// Independent standard normal cell values.
    Gaussian,
    /// Sum over the dyadic ancestors of each cell of independent `U(-1,1)`.
    Cascade,
    /// A Brownian path along the cell order (`d = 1`) or a cascade with
    /// amplitude shrinking like `2^{-k/2}` (`d = 2`).
    Walk,
}

impl FunctionKind {
    pub const ALL: [FunctionKind; 3] = [FunctionKind::Gaussian, FunctionKind::Cascade, FunctionKind::Walk];
}

/// One random function of the given kind.
pub fn random_function(grid: Grid, kind: FunctionKind, rng: &mut impl Rng) -> GridFunction {
    match kind {
        FunctionKind::Gaussian => GridFunction::from_cells(grid, |_| rng.sample(StandardNormal)),
        FunctionKind::Cascade => cascade(grid, rng, 1.0),
        FunctionKind::Walk if grid.dim() == 1 => {
            let mut x = 0.0;
            GridFunction::from_cells(grid, |_| {
                x += rng.sample::<f64, _>(StandardNormal);
                x
            })
        }
        FunctionKind::Walk => {
            let fan = 1usize << grid.dim();
            let mut values = vec![0.0];
            for k in 1..=grid.depth() {
                let amp = (-(k as f64) / 2.0).exp2();
                values = values
                    .iter()
                    .flat_map(|v| std::iter::repeat_n(*v, fan))
                    .map(|v| v + amp * rng.sample::<f64, _>(StandardNormal))
                    .collect();
            }
            GridFunction::new(grid, values).expect("finite values")
        }
    }
}

/// A random nonnegative function: `|g|` for a random `g` of a random kind.
pub fn random_nonnegative(grid: Grid, rng: &mut impl Rng) -> GridFunction {
    let kind = *FunctionKind::ALL.choose(rng).unwrap();
    random_function(grid, kind, rng).abs()
}

/// A random cube of the grid, uniform over levels and then over positions.
pub fn random_cube(grid: Grid, rng: &mut impl Rng) -> Cube {
    let level = rng.random_range(0..=grid.depth());
    let code = rng.random_range(0..grid.num_cubes_at(level));
    grid.cube_at(level, code)
}

fn random_profile(grid: Grid, cube: &Cube, rng: &mut impl Rng, nonnegative: bool) -> HaarProfile {
    let lo = if nonnegative { 0.0 } else { -1.0 };
    if cube.level() == grid.depth() || rng.random_bool(0.25) {
        HaarProfile::Constant(rng.random_range(lo..=1.0))
    } else {
        HaarProfile::PerChild((0..1usize << grid.dim()).map(|_| rng.random_range(lo..=1.0)).collect())
    }
}

/// A random shift of complexity type `(m, n)`: each eligible cube carries a
/// component with probability `density`, and each component up to three
/// terms with distinct `(target, source)` pairs and profiles bounded by one.
pub fn random_shift(
    grid: Grid,
    complexity: (u32, u32),
    density: f64,
    positive: bool,
    rng: &mut impl Rng,
) -> Result<HaarShift> {
    let (m, n) = complexity;
    let depth_needed = m.max(n);
    if depth_needed > grid.depth() {
        return Err(Error::InvalidShift(format!(
            "complexity ({m},{n}) needs more than {} levels",
            grid.depth()
        )));
    }
    let mut components = Vec::new();
    for q in grid.cubes().filter(|q| q.level() + depth_needed <= grid.depth()) {
        if !rng.random_bool(density.clamp(0.0, 1.0)) {
            continue;
        }
        let targets: Vec<Cube> = grid.subcubes(&q).filter(|c| c.level() == q.level() + m).collect();
        let sources: Vec<Cube> = grid.subcubes(&q).filter(|c| c.level() == q.level() + n).collect();
        let mut pairs: Vec<(Cube, Cube)> = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            let pair = (*targets.choose(rng).unwrap(), *sources.choose(rng).unwrap());
            if !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
        let terms = pairs
            .into_iter()
            .map(|(target, source)| ShiftTerm {
                target,
                source,
                h: random_profile(grid, &source, rng, positive),
                k: random_profile(grid, &target, rng, positive),
            })
            .collect();
        components.push(ShiftComponent { cube: q, terms });
    }
    HaarShift::new(grid, complexity, components, positive)
}
