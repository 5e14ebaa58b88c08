//! Medians, rearrangements, local mean oscillations and the sparse stopping
//! family behind the local oscillation decomposition
//! `|f - m_f(Q_0)| ≲ M^#_{1/4;Q_0} f + Σ ω_{2^{-d-2}}(f; (Q^k_j)^(1)) 1_{Q^k_j}`.
//!
//! On a grid every percentile is an order statistic of cell values, so all
//! quantities here are exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{Cube, Grid};

/// Percentile `λ_d = 2^{-d-2}` used for the oscillations of the sparse family.
pub fn sparse_lambda(dim: u32) -> f64 {
    (-(dim as f64) - 2.0).exp2()
}

/// Percentile of the local sharp maximal function in the decomposition.
pub const SHARP_LAMBDA: f64 = 0.25;

/// Number of cells allowed above the threshold when `t/|cell| = x`.
fn cells_allowed(x: f64) -> usize {
    (x * (1.0 + 1e-12)).floor().max(0.0) as usize
}

/// Cell values of `f` sorted ascending within every dyadic cube, stored per
/// level so that the values of a cube are one contiguous slice.
#[derive(Clone, Debug)]
pub struct SortedSegments {
    grid: Grid,
    levels: Vec<Vec<f64>>,
}

impl SortedSegments {
    pub fn new(f: &GridFunction) -> SortedSegments {
        let grid = f.grid();
        let levels = (0..=grid.depth())
            .map(|k| {
                let mut v = f.values().to_vec();
                let chunk = 1usize << (grid.dim() * (grid.depth() - k));
                for seg in v.chunks_mut(chunk) {
                    seg.sort_unstable_by(f64::total_cmp);
                }
                v
            })
            .collect();
        SortedSegments { grid, levels }
    }

    pub fn segment(&self, q: &Cube) -> &[f64] {
        &self.levels[q.level() as usize][self.grid.cell_range(q)]
    }
}

/// Smallest admissible median of an ascending slice.
fn lower_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let below = i;
        let mut j = i;
        while j < n && sorted[j] == v {
            j += 1;
        }
        let above = n - j;
        if 2 * above <= n && 2 * below <= n {
            return v;
        }
        i = j;
    }
    sorted[n - 1]
}

/// Minimal half-width of a window holding all but `allowed` sorted values.
fn oscillation_sorted(sorted: &[f64], allowed: usize) -> f64 {
    let n = sorted.len();
    if allowed + 1 >= n {
        return 0.0;
    }
    let keep = n - allowed;
    (0..=n - keep)
        .map(|i| sorted[i + keep - 1] - sorted[i])
        .fold(f64::INFINITY, f64::min)
        / 2.0
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("percentile λ = {lambda} must lie in (0,1)")))
    }
}

/// Lower median `m_f(Q)`: the smallest cell value `m` on `Q` with
/// `|{f > m}| ≤ |Q|/2` and `|{f < m}| ≤ |Q|/2`.
pub fn median(f: &GridFunction, q: &Cube) -> Result<f64> {
    f.grid().check(q)?;
    let mut v = f.on(q).to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(lower_median(&v))
}

/// `(φ 1_Q)^*(t) = inf{s ≥ 0 : |{x ∈ Q : |φ(x)| > s}| ≤ t}`.
pub fn rearrangement_value(phi: &GridFunction, q: &Cube, t: f64) -> Result<f64> {
    phi.grid().check(q)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("rearrangement argument t = {t} must be positive")));
    }
    let allowed = cells_allowed(t / phi.grid().cell_volume());
    let mut v: Vec<f64> = phi.on(q).iter().map(|x| x.abs()).collect();
    if allowed >= v.len() {
        return Ok(0.0);
    }
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(v[allowed])
}

/// `ω_λ(f;Q) = inf_c ((f - c) 1_Q)^*(λ|Q|)`.
///
/// At most `⌊λ n⌋` of the `n` cells may lie outside `[c - s, c + s]`, so the
/// infimum is half the narrowest span of `n - ⌊λ n⌋` consecutive sorted values.
pub fn oscillation(f: &GridFunction, q: &Cube, lambda: f64) -> Result<f64> {
    f.grid().check(q)?;
    check_lambda(lambda)?;
    let mut v = f.on(q).to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(oscillation_sorted(&v, cells_allowed(lambda * v.len() as f64)))
}

fn oscillation_of(segments: &SortedSegments, q: &Cube, lambda: f64) -> f64 {
    let s = segments.segment(q);
    oscillation_sorted(s, cells_allowed(lambda * s.len() as f64))
}

/// `M^#_{λ;Q_0} f(x) = sup_{x ∈ Q' ⊆ Q_0} ω_λ(f;Q')`, zero outside `Q_0`.
pub fn local_sharp_maximal(f: &GridFunction, q0: &Cube, lambda: f64) -> Result<GridFunction> {
    let grid = f.grid();
    grid.check(q0)?;
    check_lambda(lambda)?;
    let segments = SortedSegments::new(f);
    Ok(sharp_from_segments(&segments, grid, q0, lambda))
}

fn sharp_from_segments(segments: &SortedSegments, grid: Grid, q0: &Cube, lambda: f64) -> GridFunction {
    let bits = grid.dim();
    let mut best = vec![oscillation_of(segments, q0, lambda)];
    let mut base = grid.codes_within(q0, q0.level()).start;
    for level in q0.level() + 1..=grid.depth() {
        let codes = grid.codes_within(q0, level);
        best = codes
            .clone()
            .map(|c| best[(c >> bits) - base].max(oscillation_of(segments, &grid.cube_at(level, c), lambda)))
            .collect();
        base = codes.start;
    }
    let mut out = GridFunction::zeros(grid);
    out.values_mut()[grid.cell_range(q0)].copy_from_slice(&best);
    out
}

/// Generations `Q^k_j` of stopping cubes below a root cube `Q_0` (which is
/// not itself a member).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    pub root: Cube,
    pub generations: Vec<Vec<Cube>>,
}

impl SparseFamily {
    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    pub fn cubes(&self) -> impl Iterator<Item = &Cube> {
        self.generations.iter().flatten()
    }

    /// Checks, by integer cell counting, that generations are pairwise
    /// disjoint, that `Ω_{k+1} ⊆ Ω_k`, and that
    /// `|Q^k_j ∩ Ω_{k+1}| ≤ |Q^k_j|/2`.
    pub fn verify(&self, grid: &Grid) -> std::result::Result<(), String> {
        let n = grid.num_cells();
        let mut masks: Vec<Vec<bool>> = Vec::with_capacity(self.generations.len());
        for (k, generation) in self.generations.iter().enumerate() {
            let mut mask = vec![false; n];
            for q in generation {
                if !self.root.contains(q) || q == &self.root {
                    return Err(format!("{q} is not a proper subcube of the root"));
                }
                for c in grid.cell_range(q) {
                    if mask[c] {
                        return Err(format!("generation {k} overlaps at cell {c}"));
                    }
                    mask[c] = true;
                }
            }
            if let Some(prev) = masks.last() {
                if let Some(c) = (0..n).find(|&c| mask[c] && !prev[c]) {
                    return Err(format!("Ω_{k} not inside Ω_{} at cell {c}", k - 1));
                }
            }
            masks.push(mask);
        }
        for (k, generation) in self.generations.iter().enumerate() {
            let Some(next) = masks.get(k + 1) else { break };
            for q in generation {
                let range = grid.cell_range(q);
                let inside = range.clone().filter(|&c| next[c]).count();
                if 2 * inside > range.len() {
                    return Err(format!("|{q} ∩ Ω_{}| = {inside} of {} cells", k + 1, range.len()));
                }
            }
        }
        Ok(())
    }
}

/// Stopping cubes of `p`: the maximal `Q' ⊊ P` where the exceptional set
/// `E(P) = {|f - m_f(P)| > ((f - m_f(P)) 1_P)^*(λ_d |P|)}` has density above
/// `2^{-d-1}`.
///
/// `|E(P)| ≤ λ_d |P|` and each stopping cube holds more than `2^{-d-1}` of
/// its measure in `E(P)`, so the stopping cubes cover at most half of `P`.
fn stopping_cubes(f: &GridFunction, segments: &SortedSegments, p: &Cube) -> Vec<Cube> {
    let grid = f.grid();
    if p.level() == grid.depth() {
        return Vec::new();
    }
    let m = lower_median(segments.segment(p));
    let values = f.on(p);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    let allowed = cells_allowed(sparse_lambda(grid.dim()) * values.len() as f64);
    let threshold = *dev.select_nth_unstable_by(allowed, |a, b| b.total_cmp(a)).1;
    let start = grid.cell_range(p).start;
    let exceptional: Vec<u32> =
        values.iter().map(|v| u32::from((v - m).abs() > threshold)).collect();

    // counts of exceptional cells per subcube, per level below p
    let bits = grid.dim();
    let mut counts = vec![exceptional];
    for _ in p.level()..grid.depth() {
        let below = counts.last().unwrap();
        let up = below.chunks_exact(1 << bits).map(|c| c.iter().sum()).collect();
        counts.push(up);
    }
    counts.reverse(); // counts[j] is level p.level() + j

    let mut out = Vec::new();
    let mut stack: Vec<Cube> = p.children_unchecked();
    stack.reverse();
    while let Some(q) = stack.pop() {
        let j = (q.level() - p.level()) as usize;
        let local = grid.cell_range(&q).start - start;
        let cells = grid.cells_in(&q);
        let count = counts[j][local / cells] as usize;
        if (count << (bits + 1)) > cells {
            out.push(q);
        } else if q.level() < grid.depth() && count > 0 {
            let mut kids = q.children_unchecked();
            kids.reverse();
            stack.extend(kids);
        }
    }
    out.sort();
    out
}

/// The generations of stopping cubes, obtained by applying the stopping
/// rule to `Q_0` and then recursively inside every new cube. Levels strictly
/// increase, so the recursion ends at the finest cells.
pub fn sparse_decomposition(f: &GridFunction, q0: &Cube) -> Result<SparseFamily> {
    f.grid().check(q0)?;
    let segments = SortedSegments::new(f);
    Ok(sparse_from_segments(f, &segments, q0))
}

fn sparse_from_segments(f: &GridFunction, segments: &SortedSegments, q0: &Cube) -> SparseFamily {
    let mut generations = Vec::new();
    let mut parents = vec![*q0];
    loop {
        let mut next: Vec<Cube> =
            parents.iter().flat_map(|p| stopping_cubes(f, segments, p)).collect();
        if next.is_empty() {
            break;
        }
        next.sort();
        generations.push(next.clone());
        parents = next;
    }
    SparseFamily { root: *q0, generations }
}

/// Both sides of the decomposition on `Q_0`, cell by cell.
#[derive(Clone, Debug)]
pub struct Domination {
    pub family: SparseFamily,
    /// `|f - m_f(Q_0)|` on `Q_0`, zero elsewhere.
    pub lhs: GridFunction,
    /// `M^#_{1/4;Q_0} f + Σ ω_{λ_d}(f; Q^(1)) 1_Q` on `Q_0`, zero elsewhere.
    pub rhs: GridFunction,
    /// Smallest `C` with `lhs ≤ C rhs` on `Q_0`; `+∞` if `rhs` vanishes where
    /// `lhs` does not.
    pub constant: f64,
}

pub fn domination(f: &GridFunction, q0: &Cube) -> Result<Domination> {
    let grid = f.grid();
    grid.check(q0)?;
    let segments = SortedSegments::new(f);
    let family = sparse_from_segments(f, &segments, q0);
    let m0 = lower_median(segments.segment(q0));
    let range = grid.cell_range(q0);
    let lhs = GridFunction::from_cells(grid, |c| {
        if range.contains(&c) { (f.values()[c] - m0).abs() } else { 0.0 }
    });
    let mut rhs = sharp_from_segments(&segments, grid, q0, SHARP_LAMBDA);
    let lambda = sparse_lambda(grid.dim());
    for q in family.cubes() {
        let parent = q.parent().expect("family cubes are proper subcubes of the root");
        let w = oscillation_of(&segments, &parent, lambda);
        for v in &mut rhs.values_mut()[grid.cell_range(q)] {
            *v += w;
        }
    }
    let mut constant: f64 = 0.0;
    for c in range {
        let (l, r) = (lhs.values()[c], rhs.values()[c]);
        if l > 0.0 {
            constant = constant.max(if r > 0.0 { l / r } else { f64::INFINITY });
        }
    }
    Ok(Domination { family, lhs, rhs, constant })
}

/// Smallest `C` with `|f - m_f(Q_0)| ≤ C (M^# f + Σ ω 1_Q)` on `Q_0`.
pub fn domination_constant(f: &GridFunction, q0: &Cube) -> Result<f64> {
    domination(f, q0).map(|d| d.constant)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g12() -> Grid {
        Grid::new(1, 2).unwrap()
    }

    fn f(vals: &[f64]) -> GridFunction {
        GridFunction::new(g12(), vals.to_vec()).unwrap()
    }

    #[test]
    fn median_examples() {
        let root = g12().root();
        assert_eq!(median(&f(&[3.0; 4]), &root).unwrap(), 3.0);
        assert_eq!(median(&f(&[1.0, 2.0, 3.0, 4.0]), &root).unwrap(), 2.0);
        assert_eq!(median(&f(&[5.0, 5.0, 0.0, 0.0]), &root).unwrap(), 0.0);
        assert_eq!(lower_median(&[7.0]), 7.0);
        assert_eq!(lower_median(&[1.0, 2.0, 2.0]), 2.0);
    }

    #[test]
    fn rearrangement_examples() {
        let root = g12().root();
        let phi = f(&[3.0, 1.0, 2.0, 0.0]);
        assert_eq!(rearrangement_value(&phi, &root, 0.25).unwrap(), 2.0);
        assert_eq!(rearrangement_value(&phi, &root, 1.0).unwrap(), 0.0);
        assert_eq!(rearrangement_value(&f(&[-1.5; 4]), &root, 0.3).unwrap(), 1.5);
        assert!(matches!(rearrangement_value(&phi, &root, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn oscillation_examples() {
        let root = g12().root();
        assert_eq!(oscillation(&f(&[2.0; 4]), &root, 0.25).unwrap(), 0.0);
        assert_eq!(oscillation(&f(&[1.0, 1.0, 0.0, 0.0]), &root, 0.25).unwrap(), 0.5);
        assert_eq!(oscillation(&f(&[10.0, 0.0, 0.0, 0.0]), &root, 0.25).unwrap(), 0.0);
        assert!(oscillation(&f(&[1.0; 4]), &root, 1.0).is_err());
    }

    #[test]
    fn sharp_maximal_examples() {
        let root = g12().root();
        let step = f(&[1.0, 1.0, 0.0, 0.0]);
        for lambda in [0.125, 0.25] {
            let m = local_sharp_maximal(&step, &root, lambda).unwrap();
            assert_eq!(m.values(), &[0.5; 4]);
        }
        assert_eq!(local_sharp_maximal(&f(&[4.0; 4]), &root, 0.25).unwrap().values(), &[0.0; 4]);
    }

    #[test]
    fn constant_function_has_empty_family() {
        let g = Grid::new(1, 6).unwrap();
        let fam = sparse_decomposition(&GridFunction::constant(g, 2.0), &g.root()).unwrap();
        assert!(fam.is_empty());
        assert_eq!(domination_constant(&GridFunction::constant(g, 2.0), &g.root()).unwrap(), 0.0);
    }

    #[test]
    fn step_function_domination() {
        // E(Q_0) = ∅ at this size: ⌊n/8⌋ = 0 lets no cell exceed the largest
        // deviation, so the family is empty and M^#_{1/4} ≡ ½ carries the bound.
        let step = f(&[1.0, 1.0, 0.0, 0.0]);
        let d = domination(&step, &g12().root()).unwrap();
        assert!(d.family.is_empty());
        assert_eq!(d.constant, 2.0);
    }

    #[test]
    fn spike_generates_stopping_cube() {
        let g = Grid::new(1, 5).unwrap();
        let spike = GridFunction::from_cells(g, |c| if c == 9 { 1.0 } else { 0.0 });
        let fam = sparse_decomposition(&spike, &g.root()).unwrap();
        // the spike is the only exceptional cell; the largest cube where it has
        // density above ¼ is its parent pair
        assert_eq!(fam.generations, vec![vec!["4:4".parse().unwrap()]]);
        fam.verify(&g).unwrap();
        assert!(domination_constant(&spike, &g.root()).unwrap().is_finite());
    }
}
