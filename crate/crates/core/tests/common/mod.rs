//! Test-side reference implementations, written from the definitions and
//! independent of the library's evaluation engine.

#![allow(dead_code)]

use dyadic_lab::shifts::HaarProfile;
use dyadic_lab::{Cube, Grid, GridFunction, HaarShift};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer coordinates of a cell at the finest level.
fn cell_coords(grid: Grid, cell: usize) -> [u32; 2] {
    let q = grid.cell_cube(cell);
    let idx = q.index();
    [idx[0], if idx.len() > 1 { idx[1] } else { 0 }]
}

/// Value of `profile` on `cube` at `cell`, zero outside the cube. Children
/// are numbered lexicographically: first coordinate major.
pub fn profile_at(grid: Grid, cube: &Cube, profile: &HaarProfile, cell: usize) -> f64 {
    let [x, y] = cell_coords(grid, cell);
    let shift = grid.depth() - cube.level();
    let idx = cube.index();
    let inside = (x >> shift) == idx[0] && (grid.dim() == 1 || (y >> shift) == idx[1]);
    if !inside {
        return 0.0;
    }
    match profile {
        HaarProfile::Constant(c) => *c,
        HaarProfile::PerChild(v) => {
            if shift == 0 {
                return v[0];
            }
            let bx = ((x >> (shift - 1)) & 1) as usize;
            let j = if grid.dim() == 1 { bx } else { bx * 2 + ((y >> (shift - 1)) & 1) as usize };
            v[j]
        }
    }
}

/// Dense `n × n` matrix of `Σ_{Q: keep(level(Q))} S_Q` acting on cell values,
/// row-major.
pub fn dense_matrix(s: &HaarShift, keep: impl Fn(u32) -> bool) -> Vec<f64> {
    let grid = s.grid();
    let n = grid.num_cells();
    let cell = grid.cell_volume();
    let mut m = vec![0.0; n * n];
    for comp in s.components().iter().filter(|c| keep(c.cube.level())) {
        let vol = comp.cube.side_length().powi(grid.dim() as i32);
        for t in &comp.terms {
            for x in 0..n {
                let kx = profile_at(grid, &t.target, &t.k, x);
                if kx == 0.0 {
                    continue;
                }
                for y in 0..n {
                    let hy = profile_at(grid, &t.source, &t.h, y);
                    m[x * n + y] += s.scale() * kx * hy * cell / vol;
                }
            }
        }
    }
    m
}

pub fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|x| (0..n).map(|y| m[x * n + y] * v[y]).sum()).collect()
}

/// Adjoint action: `(Mᵀ v)`, since the cell volume is already folded in.
pub fn mat_t_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|y| (0..n).map(|x| m[x * n + y] * v[x]).sum()).collect()
}

/// `M_k v` for every level `k`, one dense matrix per level.
pub fn dense_level_outputs(s: &HaarShift, f: &[f64]) -> Vec<Vec<f64>> {
    (0..=s.grid().depth()).map(|k| mat_vec(&dense_matrix(s, |j| j == k), f)).collect()
}

/// Maximal truncation by enumerating every window of levels.
pub fn dense_maximal_truncation(levels: &[Vec<f64>]) -> Vec<f64> {
    let n = levels[0].len();
    let mut out = vec![0.0f64; n];
    for lo in 0..levels.len() {
        for hi in lo..levels.len() {
            for (x, o) in out.iter_mut().enumerate() {
                let sum: f64 = levels[lo..=hi].iter().map(|l| l[x]).sum();
                *o = o.max(sum.abs());
            }
        }
    }
    out
}

pub fn random_values(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_positive(grid: Grid, rng: &mut impl Rng) -> GridFunction {
    GridFunction::from_cells(grid, |_| rng.random_range(0.05..4.0))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Brute-force `[w,σ]_{A_p}` over all cubes, from cell values.
pub fn brute_ap(grid: Grid, w: &[f64], sigma: &[f64], p: f64) -> f64 {
    grid.cubes()
        .map(|q| {
            let r = grid.cell_range(&q);
            let n = r.len() as f64;
            let aw: f64 = w[r.clone()].iter().sum::<f64>() / n;
            let asg: f64 = sigma[r].iter().sum::<f64>() / n;
            aw * asg.powf(p - 1.0)
        })
        .fold(0.0, f64::max)
}

/// Brute-force dyadic maximal function of `|f|` (Lebesgue averages).
pub fn brute_maximal(grid: Grid, f: &[f64]) -> Vec<f64> {
    (0..f.len())
        .map(|x| {
            grid.cubes()
                .filter(|q| grid.cell_range(q).contains(&x))
                .map(|q| {
                    let r = grid.cell_range(&q);
                    f[r.clone()].iter().map(|v| v.abs()).sum::<f64>() / r.len() as f64
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Brute-force `[w]_{A_∞}` over all cubes, localized maximal function.
pub fn brute_ainfty(grid: Grid, w: &[f64]) -> f64 {
    grid.cubes()
        .map(|q| {
            let r = grid.cell_range(&q);
            let local: Vec<f64> = (0..w.len()).map(|x| if r.contains(&x) { w[x] } else { 0.0 }).collect();
            let m: f64 = r
                .clone()
                .map(|x| {
                    grid.subcubes(&q)
                        .filter(|c| grid.cell_range(c).contains(&x))
                        .map(|c| {
                            let rc = grid.cell_range(&c);
                            local[rc.clone()].iter().sum::<f64>() / rc.len() as f64
                        })
                        .fold(0.0, f64::max)
                })
                .sum();
            m / w[r].iter().sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// ω_λ by brute force over candidate constants: every cell value and every
/// midpoint of two cell values.
pub fn brute_oscillation(values: &[f64], lambda: f64) -> f64 {
    let n = values.len();
    let allowed = ((lambda * n as f64) * (1.0 + 1e-12)).floor() as usize;
    let mut candidates: Vec<f64> = values.to_vec();
    for a in values {
        for b in values {
            candidates.push(0.5 * (a + b));
        }
    }
    candidates
        .iter()
        .map(|c| {
            let mut dev: Vec<f64> = values.iter().map(|v| (v - c).abs()).collect();
            dev.sort_by(|a, b| b.total_cmp(a));
            if allowed >= n { 0.0 } else { dev[allowed] }
        })
        .fold(f64::INFINITY, f64::min)
}
