//! Local testing constants, scale-separated and frozen-`A_p` layers,
//! principal cubes, the Carleson sum and the distributional decay profile.
//!
//! The testing constants
//!
//! ```text
//! 𝔖_p  = sup_Q ‖1_Q S(1_Q σ)‖_{L^p(w)} / σ(Q)^{1/p}
//! 𝔖_p* = sup_Q ‖1_Q S*(1_Q w)‖_{L^{p'}(σ)} / w(Q)^{1/p'}
//! ```
//!
//! are evaluated cube by cube with [`HaarShift::localized_apply`], which only
//! touches components at ancestors and subcubes of `Q`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::grid::{Cube, Grid};
use crate::shifts::{HaarShift, Orientation};
use crate::weights::{self, ainfty_with_cube, ap_two_weight, conjugate_exponent, Measure, Weight};

/// `(Σ_{cells of Q} |v|^p u) |cell|` to the power `1/p`.
fn local_lp_norm(values: &[f64], u: &[f64], p: f64, cell_volume: f64) -> f64 {
    let s: f64 = values.iter().zip(u).map(|(v, u)| v.abs().powf(p) * u).sum();
    (s * cell_volume).powf(1.0 / p)
}

fn check_same_grid(s: &HaarShift, w: &Weight, sigma: &Weight) -> Result<Grid> {
    let grid = s.grid();
    if w.grid() != grid || sigma.grid() != grid {
        return Err(Error::GridMismatch("shift and weights on different grids".into()));
    }
    Ok(grid)
}

/// The ratio whose supremum over `Q` is the testing constant in the given
/// direction: forward uses `1_Q σ` and `L^p(w)`, adjoint uses `1_Q w` and
/// `L^{p'}(σ)`.
pub fn local_testing_ratio(
    s: &HaarShift,
    w: &Weight,
    sigma: &Weight,
    p: f64,
    orientation: Orientation,
    q: &Cube,
) -> Result<f64> {
    let p_dual = conjugate_exponent(p)?;
    let grid = check_same_grid(s, w, sigma)?;
    grid.check(q)?;
    Ok(testing_ratio_unchecked(s, w, sigma, p, p_dual, orientation, q))
}

fn testing_ratio_unchecked(
    s: &HaarShift,
    w: &Weight,
    sigma: &Weight,
    p: f64,
    p_dual: f64,
    orientation: Orientation,
    q: &Cube,
) -> f64 {
    let grid = s.grid();
    let (input, output, exponent) = match orientation {
        Orientation::Forward => (sigma, w, p),
        Orientation::Adjoint => (w, sigma, p_dual),
    };
    let local = s.localized_apply(input.sums(), q, orientation);
    let norm = local_lp_norm(&local, &output.values()[grid.cell_range(q)], exponent, grid.cell_volume());
    norm / input.measure(q).powf(1.0 / exponent)
}

/// `𝔖_p` (forward) or `𝔖_p*` (adjoint) and the first cube in canonical
/// order attaining it.
pub fn shift_testing_constant(
    s: &HaarShift,
    w: &Weight,
    sigma: &Weight,
    p: f64,
    orientation: Orientation,
) -> Result<(f64, Cube)> {
    let p_dual = conjugate_exponent(p)?;
    let grid = check_same_grid(s, w, sigma)?;
    let cubes: Vec<Cube> = grid.cubes().collect();
    let scored: Vec<(f64, Cube)> = cubes
        .par_iter()
        .map(|q| (testing_ratio_unchecked(s, w, sigma, p, p_dual, orientation, q), *q))
        .collect();
    Ok(weights::pick_sup(scored).expect("a grid has at least one cube"))
}

/// Lower estimate of the two-weight maximal constant `𝔐_p`:
/// `max_f ‖M(fσ)‖_{L^p(w)} / ‖f‖_{L^p(σ)}` over the probes.
pub fn maximal_norm_estimate(w: &Weight, sigma: &Weight, p: f64, probes: &[GridFunction]) -> Result<f64> {
    conjugate_exponent(p)?;
    if probes.is_empty() {
        return Err(Error::Config("maximal_norm_estimate needs at least one probe".into()));
    }
    if w.grid() != sigma.grid() {
        return Err(Error::GridMismatch("w and sigma on different grids".into()));
    }
    let mut best: f64 = 0.0;
    for f in probes {
        if f.grid() != w.grid() {
            return Err(Error::GridMismatch("probe and weights on different grids".into()));
        }
        let denom = weights::lp_norm(f, Measure::Weighted(sigma), p)?;
        if denom == 0.0 {
            return Err(Error::Domain("probe functions must be nonzero".into()));
        }
        let f_sigma = f.zip_with(sigma.density(), |a, b| a * b)?;
        let m = weights::weighted_maximal(&f_sigma, Measure::Lebesgue, None)?;
        best = best.max(weights::lp_norm(&m, Measure::Weighted(w), p)? / denom);
    }
    Ok(best)
}

/// Splits `cubes` into the `κ+1` classes `{Q : level(Q) ≡ λ mod κ+1}`,
/// `λ = 0..=κ`; distinct side lengths inside one class differ by at least a
/// factor `2^{κ+1}`.
pub fn scale_layers(cubes: &[Cube], kappa: u32) -> Result<Vec<Vec<Cube>>> {
    if kappa == 0 {
        return Err(Error::Domain("complexity kappa must be at least 1".into()));
    }
    let mut classes = vec![Vec::new(); kappa as usize + 1];
    for q in cubes {
        classes[q.level() as usize % (kappa as usize + 1)].push(*q);
    }
    Ok(classes)
}

/// `(w(Q)/|Q|)^{1/p} (σ(Q)/|Q|)^{1/p'}`.
pub fn local_ap_root(w: &Weight, sigma: &Weight, p: f64, p_dual: f64, q: &Cube) -> f64 {
    w.average(q).powf(1.0 / p) * sigma.average(q).powf(1.0 / p_dual)
}

/// The integer `a` with `2^a ≤ r < 2^{a+1}`, exact in floating point.
fn dyadic_floor_log2(r: f64) -> i32 {
    let mut a = r.log2().floor() as i32;
    while 2f64.powi(a + 1) <= r {
        a += 1;
    }
    while 2f64.powi(a) > r {
        a -= 1;
    }
    a
}

/// One frozen-`A_p` layer `𝒦^a` with its principal cubes.
#[derive(Clone, Debug, Serialize)]
pub struct PrincipalForest {
    /// Layer index `a`.
    pub layer: i32,
    /// Scale class `λ` the cubes were drawn from.
    pub lambda: u32,
    /// `𝒦^a` in canonical order.
    pub members: Vec<Cube>,
    /// `𝒫^a_n`, indexed by generation `n`.
    pub principals: Vec<Vec<Cube>>,
    /// `Π(Q)` for every `Q ∈ 𝒦^a`.
    #[serde(skip)]
    pub pi: BTreeMap<Cube, Cube>,
}

impl PrincipalForest {
    pub fn principal_cubes(&self) -> impl Iterator<Item = &Cube> {
        self.principals.iter().flatten()
    }

    pub fn num_principals(&self) -> usize {
        self.principals.iter().map(Vec::len).sum()
    }

    /// `𝒦^a(P) = {Q ∈ 𝒦^a : Π(Q) = P}`.
    pub fn class_of(&self, p: &Cube) -> Vec<Cube> {
        self.members.iter().copied().filter(|q| self.pi.get(q) == Some(p)).collect()
    }

    /// Nearest principal strict ancestor of `q`.
    fn principal_parent(&self, q: &Cube) -> Option<Cube> {
        let is_principal = |c: &Cube| self.pi.get(c) == Some(c);
        (1..=q.level()).map(|i| q.ancestor(i).unwrap()).find(is_principal)
    }

    /// Checks the structural invariants: `Q ⊆ Π(Q) ∈ 𝒫^a`, minimality of
    /// `Π(Q)`, and `σ(P')/|P'| > 2 σ(P)/|P|` for consecutive principal cubes.
    pub fn verify(&self, sigma: &Weight) -> std::result::Result<(), String> {
        for q in &self.members {
            let p = self.pi.get(q).ok_or_else(|| format!("{q} has no principal cube"))?;
            if self.pi.get(p) != Some(p) {
                return Err(format!("Π({q}) = {p} is not principal"));
            }
            if !p.contains(q) {
                return Err(format!("Π({q}) = {p} does not contain it"));
            }
            let mut nearer = (0..q.level() - p.level()).map(|i| q.ancestor(i).unwrap());
            if let Some(c) = nearer.find(|c| self.pi.get(c) == Some(c)) {
                return Err(format!("{c} is a smaller principal cube containing {q}"));
            }
        }
        for (n, generation) in self.principals.iter().enumerate() {
            for p in generation {
                match (n, self.principal_parent(p)) {
                    (0, None) => {}
                    (0, Some(parent)) => return Err(format!("generation-0 cube {p} lies in {parent}")),
                    (_, None) => return Err(format!("{p} in generation {n} has no parent")),
                    (_, Some(parent)) => {
                        if !self.principals[n - 1].contains(&parent) {
                            return Err(format!("{p} in generation {n} but parent {parent} is not in {}", n - 1));
                        }
                        if !(sigma.average(p) > 2.0 * sigma.average(&parent)) {
                            return Err(format!("σ-average of {p} does not exceed twice that of {parent}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Splits `cubes` into the layers `𝒦^a` by `2^a ≤ (w(Q)/|Q|)^{1/p}
/// (σ(Q)/|Q|)^{1/p'} < 2^{a+1}` and builds the principal cubes of each layer.
///
/// Negative layers are merged into one layer at `a_min`, the floor of the
/// base-two logarithm of the smallest ratio. Layers are returned in
/// increasing `a`.
pub fn build_principal_forest(
    cubes: &[Cube],
    lambda: u32,
    w: &Weight,
    sigma: &Weight,
    p: f64,
) -> Result<Vec<PrincipalForest>> {
    let p_dual = conjugate_exponent(p)?;
    if w.grid() != sigma.grid() {
        return Err(Error::GridMismatch("w and sigma on different grids".into()));
    }
    if cubes.is_empty() {
        return Err(Error::Config("build_principal_forest needs at least one cube".into()));
    }
    for q in cubes {
        w.grid().check(q)?;
    }
    let mut sorted = cubes.to_vec();
    sorted.sort();
    sorted.dedup();

    let raw: Vec<i32> = sorted.iter().map(|q| dyadic_floor_log2(local_ap_root(w, sigma, p, p_dual, q))).collect();
    let a_min = raw.iter().copied().min().unwrap().min(0);
    let mut layers: BTreeMap<i32, Vec<Cube>> = BTreeMap::new();
    for (q, a) in sorted.iter().zip(&raw) {
        let a = if *a < 0 { a_min } else { *a };
        layers.entry(a).or_default().push(*q);
    }

    Ok(layers
        .into_iter()
        .map(|(layer, members)| principal_cubes(layer, lambda, members, sigma))
        .collect())
}

/// Top-down stopping construction on one layer; `members` is sorted.
fn principal_cubes(layer: i32, lambda: u32, members: Vec<Cube>, sigma: &Weight) -> PrincipalForest {
    let mut pi: BTreeMap<Cube, Cube> = BTreeMap::new();
    let mut generation_of: BTreeMap<Cube, usize> = BTreeMap::new();
    let mut principals: Vec<Vec<Cube>> = Vec::new();
    for q in &members {
        // ancestors come earlier in canonical order, so their Π is known
        let parent = (1..=q.level())
            .map(|i| q.ancestor(i).unwrap())
            .find(|c| generation_of.contains_key(c));
        let generation = match parent {
            None => Some(0),
            Some(parent) if sigma.average(q) > 2.0 * sigma.average(&parent) => Some(generation_of[&parent] + 1),
            Some(parent) => {
                pi.insert(*q, parent);
                None
            }
        };
        if let Some(n) = generation {
            if principals.len() <= n {
                principals.resize(n + 1, Vec::new());
            }
            principals[n].push(*q);
            generation_of.insert(*q, n);
            pi.insert(*q, *q);
        }
    }
    PrincipalForest { layer, lambda, members, principals, pi }
}

/// `Σ_{P ∈ 𝒫^a} σ(P) / ([σ]_{A_∞} σ(Q_0))` with the characteristic taken
/// over the cubes inside `Q_0`.
pub fn carleson_ratio(forest: &PrincipalForest, sigma: &Weight, q0: &Cube) -> Result<f64> {
    let (ainfty, _) = ainfty_with_cube(sigma, Some(q0))?;
    carleson_ratio_with(forest, sigma, q0, ainfty)
}

/// [`carleson_ratio`] with a precomputed `[σ]_{A_∞}`.
pub fn carleson_ratio_with(forest: &PrincipalForest, sigma: &Weight, q0: &Cube, ainfty: f64) -> Result<f64> {
    sigma.grid().check(q0)?;
    let mut total = 0.0;
    for p in forest.principal_cubes() {
        if !q0.contains(p) {
            return Err(Error::Domain(format!("principal cube {p} is not inside {q0}")));
        }
        total += sigma.measure(p);
    }
    Ok(total / (ainfty * sigma.measure(q0)))
}

/// Level-set measures `w({x ∈ P : |S σ(x)| > t σ(P)/|P|})` and the fitted
/// rate `ĉ` in `measure ≈ A e^{-ĉ t}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayProfile {
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of `-ln(measure)` against `t` over nonempty level
    /// sets; absent with fewer than two of them.
    pub rate: Option<f64>,
}

impl DecayProfile {
    pub fn nonempty_levels(&self) -> usize {
        self.points.iter().filter(|(_, m)| *m > 0.0).count()
    }
}

/// Computes the decay profile of `S σ` on `P`; the shift is expected to be
/// already restricted to `𝒦^a(P)`.
pub fn decay_profile(
    s: &HaarShift,
    sigma: &Weight,
    w: &Weight,
    p: &Cube,
    thresholds: &[f64],
) -> Result<DecayProfile> {
    let grid = check_same_grid(s, w, sigma)?;
    grid.check(p)?;
    if thresholds.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Domain("thresholds must be finite and non-negative".into()));
    }
    if thresholds.windows(2).any(|pair| pair[0] >= pair[1]) {
        return Err(Error::Domain("thresholds must be strictly increasing".into()));
    }
    let values = s.apply(sigma.density())?;
    let range = grid.cell_range(p);
    let mut on_p: Vec<(f64, f64)> =
        values.values()[range.clone()].iter().map(|v| v.abs()).zip(w.values()[range].iter().copied()).collect();
    on_p.sort_by(|a, b| a.0.total_cmp(&b.0));
    // suffix sums of w-mass over cells sorted by |S σ|
    let mut tail = vec![0.0; on_p.len() + 1];
    for j in (0..on_p.len()).rev() {
        tail[j] = tail[j + 1] + on_p[j].1;
    }
    let unit = sigma.average(p);
    let cell = grid.cell_volume();
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let level = t * unit;
            let first = on_p.partition_point(|(v, _)| *v <= level);
            (t, tail[first] * cell)
        })
        .collect();
    let rate = fit_exponential_rate(&points);
    Ok(DecayProfile { points, rate })
}

/// OLS slope of `-ln m` on `t` over the points with `m > 0`.
fn fit_exponential_rate(points: &[(f64, f64)]) -> Option<f64> {
    let data: Vec<(f64, f64)> = points.iter().filter(|(_, m)| *m > 0.0).map(|(t, m)| (*t, -m.ln())).collect();
    if data.len() < 2 {
        return None;
    }
    let n = data.len() as f64;
    let mean_t = data.iter().map(|d| d.0).sum::<f64>() / n;
    let mean_y = data.iter().map(|d| d.1).sum::<f64>() / n;
    let sxx: f64 = data.iter().map(|d| (d.0 - mean_t).powi(2)).sum();
    let sxy: f64 = data.iter().map(|d| (d.0 - mean_t) * (d.1 - mean_y)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Precomputed characteristics of a weight pair, shared by the per-cube
/// ratios below.
#[derive(Clone, Debug)]
pub struct WeightPair<'a> {
    pub w: &'a Weight,
    pub sigma: &'a Weight,
    pub p: f64,
    /// `[w,σ]_{A_p}`.
    pub ap: f64,
    /// `[σ]_{A_∞}`.
    pub ainfty_sigma: f64,
}

impl<'a> WeightPair<'a> {
    pub fn new(w: &'a Weight, sigma: &'a Weight, p: f64) -> Result<WeightPair<'a>> {
        let (ap, _) = ap_two_weight(w, sigma, p)?;
        let (ainfty_sigma, _) = ainfty_with_cube(sigma, None)?;
        Ok(WeightPair { w, sigma, p, ap, ainfty_sigma })
    }

    /// `(1+κ) ([w,σ]_{A_p} [σ]_{A_∞} σ(Q))^{1/p}`.
    pub fn proposition_bound(&self, kappa: u32, q: &Cube) -> f64 {
        (1.0 + kappa as f64) * (self.ap * self.ainfty_sigma * self.sigma.measure(q)).powf(1.0 / self.p)
    }
}

/// `‖1_Q S(1_Q σ)‖_{L^p(w)} / ((1+κ)([w,σ]_{A_p} [σ]_{A_∞} σ(Q))^{1/p})`.
pub fn testing_proposition_ratio(s: &HaarShift, w: &Weight, sigma: &Weight, p: f64, q: &Cube) -> Result<f64> {
    check_same_grid(s, w, sigma)?;
    let pair = WeightPair::new(w, sigma, p)?;
    testing_proposition_ratio_with(s, &pair, q)
}

/// [`testing_proposition_ratio`] with precomputed characteristics.
pub fn testing_proposition_ratio_with(s: &HaarShift, pair: &WeightPair<'_>, q: &Cube) -> Result<f64> {
    let grid = check_same_grid(s, pair.w, pair.sigma)?;
    grid.check(q)?;
    let p_dual = conjugate_exponent(pair.p)?;
    let norm = testing_ratio_unchecked(s, pair.w, pair.sigma, pair.p, p_dual, Orientation::Forward, q)
        * pair.sigma.measure(q).powf(1.0 / pair.p);
    Ok(norm / pair.proposition_bound(s.complexity(), q))
}

/// Largest [`testing_proposition_ratio`] over all cubes, with the first cube
/// attaining it.
pub fn max_testing_proposition_ratio(s: &HaarShift, pair: &WeightPair<'_>) -> Result<(f64, Cube)> {
    let grid = check_same_grid(s, pair.w, pair.sigma)?;
    let cubes: Vec<Cube> = grid.cubes().collect();
    let scored = cubes
        .par_iter()
        .map(|q| testing_proposition_ratio_with(s, pair, q).map(|r| (r, *q)))
        .collect::<Result<Vec<_>>>()?;
    Ok(weights::pick_sup(scored).expect("a grid has at least one cube"))
}

/// `(∫_{Q_0} M_w(1_{Q_0} S(1_{Q_0} σ))^p w)^{1/p} / (𝔖_p σ(Q_0)^{1/p})`, the
/// constant relating the maximal testing quantity to `𝔖_p`.
pub fn maximal_testing_ratio(s: &HaarShift, w: &Weight, sigma: &Weight, p: f64, q0: &Cube, sp: f64) -> Result<f64> {
    let grid = check_same_grid(s, w, sigma)?;
    grid.check(q0)?;
    let mut inner = GridFunction::zeros(grid);
    let range = grid.cell_range(q0);
    inner.values_mut()[range].copy_from_slice(&s.localized_apply(sigma.sums(), q0, Orientation::Forward));
    let m = weights::weighted_maximal(&inner, Measure::Weighted(w), Some(q0))?;
    let norm = weights::lp_norm(&m, Measure::Weighted(w), p)?;
    if sp == 0.0 {
        return Ok(if norm == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(norm / (sp * sigma.measure(q0).powf(1.0 / p)))
}
