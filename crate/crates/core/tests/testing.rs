mod common;

use common::*;
use dyadic_lab::harness::generators::{generate_weight, random_function, random_shift, FunctionKind, WeightSpec};
use dyadic_lab::lerner::sparse_decomposition;
use dyadic_lab::shifts::{build_positive_shift, PositiveShiftSpec};
use dyadic_lab::testing::{
    build_principal_forest, carleson_ratio, decay_profile, local_testing_ratio, maximal_norm_estimate,
    maximal_testing_ratio, scale_layers, shift_testing_constant, WeightPair, max_testing_proposition_ratio,
};
use dyadic_lab::weights::{ap_two_weight, conjugate_exponent, dual_weight};
use dyadic_lab::{Cube, Grid, GridFunction, HaarShift, Orientation, Weight};
use proptest::prelude::*;

/// `‖1_Q S(1_Q u)‖_{L^r(v)} / u(Q)^{1/r}` from the dense matrix.
fn dense_testing(m: &[f64], adjoint: bool, grid: Grid, u: &Weight, v: &Weight, r: f64, q: &Cube) -> f64 {
    let range = grid.cell_range(q);
    let masked: Vec<f64> = (0..grid.num_cells()).map(|x| if range.contains(&x) { u.values()[x] } else { 0.0 }).collect();
    let out = if adjoint { mat_t_vec(m, &masked) } else { mat_vec(m, &masked) };
    let s: f64 = range.clone().map(|x| out[x].abs().powf(r) * v.values()[x]).sum();
    (s * grid.cell_volume()).powf(1.0 / r) / u.measure(q).powf(1.0 / r)
}

#[test]
fn testing_constants_match_dense_reference() {
    let mut r = rng(21);
    for (dim, depth) in [(1, 5), (2, 3)] {
        let grid = Grid::new(dim, depth).unwrap();
        let s = random_shift(grid, (1, 0), 0.7, false, &mut r).unwrap();
        let m = dense_matrix(&s, |_| true);
        let w = Weight::new(random_positive(grid, &mut r)).unwrap();
        let sigma = Weight::new(random_positive(grid, &mut r)).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let pd = conjugate_exponent(p).unwrap();
            let forward = grid.cubes().map(|q| dense_testing(&m, false, grid, &sigma, &w, p, &q)).fold(0.0, f64::max);
            let adjoint = grid.cubes().map(|q| dense_testing(&m, true, grid, &w, &sigma, pd, &q)).fold(0.0, f64::max);
            let (sp, _) = shift_testing_constant(&s, &w, &sigma, p, Orientation::Forward).unwrap();
            let (sp_star, _) = shift_testing_constant(&s, &w, &sigma, p, Orientation::Adjoint).unwrap();
            assert!((sp - forward).abs() <= 1e-12 * forward.max(1.0));
            assert!((sp_star - adjoint).abs() <= 1e-12 * adjoint.max(1.0));
            for q in grid.cubes().take(5) {
                let local = local_testing_ratio(&s, &w, &sigma, p, Orientation::Forward, &q).unwrap();
                assert!((local - dense_testing(&m, false, grid, &sigma, &w, p, &q)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn maximal_testing_ratio_is_at_least_one_over_the_attaining_cube() {
    // M_w g ≥ |g| pointwise, so the ratio on the cube attaining 𝔖_p is ≥ 1
    let mut r = rng(22);
    let grid = Grid::new(1, 6).unwrap();
    let s = random_shift(grid, (1, 0), 0.7, true, &mut r).unwrap();
    let w = Weight::new(random_positive(grid, &mut r)).unwrap();
    let sigma = dual_weight(&w, 2.0).unwrap();
    let (sp, q) = shift_testing_constant(&s, &w, &sigma, 2.0, Orientation::Forward).unwrap();
    assert!(maximal_testing_ratio(&s, &w, &sigma, 2.0, &q, sp).unwrap() >= 1.0 - 1e-12);
}

#[test]
fn maximal_norm_is_at_least_the_identity_bound() {
    // M(fσ) ≥ fσ, hence ‖M(fσ)‖_{L^2(w)} ≥ ‖f‖_{L^2(σ)} when w σ = 1
    let mut r = rng(23);
    let grid = Grid::new(1, 6).unwrap();
    let w = Weight::new(random_positive(grid, &mut r)).unwrap();
    let sigma = dual_weight(&w, 2.0).unwrap();
    let probes: Vec<GridFunction> = (0..4).map(|_| random_positive(grid, &mut r)).collect();
    assert!(maximal_norm_estimate(&w, &sigma, 2.0, &probes).unwrap() >= 1.0 - 1e-12);
    assert!(maximal_norm_estimate(&w, &sigma, 2.0, &[]).is_err());
    assert!(maximal_norm_estimate(&w, &sigma, 2.0, &[GridFunction::zeros(grid)]).is_err());
}

#[test]
fn scale_layers_separate_levels() {
    let grid = Grid::new(1, 6).unwrap();
    let cubes: Vec<Cube> = grid.cubes().collect();
    let classes = scale_layers(&cubes, 2).unwrap();
    assert_eq!(classes.len(), 3);
    for (lambda, class) in classes.iter().enumerate() {
        assert!(class.iter().all(|q| q.level() as usize % 3 == lambda));
    }
    assert!(scale_layers(&cubes, 0).is_err());
}

fn lerner_shift(grid: Grid, seed: u64, i: u32) -> HaarShift {
    let f = random_function(grid, FunctionKind::Walk, &mut rng(seed));
    let family = sparse_decomposition(&f, &grid.root()).unwrap();
    build_positive_shift(grid, &PositiveShiftSpec::dropping_shallow(&family.generations, i)).unwrap()
}

#[test]
fn forests_satisfy_chain_and_layer_bounds() {
    let grid = Grid::new(1, 8).unwrap();
    for spec in ["power:-0.7", "power:0.6", "step:8,1,1,1,1,1,1,8", "random:3:0.5"] {
        let w = generate_weight(&spec.parse().unwrap(), grid).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let sigma = dual_weight(&w, p).unwrap();
            let (ap, _) = ap_two_weight(&w, &sigma, p).unwrap();
            for seed in 0..3 {
                let s = lerner_shift(grid, seed, 1);
                let family: Vec<Cube> = s.components().iter().map(|c| c.cube).collect();
                for (lambda, class) in scale_layers(&family, 1).unwrap().into_iter().enumerate() {
                    if class.is_empty() {
                        continue;
                    }
                    let forests = build_principal_forest(&class, lambda as u32, &w, &sigma, p).unwrap();
                    assert_eq!(forests.iter().map(|f| f.members.len()).sum::<usize>(), class.len());
                    for forest in &forests {
                        forest.verify(&sigma).unwrap();
                        assert!(2f64.powi(forest.layer) <= ap.powf(1.0 / p) * (1.0 + 1e-12));
                        assert!(carleson_ratio(forest, &sigma, &grid.root()).unwrap() <= 2.0);
                        for m in &forest.members {
                            let pi = forest.pi[m];
                            assert!(pi.contains(m));
                            assert!(forest.class_of(&pi).contains(m));
                            assert!(sigma.average(m) <= 2.0 * sigma.average(&pi) * (1.0 + 1e-12) || pi == *m);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn chain_property_doubles_density_along_principal_chains() {
    let grid = Grid::new(1, 8).unwrap();
    let w = generate_weight(&WeightSpec::Power { alpha: -0.8 }, grid).unwrap();
    let sigma = w.clone();
    let cubes: Vec<Cube> = (1..=8).map(|k| grid.cube_at(k, 0)).collect();
    let forests = build_principal_forest(&cubes, 0, &w, &sigma, 2.0).unwrap();
    for forest in &forests {
        forest.verify(&sigma).unwrap();
        for pair in forest.principals.windows(2) {
            for child in &pair[1] {
                let parent = pair[0].iter().find(|p| p.contains(child)).expect("nested generations");
                assert!(sigma.average(child) > 2.0 * sigma.average(parent));
            }
        }
    }
}

#[test]
fn decay_profiles_are_monotone() {
    let grid = Grid::new(1, 8).unwrap();
    let w = generate_weight(&WeightSpec::Power { alpha: -0.5 }, grid).unwrap();
    let s = lerner_shift(grid, 1, 1);
    let thresholds: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
    for q in grid.cubes().filter(|q| q.level() <= 2) {
        let profile = decay_profile(&s, &w, &w, &q, &thresholds).unwrap();
        assert!(profile.points.windows(2).all(|p| p[1].1 <= p[0].1));
        assert!(profile.points[0].1 <= w.measure(&q) * (1.0 + 1e-12));
    }
    assert!(decay_profile(&s, &w, &w, &grid.root(), &[1.0, 0.5]).is_err());
    assert!(decay_profile(&s, &w, &w, &grid.root(), &[-1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn proposition_ratio_stays_below_threshold_on_random_weights(seed in any::<u64>(), rough in 0.0f64..0.6) {
        let grid = Grid::new(1, 7).unwrap();
        let w = generate_weight(&WeightSpec::Randomized { seed, roughness: rough }, grid).unwrap();
        let sigma = dual_weight(&w, 2.0).unwrap();
        let pair = WeightPair::new(&w, &sigma, 2.0).unwrap();
        let s = lerner_shift(grid, seed, 1);
        let (ratio, _) = max_testing_proposition_ratio(&s, &pair).unwrap();
        prop_assert!(ratio.is_finite() && ratio <= 1.0);
    }
}
