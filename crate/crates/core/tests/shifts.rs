mod common;

use common::*;
use dyadic_lab::harness::generators::random_shift;
use dyadic_lab::shifts::{build_positive_shift, HaarProfile, PositiveShiftSpec, ShiftComponent, ShiftTerm};
use dyadic_lab::{Cube, Grid, GridFunction, HaarShift, Orientation};
use proptest::prelude::*;

fn func(grid: Grid, v: Vec<f64>) -> GridFunction {
    GridFunction::new(grid, v).unwrap()
}

#[test]
fn apply_and_adjoint_match_dense_reference() {
    let mut rng = rng(11);
    for (dim, depth) in [(1, 5), (2, 3)] {
        let grid = Grid::new(dim, depth).unwrap();
        for (m, n) in [(0, 0), (1, 0), (0, 1), (2, 1)] {
            for positive in [false, true] {
                let s = random_shift(grid, (m, n), 0.7, positive, &mut rng).unwrap();
                let dense = dense_matrix(&s, |_| true);
                let f = random_values(grid.num_cells(), &mut rng);
                let sf = s.apply(&func(grid, f.clone())).unwrap();
                let st = s.adjoint_apply(&func(grid, f.clone())).unwrap();
                assert!(max_abs_diff(sf.values(), &mat_vec(&dense, &f)) < 1e-12);
                assert!(max_abs_diff(st.values(), &mat_t_vec(&dense, &f)) < 1e-12);
            }
        }
    }
}

#[test]
fn truncations_match_dense_windows() {
    let mut rng = rng(12);
    let grid = Grid::new(1, 5).unwrap();
    let s = random_shift(grid, (1, 1), 0.8, false, &mut rng).unwrap();
    let f = random_values(grid.num_cells(), &mut rng);
    for lo in 0..=5u32 {
        for hi in lo..=5u32 {
            let upsilon = (-(lo as f64)).exp2();
            let eps = (-(hi as f64)).exp2();
            let got = s.truncated_apply(&func(grid, f.clone()), eps, upsilon).unwrap();
            let want = mat_vec(&dense_matrix(&s, |k| lo <= k && k <= hi), &f);
            assert!(max_abs_diff(got.values(), &want) < 1e-12, "window {lo}..{hi}");
        }
    }
    let natural = s.maximal_truncation(&func(grid, f.clone())).unwrap();
    assert!(max_abs_diff(natural.values(), &dense_maximal_truncation(&dense_level_outputs(&s, &f))) < 1e-12);
}

#[test]
fn empty_window_gives_zero() {
    let grid = Grid::new(1, 4).unwrap();
    let s = HaarShift::martingale_transform(grid);
    let f = GridFunction::constant(grid, 1.0);
    let z = s.truncated_apply(&f, 0.5, 0.25).unwrap();
    assert!(z.values().iter().all(|v| *v == 0.0));
}

#[test]
fn root_average_maps_to_mean() {
    let grid = Grid::new(1, 3).unwrap();
    let f = func(grid, (0..8).map(f64::from).collect());
    let out = HaarShift::root_average(grid).apply(&f).unwrap();
    assert!(out.values().iter().all(|v| (v - 3.5).abs() < 1e-14));
}

#[test]
fn martingale_transform_is_an_isometry_on_mean_zero_functions() {
    let grid = Grid::new(1, 6).unwrap();
    let mut r = rng(3);
    let mut f = random_values(grid.num_cells(), &mut r);
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    f.iter_mut().for_each(|v| *v -= mean);
    let f = func(grid, f);
    let tf = HaarShift::martingale_transform(grid).apply(&f).unwrap();
    assert!((tf.l2_norm() - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
}

#[test]
fn localized_apply_equals_restricted_dense_reference() {
    let mut r = rng(4);
    let grid = Grid::new(1, 5).unwrap();
    let s = random_shift(grid, (1, 0), 0.8, false, &mut r).unwrap();
    let f = random_values(grid.num_cells(), &mut r);
    let dense = dense_matrix(&s, |_| true);
    let sums = dyadic_lab::CubeSums::from_values(grid, &f);
    for q in grid.cubes() {
        let range = grid.cell_range(&q);
        let masked: Vec<f64> = (0..f.len()).map(|x| if range.contains(&x) { f[x] } else { 0.0 }).collect();
        for (orientation, want) in
            [(Orientation::Forward, mat_vec(&dense, &masked)), (Orientation::Adjoint, mat_t_vec(&dense, &masked))]
        {
            let got = s.localized_apply(&sums, &q, orientation);
            assert!(max_abs_diff(&got, &want[range.clone()]) < 1e-12, "{q} {orientation:?}");
        }
    }
}

#[test]
fn shift_documents_round_trip() {
    let mut r = rng(5);
    let grid = Grid::new(2, 3).unwrap();
    let s = random_shift(grid, (1, 1), 0.5, false, &mut r).unwrap();
    let back = HaarShift::from_json(&s.to_json().unwrap()).unwrap();
    assert_eq!(back.components(), s.components());
    assert_eq!(back.complexity_type(), (1, 1));
}

#[test]
fn invalid_shifts_are_rejected() {
    let grid = Grid::new(1, 3).unwrap();
    let q = grid.root();
    let term = |target: Cube, source: Cube, h: HaarProfile| ShiftTerm { target, source, h, k: HaarProfile::Constant(1.0) };
    let deep = Cube::new(1, 2, &[0]).unwrap();
    // target at the wrong depth for type (1, 0)
    let bad_depth = vec![ShiftComponent { cube: q, terms: vec![term(deep, q, HaarProfile::Constant(1.0))] }];
    assert!(HaarShift::new(grid, (1, 0), bad_depth, false).is_err());
    // wrong number of child coefficients
    let child = Cube::new(1, 1, &[0]).unwrap();
    let bad_profile = vec![ShiftComponent { cube: q, terms: vec![term(child, q, HaarProfile::PerChild(vec![1.0; 3]))] }];
    assert!(HaarShift::new(grid, (1, 0), bad_profile, false).is_err());
    // negative coefficient in a positive shift
    let negative = vec![ShiftComponent { cube: q, terms: vec![term(child, q, HaarProfile::Constant(-1.0))] }];
    assert!(HaarShift::new(grid, (1, 0), negative, true).is_err());
}

#[test]
fn positive_shift_has_offset_complexity_and_nonnegative_output() {
    let grid = Grid::new(1, 6).unwrap();
    let generations: Vec<Vec<Cube>> = (1..=5).map(|k| vec![grid.cube_at(k, 0)]).collect();
    for i in 1..=3 {
        let spec = PositiveShiftSpec::dropping_shallow(&generations, i);
        let s = build_positive_shift(grid, &spec).unwrap();
        assert_eq!(s.complexity_type(), (i, 0));
        assert!(s.is_positive());
        let f = GridFunction::from_cells(grid, |c| (c % 5) as f64);
        assert!(s.apply(&f).unwrap().values().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn operator_norm_brackets() {
    let mut r = rng(6);
    let grid = Grid::new(1, 5).unwrap();
    let s = random_shift(grid, (1, 0), 0.7, false, &mut r).unwrap();
    let dense = dense_matrix(&s, |_| true);
    let norm = s.operator_l2_norm();
    let frobenius = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm <= frobenius * (1.0 + 1e-9));
    for _ in 0..20 {
        let f = random_values(grid.num_cells(), &mut r);
        let ratio = l2(&mat_vec(&dense, &f)) / l2(&f);
        assert!(ratio <= norm * (1.0 + 1e-6));
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn duality_holds(seed in any::<u64>(), m in 0u32..3, n in 0u32..3) {
        let mut r = rng(seed);
        let grid = Grid::new(1, 6).unwrap();
        let s = random_shift(grid, (m, n), 0.6, false, &mut r).unwrap();
        let f = func(grid, random_values(grid.num_cells(), &mut r));
        let g = func(grid, random_values(grid.num_cells(), &mut r));
        let lhs = s.apply(&f).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&s.adjoint_apply(&g).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * f.l2_norm() * g.l2_norm());
    }

    #[test]
    fn maximal_truncation_dominates_every_window(seed in any::<u64>()) {
        let mut r = rng(seed);
        let grid = Grid::new(1, 5).unwrap();
        let s = random_shift(grid, (0, 1), 0.7, false, &mut r).unwrap();
        let f = func(grid, random_values(grid.num_cells(), &mut r));
        let natural = s.maximal_truncation(&f).unwrap();
        let full = s.apply(&f).unwrap();
        for (a, b) in natural.values().iter().zip(full.values()) {
            prop_assert!(*a + 1e-12 >= b.abs());
        }
    }

    #[test]
    fn apply_is_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let mut r = rng(seed);
        let grid = Grid::new(1, 5).unwrap();
        let s = random_shift(grid, (1, 1), 0.6, false, &mut r).unwrap();
        let f = func(grid, random_values(grid.num_cells(), &mut r));
        let g = func(grid, random_values(grid.num_cells(), &mut r));
        let combo = f.zip_with(&g, |x, y| a * x + y).unwrap();
        let lhs = s.apply(&combo).unwrap();
        let rhs = s.apply(&f).unwrap().zip_with(&s.apply(&g).unwrap(), |x, y| a * x + y).unwrap();
        prop_assert!(max_abs_diff(lhs.values(), rhs.values()) < 1e-12);
    }
}

fn lerner_generations(grid: Grid, seed: u64) -> Vec<Vec<Cube>> {
    use dyadic_lab::harness::generators::{random_function, FunctionKind};
    let f = random_function(grid, FunctionKind::ALL[seed as usize % 3], &mut rng(seed));
    dyadic_lab::lerner::sparse_decomposition(&f, &grid.root()).unwrap().generations
}

#[test]
fn normalized_positive_shifts_are_contractions() {
    for depth in [8, 10] {
        let grid = Grid::new(1, depth).unwrap();
        for seed in 100..106 {
            let generations = lerner_generations(grid, seed);
            for i in 1..=5 {
                let spec = PositiveShiftSpec::dropping_shallow(&generations, i);
                let s = build_positive_shift(grid, &spec).unwrap().with_scale(spec.normalization());
                assert!(s.operator_l2_norm() <= 1.0, "L={depth} seed {seed} i={i}");
            }
        }
    }
}

#[test]
fn positive_shift_growth_constant_is_stable_in_depth() {
    let worst = |depth: u32| {
        let grid = Grid::new(1, depth).unwrap();
        let mut r = rng(depth as u64);
        let mut c: f64 = 0.0;
        for seed in 0..6 {
            let generations = lerner_generations(grid, seed);
            for i in 1..=4 {
                let s = build_positive_shift(grid, &PositiveShiftSpec::dropping_shallow(&generations, i)).unwrap();
                for _ in 0..4 {
                    let f = func(grid, random_values(grid.num_cells(), &mut r));
                    c = c.max(s.apply(&f).unwrap().l2_norm() / (i as f64 * f.l2_norm()));
                }
            }
        }
        c
    };
    let (shallow, deep) = (worst(6), worst(10));
    assert!(deep <= 2.0 * shallow && shallow <= 2.0 * deep, "C(L=6) = {shallow}, C(L=10) = {deep}");
}
