//! Measures the constants that the acceptance suite freezes.
//!
//! Run with `cargo run --release -p dyadic-lab --example calibrate [section]`
//! where `section` is one of `positive`, `lemma`, `domination`, `testing`,
//! `main`, or nothing for all of them.

use std::time::Instant;

use dyadic_lab::harness::experiments::{probe_functions, truncation_norm_estimate, ProbeConfig, WeightCase};
use dyadic_lab::harness::generators::{generate_weight, random_cube, random_function, random_shift, FunctionKind, WeightSpec};
use dyadic_lab::lerner::{domination_constant, oscillation, sparse_decomposition, SHARP_LAMBDA};
use dyadic_lab::shifts::{build_positive_shift, PositiveShiftSpec};
use dyadic_lab::testing::{max_testing_proposition_ratio, WeightPair};
use dyadic_lab::weights::{ainfty_with_cube, ap_two_weight, dual_weight};
use dyadic_lab::Grid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn positive() {
    let grid = Grid::new(1, 10).unwrap();
    let mut worst: f64 = 0.0;
    let mut by_offset = [0.0f64; 5];
    for seed in 0..24u64 {
        let kind = FunctionKind::ALL[seed as usize % 3];
        let f = random_function(grid, kind, &mut ChaCha8Rng::seed_from_u64(seed));
        let family = sparse_decomposition(&f, &grid.root()).unwrap();
        for i in 1..=5 {
            let s = build_positive_shift(grid, &PositiveShiftSpec::dropping_shallow(&family.generations, i)).unwrap();
            let ratio = s.operator_l2_norm() / i as f64;
            by_offset[i as usize - 1] = by_offset[i as usize - 1].max(ratio);
            worst = worst.max(ratio);
        }
    }
    println!("positive: per offset max ‖S^(i)‖_2 / i = {by_offset:.4?}");
    println!("positive: max ‖S^(i)‖_2 / i = {worst:.6}, 1/max = {:.6}", 1.0 / worst);
}

fn lemma() {
    let grid = Grid::new(1, 8).unwrap();
    for kappa in 1..=3u32 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + kappa as u64);
        let mut worst: f64 = 0.0;
        for trial in 0..100 {
            let m = if trial % 2 == 0 { kappa } else { 0 };
            let n = kappa - m;
            let (s, _) = random_shift(grid, (m, n), 0.6, false, &mut rng).unwrap().normalized();
            let f = random_function(grid, FunctionKind::ALL[trial % 3], &mut rng);
            let q = random_cube(grid, &mut rng);
            let t = s.maximal_truncation(&f).unwrap();
            let lhs = oscillation(&t, &q, SHARP_LAMBDA).unwrap();
            let abs = f.abs();
            let mut rhs = kappa as f64 * abs.average(&q);
            for i in 1..=kappa.min(q.level()) {
                rhs += abs.average(&q.ancestor(i).unwrap());
            }
            worst = worst.max(lhs / rhs);
        }
        println!("lemma: kappa = {kappa}, C = {worst:.6}");
    }
}

fn domination() {
    for (dim, depth, count) in [(1, 5, 500), (1, 10, 500), (2, 5, 100)] {
        let grid = Grid::new(dim, depth).unwrap();
        let started = Instant::now();
        let mut worst: f64 = 0.0;
        for seed in 0..count {
            let f = random_function(grid, FunctionKind::ALL[seed % 3], &mut ChaCha8Rng::seed_from_u64(seed as u64));
            worst = worst.max(domination_constant(&f, &grid.root()).unwrap());
        }
        println!("domination: d = {dim}, L = {depth}: max C = {worst:.6} ({:?})", started.elapsed());
    }
}

fn testing_at(depth: u32) -> f64 {
    let grid = Grid::new(1, depth).unwrap();
    let mut specs: Vec<WeightSpec> = [-0.9, -0.5, 0.0, 0.5, 0.9].iter().map(|&alpha| WeightSpec::Power { alpha }).collect();
    specs.push("step:2,2,1,1".parse().unwrap());
    specs.push("step:8,1,1,1,1,1,1,8".parse().unwrap());
    let mut worst: f64 = 0.0;
    for spec in &specs {
        let w = generate_weight(spec, grid).unwrap();
        let sigma = dual_weight(&w, 2.0).unwrap();
        let pair = WeightPair::new(&w, &sigma, 2.0).unwrap();
        for seed in 0..4u64 {
            let f = random_function(grid, FunctionKind::ALL[seed as usize % 3], &mut ChaCha8Rng::seed_from_u64(seed));
            let family = sparse_decomposition(&f, &grid.root()).unwrap();
            for i in 1..=2 {
                let s = build_positive_shift(grid, &PositiveShiftSpec::dropping_shallow(&family.generations, i)).unwrap();
                let (r, q) = max_testing_proposition_ratio(&s, &pair).unwrap();
                if r > worst {
                    println!("  L = {depth} {spec} seed {seed} i = {i}: ratio {r:.6} at {q}");
                }
                worst = worst.max(r);
            }
        }
    }
    worst
}

fn testing() {
    for depth in [8, 10] {
        let started = Instant::now();
        let worst = testing_at(depth);
        println!("testing: L = {depth}: max proposition ratio = {worst:.6} ({:?})", started.elapsed());
    }
}

fn main_sweep(nested: bool) {
    let grid = Grid::new(1, 12).unwrap();
    let generations = if nested {
        // [0, 2^-k) for k = 1..L, concentrated at the singularity of x^alpha
        (1..=grid.depth()).map(|k| vec![grid.cube_at(k, 0)]).collect()
    } else {
        let f = random_function(grid, FunctionKind::Walk, &mut ChaCha8Rng::seed_from_u64(0));
        sparse_decomposition(&f, &grid.root()).unwrap().generations
    };
    println!("main: {} family", if nested { "nested" } else { "lerner" });
    let s = build_positive_shift(grid, &PositiveShiftSpec::dropping_shallow(&generations, 1)).unwrap();
    let probes_cfg = ProbeConfig::default();
    for alpha in [0.0, -0.5, -0.9, -0.95, -0.99, -0.995, -0.999, -0.9995, -0.9999, 0.5, 0.9, 0.99, 0.999] {
        let started = Instant::now();
        let w = generate_weight(&WeightSpec::Power { alpha }, grid).unwrap();
        let sigma = dual_weight(&w, 2.0).unwrap();
        let (ap, ap_cube) = ap_two_weight(&w, &sigma, 2.0).unwrap();
        let (aw, _) = ainfty_with_cube(&w, None).unwrap();
        let (asg, _) = ainfty_with_cube(&sigma, None).unwrap();
        let case = WeightCase { id: String::new(), p: 2.0, w, sigma };
        let probes = probe_functions(grid, &[ap_cube], &probes_cfg);
        let best = truncation_norm_estimate(&s, &case, &probes, probes_cfg.power_steps).unwrap();
        let bound = ap.sqrt() * (aw.sqrt() + asg.sqrt());
        println!(
            "main: alpha = {alpha}: [w]_A2 = {ap:.4}, A∞(w) = {aw:.4}, A∞(σ) = {asg:.4}, best = {best:.6}, R = {:.6} ({:?})",
            best / bound,
            started.elapsed()
        );
    }
}

fn main() {
    let section = std::env::args().nth(1).unwrap_or_default();
    let run = |name: &str| section.is_empty() || section == name;
    if run("positive") {
        positive();
    }
    if run("lemma") {
        lemma();
    }
    if run("domination") {
        domination();
    }
    if run("testing") {
        testing();
    }
    if run("main") {
        main_sweep(false);
        main_sweep(true);
    }
}
