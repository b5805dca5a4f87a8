use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use couette_bench::{mode_problem, random_setup};
use couette_core::dns::{rhs_eval, step, RemeshPolicy};
use couette_core::linear::{evolve_mode_exact, evolve_mode_rk4};
use couette_core::quadrature::{integrate, QuadOptions};
use couette_core::verify::{bilinear_sample, BilinearLemma};
use couette_core::{DomainSpec, Grid};

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("transform");
    for n in [16, 32, 48] {
        let (grid, u) = random_setup(n, 1e-2);
        g.bench_with_input(BenchmarkId::new("to_physical", n), &n, |b, _| {
            b.iter(|| grid.to_physical(black_box(&u.u[0])).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("multiply", n), &n, |b, _| {
            b.iter(|| grid.multiply(black_box(&u.u[0]), black_box(&u.u[1])))
        });
    }
    g.finish();
}

fn dns(c: &mut Criterion) {
    let mut g = c.benchmark_group("dns");
    g.sample_size(10);
    for n in [16, 32] {
        let (grid, u) = random_setup(n, 1e-2);
        g.bench_with_input(BenchmarkId::new("rhs", n), &n, |b, _| b.iter(|| rhs_eval(&grid, black_box(&u), true)));
        g.bench_with_input(BenchmarkId::new("step", n), &n, |b, _| {
            b.iter(|| step(&grid, black_box(&u), 1e-2, true, RemeshPolicy::Auto).unwrap())
        });
    }
    g.finish();
}

fn mode(c: &mut Criterion) {
    let p = mode_problem(1e-3);
    let grid: Vec<f64> = (0..=200).map(|i| 1.0 + (p.t_end - 1.0) * i as f64 / 200.0).collect();
    c.bench_function("mode/exact", |b| b.iter(|| evolve_mode_exact(black_box(&p), &grid).unwrap()));
    let coarse: Vec<f64> = (0..=20).map(|i| 1.0 + (p.t_end - 1.0) * i as f64 / 20.0).collect();
    c.bench_function("mode/rk4", |b| b.iter(|| evolve_mode_rk4(black_box(&p), &coarse, 1e-3).unwrap()));
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-13, max_intervals: 4000 };
    c.bench_function("quadrature/peaked", |b| {
        b.iter(|| integrate(|t| 1.0 / (1.0 + (black_box(40.0) * (t - 0.3)).powi(2)), 0.0, 1.0, opts).unwrap())
    });
}

fn bilinear(c: &mut Criterion) {
    let grid = Grid::new(DomainSpec::new(16, 32, 16, 4.0, 1.0).unwrap()).unwrap();
    let mut g = c.benchmark_group("bilinear_sample");
    g.sample_size(10);
    for lemma in [BilinearLemma::L41, BilinearLemma::L45] {
        g.bench_function(lemma.id(), |b| b.iter(|| bilinear_sample(lemma, &grid, 7, black_box(3), 0.05).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, transforms, dns, mode, bilinear);
criterion_main!(benches);
