use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use idconc::marginal::abs_moment;
use idconc::pipeline::{self, BoundFamily, BoundRequest, MonteCarloConfig};
use idconc::{chernoff_bound, find_t, rates, Coordinate, LevyMeasure1D};
use idconc_bench::{grid, laplace, poisson_atom};

fn rate_functions(c: &mut Criterion) {
    let m = LevyMeasure1D::symmetric_exponential(1.0).unwrap();
    let coord = Coordinate::new(m.clone());
    let (m2, m4) = (abs_moment(&coord, 2.0).unwrap(), abs_moment(&coord, 4.0).unwrap());

    c.bench_function("find_t laplace", |b| {
        b.iter(|| {
            let g = rates::rate_thm1(&m, 0.6058).unwrap();
            find_t(black_box(&g)).unwrap()
        })
    });
    c.bench_function("thm2 chernoff_bound x=5 (cold)", |b| {
        b.iter(|| {
            let h = rates::rate_thm2(&coord, 2.0, m2, m4).unwrap();
            chernoff_bound(&h, black_box(5.0)).unwrap()
        })
    });
    c.bench_function("cor2 closed form vs generic, 40 points", |b| {
        let atom = LevyMeasure1D::poisson_atom(1.0, 1.0).unwrap();
        let xs = grid(0.01, 1e3, 40);
        b.iter(|| {
            for &x in &xs {
                black_box(rates::bound_cor2(std::slice::from_ref(&atom), 10, 1.0, 3.0, x).unwrap());
            }
        })
    });
}

fn certificates(c: &mut Criterion) {
    let mc = MonteCarloConfig {
        n: 20_000,
        ..Default::default()
    };
    let mut g = c.benchmark_group("certificates");
    g.sample_size(10);
    g.bench_function("thm1 laplace d=10, 40 points", |b| {
        let spec = laplace(10);
        let req = BoundRequest::new(BoundFamily::Thm1, grid(0.5, 20.0, 40));
        b.iter(|| pipeline::bound(&spec, &req, &mc).unwrap())
    });
    g.bench_function("thm2 poisson d=10, 20 points", |b| {
        let spec = poisson_atom(10);
        let req = BoundRequest::new(BoundFamily::Thm2, grid(0.5, 40.0, 20));
        b.iter(|| pipeline::bound(&spec, &req, &mc).unwrap())
    });
    g.finish();
}

criterion_group!(benches, rate_functions, certificates);
criterion_main!(benches);
