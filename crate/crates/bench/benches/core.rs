use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use frontierlab_bench::{moments, prior_and_views, regression_data};
use frontierlab_core::blacklitterman::posterior;
use frontierlab_core::factors::{ols_regress, robust_regress, RobustOptions};
use frontierlab_core::montecarlo::simulate_search;
use frontierlab_core::montecarlo::SearchObjective;
use frontierlab_core::optimizer::{solve_gmv, trace_frontier, Bounds};
use frontierlab_core::SimulationConfig;

fn optimizer(c: &mut Criterion) {
    let mut g = c.benchmark_group("gmv");
    for n in [10, 50, 100] {
        let m = moments(n, 1);
        let b = Bounds::new(vec![0.0; n], vec![(3.0 / n as f64).min(1.0); n]).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| solve_gmv(&m, &b).unwrap())
        });
    }
    g.finish();

    let m = moments(10, 2);
    let b = Bounds::new(vec![0.0; 10], vec![0.15; 10]).unwrap();
    c.bench_function("frontier_50_points_10_assets", |bench| {
        bench.iter(|| trace_frontier(&m, &b, 50).unwrap())
    });
}

fn montecarlo(c: &mut Criterion) {
    let m = moments(5, 3);
    let mut cfg = SimulationConfig::new(100_000, Bounds::long_only(5), SearchObjective::MinVariance);
    cfg.seed = 42;
    c.bench_function("simulate_100k_5_assets", |bench| {
        bench.iter(|| simulate_search(&m, &cfg).unwrap())
    });
}

fn regression(c: &mut Criterion) {
    let (y, panel) = regression_data(520, 4);
    c.bench_function("ols_520_days", |bench| bench.iter(|| ols_regress(&y, &panel).unwrap()));
    let opts = RobustOptions::default();
    c.bench_function("huber_520_days", |bench| {
        bench.iter(|| robust_regress(&y, &panel, &opts).unwrap())
    });
}

fn blacklitterman(c: &mut Criterion) {
    let (prior, views) = prior_and_views(11, 3, 5);
    c.bench_function("bl_posterior_11_assets_3_views", |bench| {
        bench.iter(|| posterior(&prior, &views).unwrap())
    });
}

criterion_group!(benches, optimizer, montecarlo, regression, blacklitterman);
criterion_main!(benches);
