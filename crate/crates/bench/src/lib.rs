//! Deterministic synthetic inputs shared by the benchmarks.

use frontierlab_core::blacklitterman::build_views;
use frontierlab_core::factors::{FactorPanel, FactorUnits};
use frontierlab_core::nalgebra::{DMatrix, DVector};
use frontierlab_core::{EquilibriumPrior, MomentEstimates, NaiveDate, ViewSet, ViewSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn tickers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("A{i}")).collect()
}

/// Low-rank-plus-diagonal covariance, so every instance is positive definite.
fn covariance(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let k = n + 3;
    let b = DMatrix::from_fn(k, n, |_, _| rng.random_range(-0.3..0.3));
    let d = DVector::from_fn(n, |_, _| rng.random_range(0.005..0.05));
    b.transpose() * &b / k as f64 + DMatrix::from_diagonal(&d)
}

pub fn moments(n: usize, seed: u64) -> MomentEstimates {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = covariance(&mut rng, n);
    let mu = DVector::from_fn(n, |_, _| rng.random_range(0.02..0.25));
    MomentEstimates::new(tickers(n), mu, sigma, 252).expect("synthetic moments are valid")
}

/// Factor panel of `t` days and a response with known exposures plus noise.
pub fn regression_data(t: usize, seed: u64) -> (Vec<f64>, FactorPanel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let sd = [0.010, 0.006, 0.006, 0.004, 0.004];
    let beta = [0.81, -0.09, 0.20, 0.12, -0.03];
    let mut cols: [Vec<f64>; 5] = Default::default();
    let mut y = Vec::with_capacity(t);
    for _ in 0..t {
        let mut r = 0.002 * z.sample(&mut rng);
        for k in 0..5 {
            let f = sd[k] * z.sample(&mut rng);
            cols[k].push(f);
            r += beta[k] * f;
        }
        y.push(r);
    }
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let dates = (0..t).map(|i| start + chrono::Days::new(i as u64)).collect();
    let panel = FactorPanel::new(dates, cols, vec![0.0; t], FactorUnits::Decimal).expect("synthetic panel");
    (y, panel)
}

/// Prior over `n` assets with `k` alternating relative and absolute views.
pub fn prior_and_views(n: usize, k: usize, seed: u64) -> (EquilibriumPrior, ViewSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = covariance(&mut rng, n);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let w = DVector::from_iterator(n, raw.iter().map(|x| x / total));
    let prior = EquilibriumPrior::new(tickers(n), sigma, w, 2.5, 0.05, 252).expect("synthetic prior");
    let specs: Vec<ViewSpec> = (0..k)
        .map(|i| match i % 2 {
            0 => ViewSpec::Relative {
                outperformer: format!("A{}", i % n),
                underperformer: format!("A{}", (i + 1) % n),
                spread: 0.02,
            },
            _ => ViewSpec::Absolute {
                asset: format!("A{}", i % n),
                level: 0.08,
            },
        })
        .collect();
    let views = build_views(&specs, &prior, 1.0).expect("synthetic views");
    (prior, views)
}
