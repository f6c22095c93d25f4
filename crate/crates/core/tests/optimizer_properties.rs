//! Optimizer checks against brute-force grid oracles and structural properties.

use frontierlab_core::nalgebra::{DMatrix, DVector};
use frontierlab_core::optimizer::{
    feasible_return_range, kkt_check, solve_gmv, solve_max_sharpe, solve_min_variance_at_return, trace_frontier, Bounds,
};
use frontierlab_core::MomentEstimates;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_moments(rng: &mut ChaCha8Rng, n: usize) -> MomentEstimates {
    let k = n + 2;
    let b = DMatrix::from_fn(k, n, |_, _| rng.random_range(-0.3..0.3));
    let diag = DVector::from_fn(n, |_, _| rng.random_range(0.001..0.05));
    let sigma = b.transpose() * &b / k as f64 + DMatrix::from_diagonal(&diag);
    let mu = DVector::from_fn(n, |_, _| rng.random_range(-0.05..0.25));
    MomentEstimates::new((0..n).map(|i| format!("A{i}")).collect(), mu, sigma, 252).unwrap()
}

/// Upper bounds on a 0.01 lattice so the grid contains points near every feasible weight.
fn random_grid_bounds(rng: &mut ChaCha8Rng, n: usize) -> Bounds {
    loop {
        let upper: Vec<f64> = (0..n).map(|_| rng.random_range(35..=100) as f64 / 100.0).collect();
        if upper.iter().sum::<f64>() >= 1.0 {
            return Bounds::new(vec![0.0; n], upper).unwrap();
        }
    }
}

/// `2·max_j Σ_i |Σ_ij|` bounds `|∇(wᵀΣw)|₁` on the simplex.
fn lipschitz(sigma: &DMatrix<f64>) -> f64 {
    2.0 * (0..sigma.ncols())
        .map(|j| sigma.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn grid_points(steps: usize, bounds: &Bounds) -> Vec<[f64; 3]> {
    let h = 1.0 / steps as f64;
    let mut out = Vec::new();
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let w = [i as f64 * h, j as f64 * h, (steps - i - j) as f64 * h];
            if bounds.contains(&w, 1e-12) {
                out.push(w);
            }
        }
    }
    out
}

#[test]
fn gmv_matches_grid_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let m = random_moments(&mut rng, 3);
        let b = random_grid_bounds(&mut rng, 3);
        let qp = solve_gmv(&m, &b).unwrap();
        let grid_min = grid_points(100, &b)
            .iter()
            .map(|w| m.portfolio_variance(w))
            .fold(f64::INFINITY, f64::min);
        let bound = 2.0 * lipschitz(&m.sigma) * 0.01;
        assert!(qp.objective_value <= grid_min + 1e-12);
        assert!(grid_min - qp.objective_value <= bound);
    }
}

#[test]
fn target_return_matches_segment_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let m = random_moments(&mut rng, 3);
        let b = random_grid_bounds(&mut rng, 3);
        let range = feasible_return_range(&m, &b).unwrap();
        let t = range.min + 0.37 * (range.max - range.min);
        let qp = solve_min_variance_at_return(&m, &b, t).unwrap();
        assert!((m.portfolio_return(&qp.w) - t).abs() <= 1e-8);

        // Feasible set is a segment: parametrize by w0 and solve for w1, w2.
        let mu = m.mu.as_slice();
        let h = 1e-4;
        let mut best = f64::INFINITY;
        for k in 0..=10_000 {
            let w0 = k as f64 * h;
            let w1 = ((t - mu[0] * w0) - mu[2] * (1.0 - w0)) / (mu[1] - mu[2]);
            let w = [w0, w1, 1.0 - w0 - w1];
            if b.contains(&w, 1e-12) {
                best = best.min(m.portfolio_variance(&w));
            }
        }
        let slope = (mu[0] - mu[2]).abs().max((mu[1] - mu[0]).abs()) / (mu[1] - mu[2]).abs();
        let bound = lipschitz(&m.sigma) * h * (2.0 + slope);
        assert!(qp.objective_value <= best + 1e-12, "qp above grid");
        assert!(
            best - qp.objective_value <= bound,
            "grid gap {}",
            best - qp.objective_value
        );
    }
}

#[test]
fn max_sharpe_matches_grid_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 10 {
        let m = random_moments(&mut rng, 3);
        let b = Bounds::long_only(3);
        let rf = 0.02;
        let Ok(qp) = solve_max_sharpe(&m, &b, rf) else { continue };
        let sharpe = |w: &[f64]| (m.portfolio_return(w) - rf) / m.portfolio_variance(w).sqrt();
        let grid = grid_points(200, &b)
            .iter()
            .map(|w| sharpe(w))
            .fold(f64::NEG_INFINITY, f64::max);
        let s = sharpe(&qp.w);
        assert!(s >= grid - 1e-9, "qp {s} below grid {grid}");
        assert!(s - grid <= 1e-4, "qp {s} vs grid {grid}");
        checked += 1;
    }
}

#[test]
fn every_solution_satisfies_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for i in 0..40 {
        let n = 2 + i % 9;
        let m = random_moments(&mut rng, n);
        let cap = rng.random_range((1.0 / n as f64 + 0.01)..1.0);
        let b = Bounds::capped(n, cap).unwrap();
        let gmv = solve_gmv(&m, &b).unwrap();
        assert!(gmv.is_valid());
        let r = kkt_check(&gmv, &m, &b);
        assert!(r.max_residual() <= 1e-6, "gmv {r:?}");
        for p in trace_frontier(&m, &b, 7).unwrap() {
            let r = kkt_check(&p.weights, &m, &b);
            assert!(r.max_residual() <= 1e-6, "frontier {r:?}");
        }
    }
}

#[test]
fn tightening_bounds_never_lowers_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..25 {
        let n = 5;
        let m = random_moments(&mut rng, n);
        let loose = Bounds::capped(n, 0.6).unwrap();
        let tight = Bounds::new(vec![0.0; n], (0..n).map(|_| rng.random_range(0.25..0.6)).collect()).unwrap();
        let a = solve_gmv(&m, &loose).unwrap();
        let b = solve_gmv(&m, &tight).unwrap();
        assert!(b.objective_value >= a.objective_value - 1e-12);

        let r = feasible_return_range(&m, &tight).unwrap();
        let t = 0.5 * (r.min + r.max);
        let a = solve_min_variance_at_return(&m, &loose, t).unwrap();
        let b = solve_min_variance_at_return(&m, &tight, t).unwrap();
        assert!(b.objective_value >= a.objective_value - 1e-12);
    }
}

#[test]
fn frontier_is_unimodal_around_gmv() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..10 {
        let m = random_moments(&mut rng, 6);
        let b = Bounds::capped(6, 0.4).unwrap();
        let f = trace_frontier(&m, &b, 40).unwrap();
        let vols: Vec<f64> = f.iter().map(|p| p.volatility).collect();
        let argmin = (0..vols.len()).min_by(|&a, &c| vols[a].total_cmp(&vols[c])).unwrap();
        for k in 1..=argmin {
            assert!(vols[k] <= vols[k - 1] + 1e-7);
        }
        for k in argmin + 1..vols.len() {
            assert!(vols[k] >= vols[k - 1] - 1e-7);
        }
        let gmv = solve_gmv(&m, &b).unwrap();
        assert!(vols[argmin] >= gmv.volatility() - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gmv_is_scale_equivariant(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_moments(&mut rng, 5);
        let b = Bounds::capped(5, 0.45).unwrap();
        let base = solve_gmv(&m, &b).unwrap();
        let scaled = MomentEstimates::new(
            m.tickers.clone(), m.mu.clone(), &m.sigma * scale, 252).unwrap();
        let p = solve_gmv(&scaled, &b).unwrap();
        for (x, y) in base.w.iter().zip(&p.w) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
        prop_assert!((p.objective_value - scale * base.objective_value).abs()
            <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn gmv_weights_are_valid(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_moments(&mut rng, n);
        let cap = (1.0 / n as f64 + 0.05).min(1.0);
        let b = Bounds::capped(n, cap).unwrap();
        let p = solve_gmv(&m, &b).unwrap();
        prop_assert!(p.is_valid());
        prop_assert!(kkt_check(&p, &m, &b).max_residual() <= 1e-6);
    }
}
