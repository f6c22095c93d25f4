//! Regression estimator properties on synthetic five-factor data.

use frontierlab_core::factors::{
    factor_correlations, ols_regress, robust_regress, FactorPanel, FactorUnits, RobustOptions,
};
use frontierlab_core::linalg::eigen_extremes;
use frontierlab_core::NaiveDate;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn panel(rng: &mut ChaCha8Rng, t: usize) -> FactorPanel {
    let sd = [0.010, 0.006, 0.006, 0.004, 0.004];
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut cols: [Vec<f64>; 5] = Default::default();
    for _ in 0..t {
        let common: f64 = z.sample(rng);
        for k in 0..5 {
            // Mild cross-correlation through a shared component.
            let v = 0.3 * common + z.sample(rng);
            cols[k].push(sd[k] * v);
        }
    }
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    FactorPanel::new(
        (0..t).map(|i| start + chrono::Days::new(i as u64)).collect(),
        cols,
        vec![0.0; t],
        FactorUnits::Decimal,
    )
    .unwrap()
}

fn response(p: &FactorPanel, beta: &[f64; 6], noise: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|t| beta[0] + (0..5).map(|k| beta[k + 1] * p.factor(k)[t]).sum::<f64>() + noise[t])
        .collect()
}

#[test]
fn durbin_watson_of_white_noise_averages_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let z = Normal::new(0.0, 0.01).unwrap();
    let runs = 10_000;
    let t = 250;
    let mut total = 0.0;
    for _ in 0..runs {
        let p = panel(&mut rng, t);
        let y: Vec<f64> = (0..t).map(|_| z.sample(&mut rng)).collect();
        let r = ols_regress(&y, &p).unwrap();
        assert!((0.0..=4.0).contains(&r.durbin_watson));
        total += r.durbin_watson;
    }
    let mean = total / runs as f64;
    assert!((mean - 2.0).abs() <= 0.05, "mean DW {mean}");
}

#[test]
fn ols_covers_true_betas_at_three_standard_errors() {
    let beta = [0.0, 0.81, -0.09, 0.20, 0.12, -0.03];
    let mut covered = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = panel(&mut rng, 520);
        let z = Normal::new(0.0, 0.002).unwrap();
        let noise: Vec<f64> = (0..520).map(|_| z.sample(&mut rng)).collect();
        let r = ols_regress(&response(&p, &beta, &noise), &p).unwrap();
        if (1..6).all(|i| (r.coefficients[i] - beta[i]).abs() <= 3.0 * r.std_errors[i]) {
            covered += 1;
        }
    }
    assert!(covered >= 95, "{covered} of 100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noiseless_data_is_recovered_by_both_estimators(
        seed in any::<u64>(),
        beta in prop::array::uniform6(-1.5f64..1.5),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = panel(&mut rng, 120);
        let mut beta = beta;
        beta[0] *= 1e-3;
        let y = response(&p, &beta, &vec![0.0; 120]);
        let ols = ols_regress(&y, &p).unwrap();
        let rob = robust_regress(&y, &p, &RobustOptions::default()).unwrap();
        for (i, truth) in beta.iter().enumerate() {
            prop_assert!((ols.coefficients[i] - truth).abs() <= 1e-8);
            prop_assert!((rob.coefficients[i] - truth).abs() <= 1e-8);
        }
    }

    #[test]
    fn report_invariants_hold(seed in any::<u64>(), noise in 1e-4f64..0.02, t in 8usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = panel(&mut rng, t);
        let z = Normal::new(0.0, noise).unwrap();
        let e: Vec<f64> = (0..t).map(|_| z.sample(&mut rng)).collect();
        let y = response(&p, &[0.0, 0.9, 0.1, 0.0, -0.2, 0.1], &e);
        let r = ols_regress(&y, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.r_squared));
        prop_assert!(r.adj_r_squared <= r.r_squared);
        prop_assert!((0.0..=4.0).contains(&r.durbin_watson));
        prop_assert!(r.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert_eq!(r.n_obs, t);
    }

    #[test]
    fn huber_weights_are_one_exactly_inside_the_band(seed in any::<u64>(), outliers in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = panel(&mut rng, 150);
        let z = Normal::new(0.0, 0.003).unwrap();
        let mut e: Vec<f64> = (0..150).map(|_| z.sample(&mut rng)).collect();
        for k in 0..outliers {
            e[k * 23] += 0.05;
        }
        let y = response(&p, &[0.0, 1.0, 0.0, 0.3, 0.0, 0.0], &e);
        let r = robust_regress(&y, &p, &RobustOptions::default()).unwrap();
        for (w, res) in r.weights.iter().zip(&r.residuals) {
            if res.abs() <= r.tuning_constant * r.scale {
                prop_assert_eq!(*w, 1.0);
            } else {
                prop_assert!(*w < 1.0 && *w > 0.0);
            }
        }
    }

    #[test]
    fn correlation_matrix_is_psd(seed in any::<u64>(), t in 3usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = factor_correlations(&panel(&mut rng, t)).unwrap().matrix;
        prop_assert!(eigen_extremes(&c).0 >= -1e-10);
        for i in 0..5 {
            prop_assert_eq!(c[(i, i)], 1.0);
        }
    }
}
