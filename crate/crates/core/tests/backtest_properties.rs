//! Backtest metric invariants.

use frontierlab_core::backtest::{max_drawdown, run_backtest, sharpe_ratio};
use frontierlab_core::nalgebra::DMatrix;
use frontierlab_core::optimizer::{Objective, PortfolioWeights};
use frontierlab_core::{NaiveDate, ReturnPanel};
use proptest::prelude::*;

fn panel(tickers: &[String], rows: &[Vec<f64>]) -> ReturnPanel {
    let start = NaiveDate::from_ymd_opt(2025, 10, 1).unwrap();
    ReturnPanel::new(
        tickers.to_vec(),
        (0..rows.len()).map(|i| start + chrono::Days::new(i as u64)).collect(),
        DMatrix::from_fn(rows.len(), tickers.len(), |i, j| rows[i][j]),
    )
    .unwrap()
}

fn weights(tickers: Vec<String>, w: Vec<f64>) -> PortfolioWeights {
    PortfolioWeights {
        tickers,
        w,
        bounds: None,
        objective_value: 0.0,
        objective: Objective::MinVariance,
        ridge: 0.0,
        iterations: 0,
    }
}

proptest! {
    #[test]
    fn monotone_wealth_has_no_drawdown(steps in prop::collection::vec(0.0f64..0.1, 1..200)) {
        let mut wealth = vec![1.0];
        for s in steps {
            let last = *wealth.last().unwrap();
            wealth.push(last * (1.0 + s));
        }
        prop_assert_eq!(max_drawdown(&wealth), 0.0);
    }

    #[test]
    fn drawdown_is_scale_invariant(
        path in prop::collection::vec(0.5f64..2.0, 2..100),
        c in 1e-3f64..1e3,
    ) {
        let scaled: Vec<f64> = path.iter().map(|v| v * c).collect();
        let a = max_drawdown(&path);
        prop_assert!(a <= 0.0);
        prop_assert!((a - max_drawdown(&scaled)).abs() <= 1e-12);
    }

    #[test]
    fn sharpe_is_antisymmetric(daily in prop::collection::vec(-0.05f64..0.05, 3..100)) {
        let neg: Vec<f64> = daily.iter().map(|r| -r).collect();
        let a = sharpe_ratio(&daily, 0.0, 252);
        let b = sharpe_ratio(&neg, 0.0, 252);
        prop_assume!(a.is_finite());
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn column_permutation_leaves_report_unchanged(
        rows in prop::collection::vec(prop::collection::vec(-0.05f64..0.05, 4), 2..60),
        raw in prop::collection::vec(0.01f64..1.0, 4),
        shift in 1usize..4,
    ) {
        let tickers: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let base = run_backtest(&weights(tickers.clone(), w.clone()), &panel(&tickers, &rows), 0.01).unwrap();

        let perm: Vec<usize> = (0..4).map(|j| (j + shift) % 4).collect();
        let pt: Vec<String> = perm.iter().map(|&j| tickers[j].clone()).collect();
        let pw: Vec<f64> = perm.iter().map(|&j| w[j]).collect();
        let prows: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let moved = run_backtest(&weights(pt, pw), &panel(&tickers_perm(&tickers, &perm), &prows), 0.01).unwrap();

        prop_assert!((base.cumulative_return - moved.cumulative_return).abs() <= 1e-12);
        prop_assert!((base.max_drawdown - moved.max_drawdown).abs() <= 1e-12);
        if base.sharpe.is_finite() {
            prop_assert!((base.sharpe - moved.sharpe).abs() <= 1e-9 * (1.0 + base.sharpe.abs()));
        }
        prop_assert_eq!(base.wealth_curve[0], 1.0);
        prop_assert!((base.cumulative_return - (base.wealth_curve.last().unwrap() - 1.0)).abs() <= 1e-12);
    }
}

fn tickers_perm(t: &[String], perm: &[usize]) -> Vec<String> {
    perm.iter().map(|&j| t[j].clone()).collect()
}
