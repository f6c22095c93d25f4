//! Out-of-sample evaluation of fixed portfolio weights.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{ReturnPanel, DEFAULT_TRADING_DAYS};
use crate::optimizer::PortfolioWeights;

/// Header of the one-line-per-portfolio summary CSV.
pub const BACKTEST_CSV_HEADER: &str = "portfolio,cumulative_return,sharpe,max_drawdown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rebalance {
    /// Weights reset to target every day.
    #[default]
    Daily,
    /// Initial weights drift with prices.
    BuyAndHold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestOptions {
    /// Annualized risk-free rate.
    pub risk_free: f64,
    pub trading_days: u32,
    pub rebalance: Rebalance,
}

impl Default for BacktestOptions {
    fn default() -> Self {
        Self {
            risk_free: 0.0,
            trading_days: DEFAULT_TRADING_DAYS,
            rebalance: Rebalance::Daily,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub dates: Vec<NaiveDate>,
    /// Daily portfolio log returns.
    pub daily_returns: Vec<f64>,
    pub cumulative_return: f64,
    /// Annualized; NaN when the daily returns have zero dispersion.
    pub sharpe: f64,
    /// Most negative peak-to-trough move, ≤ 0.
    pub max_drawdown: f64,
    /// T+1 values starting at 1.
    pub wealth_curve: Vec<f64>,
    pub annualized_return: f64,
    pub annualized_volatility: f64,
    pub rebalance: Rebalance,
}

impl BacktestReport {
    pub fn csv_row(&self, portfolio: &str) -> String {
        format!(
            "{portfolio},{},{},{}",
            self.cumulative_return, self.sharpe, self.max_drawdown
        )
    }
}

/// `min_t (wealth_t / max_{s≤t} wealth_s − 1)`.
pub fn max_drawdown(wealth: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &v in wealth {
        peak = peak.max(v);
        worst = worst.min(v / peak - 1.0);
    }
    worst
}

/// Annualized Sharpe ratio of daily log returns against an annual risk-free rate:
/// `mean(excess)·d / (sd(excess)·√d)` with the T−1 standard deviation.
pub fn sharpe_ratio(daily: &[f64], risk_free: f64, trading_days: u32) -> f64 {
    let d = trading_days as f64;
    let n = daily.len() as f64;
    let excess: Vec<f64> = daily.iter().map(|r| r - risk_free / d).collect();
    let mean = excess.iter().sum::<f64>() / n;
    let var = excess.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Rounding noise in a constant series is not dispersion.
    if var.sqrt() > 1e-14 * crate::linalg::max_abs(excess.iter().copied()) {
        mean * d / (var.sqrt() * d.sqrt())
    } else {
        f64::NAN
    }
}

/// Column positions of the weight tickers in the panel.
fn columns(tickers: &[String], panel: &ReturnPanel, context: &'static str) -> Result<Vec<usize>> {
    tickers
        .iter()
        .map(|t| {
            panel.ticker_index(t).ok_or_else(|| Error::UnknownAsset {
                context,
                asset: t.clone(),
            })
        })
        .collect()
}

/// Daily log returns of a portfolio held at fixed weights with daily
/// rebalancing: `ln Σᵢ wᵢ·exp(rᵢₜ)`.
pub fn portfolio_log_returns(tickers: &[String], w: &[f64], panel: &ReturnPanel) -> Result<Vec<f64>> {
    let cols = columns(tickers, panel, "backtest::portfolio_log_returns")?;
    let r = panel.returns();
    Ok((0..panel.n_obs())
        .map(|t| {
            cols.iter()
                .zip(w)
                .map(|(&j, &wi)| wi * r[(t, j)].exp())
                .sum::<f64>()
                .ln()
        })
        .collect())
}

fn buy_and_hold_log_returns(cols: &[usize], w: &[f64], panel: &ReturnPanel) -> Vec<f64> {
    let r = panel.returns();
    let mut holdings: Vec<f64> = w.to_vec();
    let mut value: f64 = holdings.iter().sum();
    (0..panel.n_obs())
        .map(|t| {
            for (h, &j) in holdings.iter_mut().zip(cols) {
                *h *= r[(t, j)].exp();
            }
            let next: f64 = holdings.iter().sum();
            let out = (next / value).ln();
            value = next;
            out
        })
        .collect()
}

/// Daily rebalancing, zero risk-free rate and 252 trading days unless overridden.
pub fn run_backtest(weights: &PortfolioWeights, panel: &ReturnPanel, risk_free: f64) -> Result<BacktestReport> {
    run_backtest_with(
        weights,
        panel,
        &BacktestOptions {
            risk_free,
            ..BacktestOptions::default()
        },
    )
}

pub fn run_backtest_with(
    weights: &PortfolioWeights,
    panel: &ReturnPanel,
    options: &BacktestOptions,
) -> Result<BacktestReport> {
    const CTX: &str = "backtest::run_backtest";
    if panel.n_obs() < 2 {
        return Err(Error::InsufficientData {
            context: CTX,
            what: "return observations",
            need: 2,
            got: panel.n_obs(),
        });
    }
    if options.trading_days == 0 {
        return Err(Error::invalid(CTX, "trading_days must be positive"));
    }
    if weights.w.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid(CTX, "non-finite weight"));
    }
    let cols = columns(&weights.tickers, panel, CTX)?;
    let daily = match options.rebalance {
        Rebalance::Daily => portfolio_log_returns(&weights.tickers, &weights.w, panel)?,
        Rebalance::BuyAndHold => buy_and_hold_log_returns(&cols, &weights.w, panel),
    };
    if daily.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid(
            CTX,
            "portfolio value became non-positive; weights must produce positive wealth",
        ));
    }

    let mut wealth = Vec::with_capacity(daily.len() + 1);
    wealth.push(1.0);
    let mut level = 1.0f64;
    for r in &daily {
        level *= r.exp();
        wealth.push(level);
    }
    let d = options.trading_days as f64;
    let n = daily.len() as f64;
    let mean = daily.iter().sum::<f64>() / n;
    let var = daily.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);

    Ok(BacktestReport {
        dates: panel.dates().to_vec(),
        cumulative_return: level - 1.0,
        sharpe: sharpe_ratio(&daily, options.risk_free, options.trading_days),
        max_drawdown: max_drawdown(&wealth),
        wealth_curve: wealth,
        annualized_return: mean * d,
        annualized_volatility: (var * d).sqrt(),
        daily_returns: daily,
        rebalance: options.rebalance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Objective;
    use chrono::Days;
    use nalgebra::DMatrix;

    fn panel(tickers: &[&str], rows: Vec<Vec<f64>>) -> ReturnPanel {
        let start = NaiveDate::from_ymd_opt(2025, 10, 1).unwrap();
        let t = rows.len();
        ReturnPanel::new(
            tickers.iter().map(|s| s.to_string()).collect(),
            (0..t).map(|i| start + Days::new(i as u64)).collect(),
            DMatrix::from_fn(t, tickers.len(), |i, j| rows[i][j]),
        )
        .unwrap()
    }

    fn weights(tickers: &[&str], w: Vec<f64>) -> PortfolioWeights {
        PortfolioWeights {
            tickers: tickers.iter().map(|s| s.to_string()).collect(),
            w,
            bounds: None,
            objective_value: 0.0,
            objective: Objective::MinVariance,
            ridge: 0.0,
            iterations: 0,
        }
    }

    #[test]
    fn constant_return_compounds() {
        let p = panel(&["A"], vec![vec![0.001]; 63]);
        let r = run_backtest(&weights(&["A"], vec![1.0]), &p, 0.0).unwrap();
        assert!((r.cumulative_return - (0.063f64.exp() - 1.0)).abs() < 1e-12);
        assert!((r.cumulative_return - 0.06503).abs() < 1e-5);
        assert_eq!(r.max_drawdown, 0.0);
        assert!(r.sharpe.is_nan());
        assert_eq!(r.wealth_curve[0], 1.0);
        assert_eq!(r.wealth_curve.len(), 64);
    }

    #[test]
    fn single_dip_drawdown() {
        let prices = [100.0f64, 110.0, 99.0, 105.0];
        let rows = prices.windows(2).map(|p| vec![(p[1] / p[0]).ln()]).collect();
        let r = run_backtest(&weights(&["A"], vec![1.0]), &panel(&["A"], rows), 0.0).unwrap();
        assert!((r.max_drawdown - (99.0 / 110.0 - 1.0)).abs() < 1e-12);
        assert!((r.max_drawdown + 0.1).abs() < 1e-12);
        assert!((r.cumulative_return - 0.05).abs() < 1e-12);
    }

    #[test]
    fn rebalancing_modes_differ_only_after_drift() {
        let p = panel(
            &["A", "B"],
            vec![vec![0.05, -0.05], vec![0.02, 0.01], vec![-0.03, 0.04]],
        );
        let w = weights(&["A", "B"], vec![0.5, 0.5]);
        let daily = run_backtest(&w, &p, 0.0).unwrap();
        let hold = run_backtest_with(
            &w,
            &p,
            &BacktestOptions {
                rebalance: Rebalance::BuyAndHold,
                ..BacktestOptions::default()
            },
        )
        .unwrap();
        assert!((daily.daily_returns[0] - hold.daily_returns[0]).abs() < 1e-15);
        assert!((daily.daily_returns[1] - hold.daily_returns[1]).abs() > 1e-6);
        // Buy-and-hold wealth is the weighted sum of asset growth.
        let growth = |j: usize| (0..3).map(|t| p.returns()[(t, j)]).sum::<f64>().exp();
        assert!((hold.wealth_curve[3] - 0.5 * (growth(0) + growth(1))).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let p = panel(&["A"], vec![vec![0.01]; 5]);
        assert!(matches!(
            run_backtest(&weights(&["Z"], vec![1.0]), &p, 0.0),
            Err(Error::UnknownAsset { .. })
        ));
        let short = panel(&["A"], vec![vec![0.01]]);
        assert!(matches!(
            run_backtest(&weights(&["A"], vec![1.0]), &short, 0.0),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn sharpe_against_hand_computation() {
        let daily = [0.01, -0.005, 0.002, 0.007];
        let rf = 0.0252;
        let ex: Vec<f64> = daily.iter().map(|r| r - 0.0001).collect();
        let m = ex.iter().sum::<f64>() / 4.0;
        let sd = (ex.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((sharpe_ratio(&daily, rf, 252) - m * 252f64.sqrt() / sd).abs() < 1e-12);
    }

    #[test]
    fn csv_row_shape() {
        let p = panel(&["A"], vec![vec![0.001]; 3]);
        let r = run_backtest(&weights(&["A"], vec![1.0]), &p, 0.0).unwrap();
        assert_eq!(
            r.csv_row("gmv").split(',').count(),
            BACKTEST_CSV_HEADER.split(',').count()
        );
    }
}
