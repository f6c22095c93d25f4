use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::backtest::portfolio_log_returns;
use crate::error::{Error, Result};
use crate::linalg;
use crate::market_data::{estimate_moments, ReturnPanel, DEFAULT_TRADING_DAYS};

/// Named assets plus one residual asset standing in for the rest of the market.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPortfolio {
    /// Named tickers followed by the residual symbol.
    pub tickers: Vec<String>,
    /// Market-cap proportions, summing to 1; the residual weight is last.
    pub weights: Vec<f64>,
    /// Daily log returns for all N+1 assets.
    pub returns: ReturnPanel,
}

impl MarketPortfolio {
    pub fn residual(&self) -> &str {
        self.tickers.last().expect("market portfolio has a residual asset")
    }

    pub fn weight(&self, ticker: &str) -> Option<f64> {
        self.tickers.iter().position(|t| t == ticker).map(|i| self.weights[i])
    }

    /// Daily log returns of the cap-weighted market.
    pub fn market_returns(&self) -> Vec<f64> {
        portfolio_log_returns(&self.tickers, &self.weights, &self.returns)
            .expect("market tickers index their own panel")
    }
}

/// Weights `cap / total` for every panel ticker and `1 − Σ` for the residual,
/// whose returns come from the single-column `residual_returns`.
pub fn build_market_portfolio(
    asset_caps: &[(String, f64)],
    total_market_cap: f64,
    asset_returns: &ReturnPanel,
    residual_returns: &ReturnPanel,
) -> Result<MarketPortfolio> {
    const CTX: &str = "blacklitterman::build_market_portfolio";
    if !(total_market_cap > 0.0 && total_market_cap.is_finite()) {
        return Err(Error::invalid(CTX, "total market cap must be positive"));
    }
    if residual_returns.n_assets() != 1 {
        return Err(Error::invalid(CTX, "residual returns must have exactly one column"));
    }
    if residual_returns.dates() != asset_returns.dates() {
        return Err(Error::invalid(
            CTX,
            format!(
                "residual series is misaligned: {} dates vs {} in the asset panel",
                residual_returns.n_obs(),
                asset_returns.n_obs()
            ),
        ));
    }
    for (ticker, cap) in asset_caps {
        if asset_returns.ticker_index(ticker).is_none() {
            return Err(Error::UnknownAsset {
                context: CTX,
                asset: ticker.clone(),
            });
        }
        if !(*cap >= 0.0 && cap.is_finite()) {
            return Err(Error::invalid(
                CTX,
                format!("market cap for {ticker} must be non-negative"),
            ));
        }
    }
    let residual = residual_returns.tickers()[0].clone();
    if asset_returns.ticker_index(&residual).is_some() {
        return Err(Error::invalid(
            CTX,
            format!("residual symbol {residual} is also a named asset"),
        ));
    }
    let caps: Vec<f64> = asset_returns
        .tickers()
        .iter()
        .map(|t| {
            asset_caps
                .iter()
                .find(|(name, _)| name == t)
                .map(|(_, c)| *c)
                .ok_or_else(|| Error::invalid(CTX, format!("no market cap for {t}")))
        })
        .collect::<Result<_>>()?;
    let named: f64 = caps.iter().sum();
    if named > total_market_cap * (1.0 + 1e-12) {
        return Err(Error::invalid(
            CTX,
            format!("asset caps sum to {named}, exceeding the total market cap {total_market_cap}"),
        ));
    }

    let mut weights: Vec<f64> = caps.iter().map(|c| c / total_market_cap).collect();
    weights.push(((total_market_cap - named) / total_market_cap).max(0.0));
    let mut tickers = asset_returns.tickers().to_vec();
    tickers.push(residual);
    let (t, n) = (asset_returns.n_obs(), asset_returns.n_assets());
    let returns = DMatrix::from_fn(t, n + 1, |i, j| {
        if j < n {
            asset_returns.returns()[(i, j)]
        } else {
            residual_returns.returns()[(i, 0)]
        }
    });
    Ok(MarketPortfolio {
        returns: ReturnPanel::new(tickers.clone(), asset_returns.dates().to_vec(), returns)?,
        tickers,
        weights,
    })
}

/// Annualized mean and variance (T−1) of a daily series.
fn annualized(daily: &[f64], trading_days: u32, context: &'static str) -> Result<(f64, f64)> {
    if daily.len() < 2 {
        return Err(Error::InsufficientData {
            context,
            what: "market observations",
            need: 2,
            got: daily.len(),
        });
    }
    let d = f64::from(trading_days);
    let n = daily.len() as f64;
    let mean = daily.iter().sum::<f64>() / n;
    let var = daily.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var.sqrt() <= 1e-14 * linalg::max_abs(daily.iter().copied()) || var == 0.0 {
        return Err(Error::ZeroVariance {
            context,
            name: "market return".into(),
        });
    }
    Ok((mean * d, var * d))
}

/// `(annualized mean − risk_free) / annualized volatility` of daily returns.
pub fn sharpe_from_returns(daily: &[f64], risk_free: f64, trading_days: u32) -> Result<f64> {
    let (mean, var) = annualized(daily, trading_days, "blacklitterman::market_sharpe")?;
    Ok((mean - risk_free) / var.sqrt())
}

pub fn market_sharpe(market: &MarketPortfolio, risk_free: f64, trading_days: u32) -> Result<f64> {
    sharpe_from_returns(&market.market_returns(), risk_free, trading_days)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskAversion {
    /// Annualized excess return over annualized variance.
    pub delta: f64,
    pub excess_return: f64,
    pub variance: f64,
    pub sharpe: f64,
    /// Set when the market excess return is ≤ 0, which inverts the optimization.
    pub non_positive_excess: bool,
}

pub fn implied_risk_aversion_from_returns(daily: &[f64], risk_free: f64, trading_days: u32) -> Result<RiskAversion> {
    let (mean, variance) = annualized(daily, trading_days, "blacklitterman::implied_risk_aversion")?;
    let excess_return = mean - risk_free;
    Ok(RiskAversion {
        delta: excess_return / variance,
        excess_return,
        variance,
        sharpe: excess_return / variance.sqrt(),
        non_positive_excess: excess_return <= 0.0,
    })
}

pub fn implied_risk_aversion(market: &MarketPortfolio, risk_free: f64, trading_days: u32) -> Result<RiskAversion> {
    implied_risk_aversion_from_returns(&market.market_returns(), risk_free, trading_days)
}

/// Reverse optimization `π = δ·Σ·w`.
pub fn equilibrium_returns(delta: f64, sigma: &DMatrix<f64>, market_weights: &DVector<f64>) -> Result<DVector<f64>> {
    if sigma.nrows() != sigma.ncols() || sigma.ncols() != market_weights.len() {
        return Err(Error::invalid(
            "blacklitterman::equilibrium_returns",
            format!(
                "sigma is {}x{} but there are {} weights",
                sigma.nrows(),
                sigma.ncols(),
                market_weights.len()
            ),
        ));
    }
    Ok(sigma * market_weights * delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPrior {
    pub tickers: Vec<String>,
    /// Annualized equilibrium excess returns.
    pub pi: DVector<f64>,
    pub delta: f64,
    pub tau: f64,
    /// Annualized covariance.
    pub sigma: DMatrix<f64>,
    pub market_weights: DVector<f64>,
    pub trading_days: u32,
}

impl EquilibriumPrior {
    /// Validates inputs and sets `π = δΣw`.
    pub fn new(
        tickers: Vec<String>,
        sigma: DMatrix<f64>,
        market_weights: DVector<f64>,
        delta: f64,
        tau: f64,
        trading_days: u32,
    ) -> Result<Self> {
        const CTX: &str = "blacklitterman::EquilibriumPrior";
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(
                CTX,
                format!("risk aversion must be positive, got {delta}"),
            ));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(CTX, format!("tau must be positive, got {tau}")));
        }
        if tickers.len() != market_weights.len() {
            return Err(Error::invalid(CTX, "tickers and market weights differ in length"));
        }
        let sigma = linalg::symmetrize(&sigma);
        let pi = equilibrium_returns(delta, &sigma, &market_weights)?;
        if !linalg::is_psd(&sigma) {
            let (min_eigenvalue, max_eigenvalue) = linalg::eigen_extremes(&sigma);
            return Err(Error::NotPositiveSemidefinite {
                context: CTX,
                min_eigenvalue,
                max_eigenvalue,
            });
        }
        Ok(Self {
            tickers,
            pi,
            delta,
            tau,
            sigma,
            market_weights,
            trading_days,
        })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(
            self.tickers.clone(),
            self.sigma.clone(),
            self.market_weights.clone(),
            self.delta,
            tau,
            self.trading_days,
        )
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorOptions {
    /// Annualized risk-free rate used for δ.
    pub risk_free: f64,
    pub trading_days: u32,
    /// Defaults to 1/T with T the number of return observations.
    pub tau: Option<f64>,
    /// Overrides the implied risk aversion.
    pub delta: Option<f64>,
}

impl Default for PriorOptions {
    fn default() -> Self {
        Self {
            risk_free: 0.0,
            trading_days: DEFAULT_TRADING_DAYS,
            tau: None,
            delta: None,
        }
    }
}

/// Prior from the market portfolio: Σ from the N+1 return panel, δ implied
/// by the market unless overridden. A non-positive implied δ is an error
/// here because it would invert the allocation.
pub fn equilibrium_prior(market: &MarketPortfolio, options: &PriorOptions) -> Result<(EquilibriumPrior, RiskAversion)> {
    let ra = implied_risk_aversion(market, options.risk_free, options.trading_days)?;
    let delta = match options.delta {
        Some(d) => d,
        None if ra.non_positive_excess => {
            return Err(Error::invalid(
                "blacklitterman::equilibrium_prior",
                format!(
                    "market excess return {} is not positive, so the implied risk aversion {} is unusable; supply an explicit delta",
                    ra.excess_return, ra.delta
                ),
            ))
        }
        None => ra.delta,
    };
    let moments = estimate_moments(&market.returns, options.trading_days)?;
    let tau = options.tau.unwrap_or(1.0 / market.returns.n_obs() as f64);
    let prior = EquilibriumPrior::new(
        market.tickers.clone(),
        moments.sigma,
        DVector::from_vec(market.weights.clone()),
        delta,
        tau,
        options.trading_days,
    )?;
    Ok((prior, ra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Days, NaiveDate};

    fn panel(tickers: &[&str], cols: &[Vec<f64>]) -> ReturnPanel {
        let t = cols[0].len();
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        ReturnPanel::new(
            tickers.iter().map(|s| s.to_string()).collect(),
            (0..t).map(|i| start + Days::new(i as u64)).collect(),
            DMatrix::from_fn(t, cols.len(), |i, j| cols[j][i]),
        )
        .unwrap()
    }

    /// Daily series with exact annualized mean `m` and volatility `v` (T−1 variance).
    fn series(m: f64, v: f64, t: usize) -> Vec<f64> {
        let d: f64 = 252.0;
        let s = v / d.sqrt() * ((t as f64 - 1.0) / t as f64).sqrt();
        (0..t).map(|i| m / d + if i % 2 == 0 { s } else { -s }).collect()
    }

    #[test]
    fn half_cap_asset() {
        let a = panel(&["A"], &[vec![0.01, 0.02, -0.01]]);
        let r = panel(&["REST"], &[vec![0.0, 0.01, 0.0]]);
        let m = build_market_portfolio(&[("A".into(), 50.0)], 100.0, &a, &r).unwrap();
        assert_eq!(m.weights, vec![0.5, 0.5]);
        assert_eq!(m.residual(), "REST");
        let full = build_market_portfolio(&[("A".into(), 100.0)], 100.0, &a, &r).unwrap();
        assert_eq!(full.weights, vec![1.0, 0.0]);
    }

    #[test]
    fn market_errors() {
        let a = panel(&["A"], &[vec![0.01, 0.02, -0.01]]);
        let r = panel(&["REST"], &[vec![0.0, 0.01, 0.0]]);
        assert!(build_market_portfolio(&[("A".into(), 150.0)], 100.0, &a, &r).is_err());
        let short = panel(&["REST"], &[vec![0.0, 0.01]]);
        let err = build_market_portfolio(&[("A".into(), 50.0)], 100.0, &a, &short).unwrap_err();
        assert!(err.to_string().contains("misaligned"));
        assert!(matches!(
            build_market_portfolio(&[("Z".into(), 5.0)], 100.0, &a, &r),
            Err(Error::UnknownAsset { .. })
        ));
    }

    #[test]
    fn sharpe_of_known_market() {
        let daily = series(0.10, 0.20, 500);
        assert!((sharpe_from_returns(&daily, 0.0, 252).unwrap() - 0.5).abs() < 1e-12);
        let rf = 0.03;
        let a = sharpe_from_returns(&daily, rf, 252).unwrap();
        let b = sharpe_from_returns(&daily, 2.0 * rf, 252).unwrap();
        assert!((b - (a - rf / 0.20)).abs() < 1e-12);
        assert!(matches!(
            sharpe_from_returns(&[0.001; 20], 0.0, 252),
            Err(Error::ZeroVariance { .. })
        ));
    }

    #[test]
    fn market_sharpe_through_portfolio() {
        let daily = series(0.10, 0.20, 400);
        let a = panel(&["A"], &[daily]);
        let r = panel(&["REST"], &[vec![0.0; 400]]);
        let m = build_market_portfolio(&[("A".into(), 1.0)], 1.0, &a, &r).unwrap();
        assert!((market_sharpe(&m, 0.0, 252).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn risk_aversion_arithmetic_and_homogeneity() {
        let daily = series(0.08, 0.2, 300);
        let ra = implied_risk_aversion_from_returns(&daily, 0.0, 252).unwrap();
        assert!((ra.delta - 2.0).abs() < 1e-10);
        assert!(!ra.non_positive_excess);
        let c = 3.0;
        let scaled: Vec<f64> = daily.iter().map(|r| r * c).collect();
        let rs = implied_risk_aversion_from_returns(&scaled, 0.0, 252).unwrap();
        assert!((rs.delta - ra.delta / c).abs() < 1e-10);
        let neg = implied_risk_aversion_from_returns(&series(-0.02, 0.2, 300), 0.0, 252).unwrap();
        assert!(neg.non_positive_excess && neg.delta < 0.0);
    }

    #[test]
    fn equilibrium_identity_and_zero() {
        let n = 4;
        let w = DVector::from_element(n, 0.25);
        let pi = equilibrium_returns(1.0, &DMatrix::identity(n, n), &w).unwrap();
        assert!(pi.iter().all(|&p| p == 0.25));
        let zero = equilibrium_returns(0.0, &DMatrix::identity(n, n), &w).unwrap();
        assert!(zero.iter().all(|&p| p == 0.0));
        assert!(equilibrium_returns(1.0, &DMatrix::identity(3, 3), &w).is_err());
    }

    #[test]
    fn equilibrium_matches_loop_product() {
        let n = 7;
        let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 50.0 - 0.1);
        let sigma = &b * b.transpose();
        let w = DVector::from_fn(n, |i, _| (i + 1) as f64 / 28.0);
        let delta = 2.7;
        let pi = equilibrium_returns(delta, &sigma, &w).unwrap();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += sigma[(i, j)] * w[j];
            }
            assert!((pi[i] - delta * s).abs() <= 1e-14);
        }
    }

    #[test]
    fn prior_rejects_bad_parameters() {
        let s = DMatrix::identity(2, 2);
        let w = DVector::from_vec(vec![0.5, 0.5]);
        let t = vec!["A".to_string(), "B".to_string()];
        assert!(EquilibriumPrior::new(t.clone(), s.clone(), w.clone(), 2.0, 0.0, 252).is_err());
        assert!(EquilibriumPrior::new(t.clone(), s.clone(), w.clone(), -1.0, 0.1, 252).is_err());
        let p = EquilibriumPrior::new(t, s, w, 2.0, 0.1, 252).unwrap();
        assert_eq!(p.pi.as_slice(), &[1.0, 1.0]);
    }
}
