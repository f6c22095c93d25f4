//! Black-Litterman allocation: a cap-weighted market portfolio with a
//! residual "rest of market" asset, reverse-optimized equilibrium returns,
//! investor views, the posterior, and posterior-optimal weights.

mod market;
mod posterior;
mod views;

pub use market::{
    build_market_portfolio, equilibrium_prior, equilibrium_returns, implied_risk_aversion,
    implied_risk_aversion_from_returns, market_sharpe, sharpe_from_returns, EquilibriumPrior, MarketPortfolio,
    PriorOptions, RiskAversion,
};
pub use posterior::{bl_optimal_weights, posterior, posterior_mean_alternative, BLPosterior, UtilityCovariance};
pub use views::{build_views, parse_views, ViewSet, ViewSpec};
