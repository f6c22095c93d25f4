//! Portfolio construction toolkit: moment estimation, box-constrained
//! mean-variance optimization, random portfolio search, five-factor
//! regression, Black-Litterman allocation and out-of-sample backtesting.

pub mod backtest;
pub mod blacklitterman;
pub mod error;
pub mod factors;
pub mod linalg;
pub mod market_data;
pub mod montecarlo;
pub mod optimizer;

pub use backtest::BacktestReport;
pub use blacklitterman::{BLPosterior, EquilibriumPrior, MarketPortfolio, ViewSet, ViewSpec};
pub use error::{Error, ErrorCategory, Result};
pub use factors::{FactorPanel, RegressionReport, RobustRegressionReport};
pub use market_data::{MomentEstimates, PriceSeries, ReturnPanel, SplitSpec};
pub use montecarlo::{SimulationConfig, SimulationResult};
pub use optimizer::{Bounds, FrontierPoint, KktReport, Objective, PortfolioWeights};

pub use chrono::NaiveDate;
pub use nalgebra;
