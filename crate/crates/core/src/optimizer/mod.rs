//! Box-constrained mean-variance optimization.
//!
//! Every solver reduces to the dense active-set QP in [`qp`], started from a
//! feasible point built by a greedy fill of the bounds. The long-only case
//! (`lower = 0`, `upper = 1`) is modelled as ordinary bounds.

mod kkt;
pub(crate) mod qp;
mod solve;

pub use kkt::{kkt_check, KktReport, ACTIVE_TOLERANCE};
pub use qp::{FEASIBILITY_TOLERANCE, MAX_ITERATIONS, STATIONARITY_TOLERANCE};
pub use solve::{
    feasible_return_range, solve_gmv, solve_max_sharpe, solve_mean_variance, solve_min_variance_at_return,
    trace_frontier, trace_frontier_at, FrontierPoint, ReturnRange, DEFAULT_FRONTIER_POINTS, SHARPE_SWEEP_POINTS,
};

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on the budget and bound invariants of [`PortfolioWeights`].
pub const WEIGHT_TOLERANCE: f64 = 1e-8;

/// Per-asset lower and upper weight limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    /// Validated bounds; assets are named by position in errors.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let names: Vec<String> = (0..lower.len()).map(|i| format!("#{i}")).collect();
        let b = Self { lower, upper };
        b.validate(&names)?;
        Ok(b)
    }

    /// `0 ≤ w ≤ 1` for every asset.
    pub fn long_only(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        }
    }

    /// `0 ≤ w ≤ max_weight` for every asset.
    pub fn capped(n: usize, max_weight: f64) -> Result<Self> {
        Self::new(vec![0.0; n], vec![max_weight; n])
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Checks ranges, ordering and budget feasibility, naming the offending asset.
    pub fn validate(&self, tickers: &[String]) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.len() != tickers.len() {
            return Err(Error::invalid(
                "optimizer",
                format!(
                    "bounds have {} lower and {} upper entries for {} assets",
                    self.lower.len(),
                    self.upper.len(),
                    tickers.len()
                ),
            ));
        }
        for (i, name) in tickers.iter().enumerate() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidBounds {
                    asset: name.clone(),
                    reason: "non-finite bound".into(),
                });
            }
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
                return Err(Error::InvalidBounds {
                    asset: name.clone(),
                    reason: format!("bounds [{lo}, {hi}] outside [0, 1]"),
                });
            }
            if lo > hi {
                return Err(Error::InvalidBounds {
                    asset: name.clone(),
                    reason: format!("lower bound {lo} exceeds upper bound {hi}"),
                });
            }
        }
        let (sum_lo, sum_hi): (f64, f64) = (self.lower.iter().sum(), self.upper.iter().sum());
        if sum_hi < 1.0 - WEIGHT_TOLERANCE {
            return Err(Error::Infeasible(format!(
                "upper bounds sum to {sum_hi} < 1; the budget cannot be met"
            )));
        }
        if sum_lo > 1.0 + WEIGHT_TOLERANCE {
            return Err(Error::Infeasible(format!(
                "lower bounds sum to {sum_lo} > 1; the budget cannot be met"
            )));
        }
        Ok(())
    }

    /// `true` when every weight lies within its bounds up to `tol`.
    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        w.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&lo, &hi))| x >= lo - tol && x <= hi + tol)
    }
}

/// Which optimization produced a set of weights; drives [`kkt_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// Minimize `wᵀΣw`.
    MinVariance,
    /// Minimize `wᵀΣw` subject to `μᵀw = target`.
    TargetReturn { target: f64 },
    /// Maximize `(μᵀw − r_f)/σ_p`.
    MaxSharpe { risk_free: f64 },
    /// Maximize `μᵀw − (δ/2)·wᵀΣw`.
    MeanVariance { risk_aversion: f64 },
    /// Weights found by random search, not by a solver.
    Sampled,
}

/// A budget-constrained allocation plus solver metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioWeights {
    pub tickers: Vec<String>,
    pub w: Vec<f64>,
    /// `None` for budget-only (unconstrained) solutions.
    pub bounds: Option<Bounds>,
    /// Portfolio variance `wᵀΣw` under the un-ridged covariance.
    pub objective_value: f64,
    pub objective: Objective,
    /// Diagonal ridge added to a rank-deficient covariance (0 when none).
    pub ridge: f64,
    pub iterations: usize,
}

impl PortfolioWeights {
    pub fn weight(&self, ticker: &str) -> Option<f64> {
        self.tickers.iter().position(|t| t == ticker).map(|i| self.w[i])
    }

    pub fn volatility(&self) -> f64 {
        self.objective_value.max(0.0).sqrt()
    }

    /// Budget and bound invariants at [`WEIGHT_TOLERANCE`].
    pub fn is_valid(&self) -> bool {
        let sum: f64 = self.w.iter().sum();
        (sum - 1.0).abs() <= WEIGHT_TOLERANCE
            && self
                .bounds
                .as_ref()
                .is_none_or(|b| b.contains(&self.w, WEIGHT_TOLERANCE))
    }
}
