use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::market::EquilibriumPrior;
use super::views::ViewSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::market_data::MomentEstimates;
use crate::optimizer::{solve_mean_variance, Bounds, Objective, PortfolioWeights};

/// Smallest admissible eigenvalue of τΣ relative to its largest.
const PRIOR_CONDITION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BLPosterior {
    pub tickers: Vec<String>,
    pub mu_bl: DVector<f64>,
    pub sigma_bl: DMatrix<f64>,
    pub prior: EquilibriumPrior,
    pub views: ViewSet,
}

/// Covariance used in the allocation utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityCovariance {
    /// Prior Σ.
    #[default]
    Prior,
    /// Posterior Σ_BL.
    Posterior,
}

fn check_dims(prior: &EquilibriumPrior, views: &ViewSet) -> Result<()> {
    if views.p.ncols() != prior.n_assets() {
        return Err(Error::invalid(
            "blacklitterman::posterior",
            format!("views span {} assets, prior has {}", views.p.ncols(), prior.n_assets()),
        ));
    }
    Ok(())
}

fn factor_prior(prior: &EquilibriumPrior) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    let scaled = &prior.sigma * prior.tau;
    let (min, max) = linalg::eigen_extremes(&scaled);
    if min <= PRIOR_CONDITION_FLOOR * max {
        return Err(Error::SingularPrior {
            smallest_eigenvalue: min,
        });
    }
    let chol = Cholesky::new(scaled.clone()).ok_or(Error::SingularPrior {
        smallest_eigenvalue: min,
    })?;
    Ok((scaled, chol))
}

/// `M = (τΣ)⁻¹ + PᵀΩ⁻¹P`, `μ_BL = M⁻¹[(τΣ)⁻¹π + PᵀΩ⁻¹Q]`, `Σ_BL = Σ + M⁻¹`.
///
/// The mean is evaluated as `π + M⁻¹PᵀΩ⁻¹(Q − Pπ)`, algebraically identical,
/// so an empty view set returns π bit for bit.
pub fn posterior(prior: &EquilibriumPrior, views: &ViewSet) -> Result<BLPosterior> {
    check_dims(prior, views)?;
    let (_, chol_prior) = factor_prior(prior)?;
    let n = prior.n_assets();
    let omega_inv = views.omega.map(|w| 1.0 / w);
    let pt_oinv = views.p.transpose() * DMatrix::from_diagonal(&omega_inv);
    let m = linalg::symmetrize(&(chol_prior.inverse() + &pt_oinv * &views.p));
    let chol_m = Cholesky::new(m).ok_or_else(|| {
        Error::numerical(
            "blacklitterman::posterior",
            "posterior precision is not positive definite",
        )
    })?;
    let surprise = &views.q - &views.p * &prior.pi;
    let mu_bl = &prior.pi + chol_m.solve(&(&pt_oinv * surprise));
    let sigma_bl = linalg::symmetrize(&(&prior.sigma + chol_m.inverse()));
    debug_assert_eq!(mu_bl.len(), n);
    Ok(BLPosterior {
        tickers: prior.tickers.clone(),
        mu_bl,
        sigma_bl,
        prior: prior.clone(),
        views: views.clone(),
    })
}

/// `π + τΣPᵀ(PτΣPᵀ + Ω)⁻¹(Q − Pπ)`, solved in the K-dimensional view space.
pub fn posterior_mean_alternative(prior: &EquilibriumPrior, views: &ViewSet) -> Result<DVector<f64>> {
    check_dims(prior, views)?;
    let (scaled, _) = factor_prior(prior)?;
    let s = linalg::symmetrize(&(&views.p * &scaled * views.p.transpose() + views.omega_matrix()));
    let chol = Cholesky::new(s)
        .ok_or_else(|| Error::numerical("blacklitterman::posterior", "view covariance is not positive definite"))?;
    let x = chol.solve(&(&views.q - &views.p * &prior.pi));
    Ok(&prior.pi + scaled * views.p.transpose() * x)
}

/// Maximizes `μ_BLᵀw − (δ/2)·wᵀΣw` subject to `Σw = 1`.
///
/// Without bounds the solution is `(δΣ)⁻¹μ_BL` rescaled to sum to one; with
/// bounds the box-constrained problem goes to the QP solver.
pub fn bl_optimal_weights(
    post: &BLPosterior,
    bounds: Option<&Bounds>,
    covariance: UtilityCovariance,
) -> Result<PortfolioWeights> {
    const CTX: &str = "blacklitterman::bl_optimal_weights";
    let sigma = match covariance {
        UtilityCovariance::Prior => &post.prior.sigma,
        UtilityCovariance::Posterior => &post.sigma_bl,
    };
    let delta = post.prior.delta;
    let moments = MomentEstimates::new(
        post.tickers.clone(),
        post.mu_bl.clone(),
        sigma.clone(),
        post.prior.trading_days,
    )?;
    if let Some(b) = bounds {
        return solve_mean_variance(&moments, b, delta);
    }
    let chol = Cholesky::new(moments.sigma.clone())
        .ok_or_else(|| Error::numerical(CTX, "utility covariance is not positive definite"))?;
    let raw = chol.solve(&post.mu_bl) / delta;
    let total: f64 = raw.sum();
    let gross: f64 = raw.iter().map(|v| v.abs()).sum();
    // NaN totals fail this test too.
    if total.abs().partial_cmp(&(1e-12 * gross)) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::numerical(
            CTX,
            "unconstrained optimal holdings sum to zero and cannot be normalized",
        ));
    }
    let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    Ok(PortfolioWeights {
        tickers: post.tickers.clone(),
        objective_value: moments.portfolio_variance(&w),
        w,
        bounds: None,
        objective: Objective::MeanVariance { risk_aversion: delta },
        ridge: 0.0,
        iterations: 0,
    })
}
