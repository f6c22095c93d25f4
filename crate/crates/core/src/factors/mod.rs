//! Five-factor (Mkt-RF, SMB, HML, RMW, CMA) attribution of portfolio excess
//! returns by ordinary least squares and Huber-weighted IRLS.

mod ols;
mod panel;
mod robust;

pub use ols::{ols_regress, RegressionReport};
pub use panel::{
    align_excess, factor_correlations, load_factors, parse_factors, CorrelationMatrix, FactorPanel, FactorUnits,
    UnitsHint, FACTOR_NAMES,
};
pub use robust::{robust_regress, RobustOptions, RobustRegressionReport, HUBER_TUNING_CONSTANT};

/// Names of the six regression coefficients, intercept first.
pub const COEFFICIENT_NAMES: [&str; 6] = ["alpha", "beta_mkt", "beta_smb", "beta_hml", "beta_rmw", "beta_cma"];

/// Design-matrix column labels used in rank-deficiency errors.
pub const DESIGN_COLUMNS: [&str; 6] = ["intercept", "Mkt-RF", "SMB", "HML", "RMW", "CMA"];

/// Number of estimated parameters.
pub const N_PARAMS: usize = 6;

/// Appends `key=value` lines; values use shortest round-trip formatting.
pub(crate) fn push_kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(key);
    out.push('=');
    out.push_str(&value.to_string());
    out.push('\n');
}
