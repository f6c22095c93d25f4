use serde::{Deserialize, Serialize};

use super::ols::{array6, check_inputs, residuals, t_inference, weighted_fit};
use super::{push_kv, FactorPanel, COEFFICIENT_NAMES, N_PARAMS};
use crate::error::{Error, Result};

/// Huber tuning constant giving 95% efficiency under Gaussian errors.
pub const HUBER_TUNING_CONSTANT: f64 = 1.345;

/// Consistency factor turning the median absolute deviation into a
/// Gaussian standard deviation.
const MAD_TO_SIGMA: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustOptions {
    pub tuning_constant: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for RobustOptions {
    fn default() -> Self {
        Self {
            tuning_constant: HUBER_TUNING_CONSTANT,
            max_iterations: 50,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustRegressionReport {
    pub coefficients: [f64; 6],
    pub std_errors: [f64; 6],
    pub t_stats: [f64; 6],
    /// Asymptotic approximations from the Student-t with T−6 degrees of freedom.
    pub p_values: [f64; 6],
    /// Huber weights at the final fit, each in (0, 1].
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub tuning_constant: f64,
    /// Normalized MAD of the final residuals.
    pub scale: f64,
    pub n_obs: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RobustRegressionReport {
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        push_kv(&mut out, "estimator", "huber_irls");
        push_kv(&mut out, "n_obs", self.n_obs);
        for (i, name) in COEFFICIENT_NAMES.iter().enumerate() {
            push_kv(&mut out, &format!("{name}.coef"), self.coefficients[i]);
            push_kv(&mut out, &format!("{name}.std_error"), self.std_errors[i]);
            push_kv(&mut out, &format!("{name}.t_stat"), self.t_stats[i]);
            push_kv(&mut out, &format!("{name}.p_value"), self.p_values[i]);
        }
        push_kv(&mut out, "p_values", "asymptotic");
        push_kv(&mut out, "iterations", self.iterations);
        push_kv(&mut out, "converged", self.converged);
        push_kv(&mut out, "tuning_constant", self.tuning_constant);
        push_kv(&mut out, "scale", self.scale);
        push_kv(
            &mut out,
            "downweighted_obs",
            self.weights.iter().filter(|&&w| w < 1.0).count(),
        );
        out
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Normalized median absolute deviation about the median.
fn mad_scale(e: &[f64]) -> f64 {
    let m = median(e.to_vec());
    median(e.iter().map(|v| (v - m).abs()).collect()) / MAD_TO_SIGMA
}

/// Huber weights `min(1, c·s/|e|)`; all ones when the scale is negligible
/// relative to the response.
fn huber_weights(e: &[f64], scale: f64, c: f64, y_scale: f64) -> Vec<f64> {
    if scale <= 1e-12 * y_scale || scale == 0.0 {
        return vec![1.0; e.len()];
    }
    let cut = c * scale;
    e.iter()
        .map(|&r| if r.abs() <= cut { 1.0 } else { cut / r.abs() })
        .collect()
}

/// Huber M-estimation by iteratively reweighted least squares, started from OLS.
/// Non-convergence is reported through `converged = false`, not an error.
pub fn robust_regress(
    portfolio_excess: &[f64],
    panel: &FactorPanel,
    options: &RobustOptions,
) -> Result<RobustRegressionReport> {
    const CTX: &str = "factors::robust_regress";
    if !(options.tuning_constant > 0.0 && options.tuning_constant.is_finite()) {
        return Err(Error::invalid(CTX, "tuning constant must be positive"));
    }
    if options.max_iterations == 0 || options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::invalid(CTX, "max_iterations and tolerance must be positive"));
    }
    let y = portfolio_excess;
    let x = check_inputs(y, panel, CTX)?;
    let n = y.len();
    let c = options.tuning_constant;
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let (mut beta, _) = weighted_fit(&x, y, None)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;
        let e = residuals(&x, y, &beta);
        let w = huber_weights(&e, mad_scale(&e), c, y_scale);
        let (next, _) = weighted_fit(&x, y, Some(&w))?;
        let change = (&next - &beta).amax();
        beta = next;
        if change < options.tolerance {
            converged = true;
            break;
        }
    }

    let e = residuals(&x, y, &beta);
    let scale = mad_scale(&e);
    let weights = huber_weights(&e, scale, c, y_scale);
    let (_, info_inv) = weighted_fit(&x, y, Some(&weights))?;
    let df = n - N_PARAMS;
    let sigma2 = weights.iter().zip(&e).map(|(w, r)| w * r * r).sum::<f64>() / df as f64;
    let coefficients = array6(beta.iter().copied());
    let std_errors = array6((0..6).map(|i| (sigma2 * info_inv[(i, i)]).max(0.0).sqrt()));
    let (t_stats, p_values) = t_inference(&coefficients, &std_errors, df);

    Ok(RobustRegressionReport {
        coefficients,
        std_errors,
        t_stats,
        p_values,
        weights,
        iterations,
        converged,
        tuning_constant: c,
        scale,
        n_obs: n,
        residuals: e,
    })
}
