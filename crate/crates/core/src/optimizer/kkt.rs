//! First-order optimality check that is independent of the solver path.
//!
//! Multipliers are recovered by a nonnegative least-squares fit of the
//! gradient onto the equality rows and the active bound normals; the fit's
//! residual is the stationarity error.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Bounds, Objective, PortfolioWeights};
use crate::market_data::MomentEstimates;

/// Distance to a bound under which the bound counts as active.
pub const ACTIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    pub stationarity_residual: f64,
    pub primal_feasibility_residual: f64,
    pub complementarity_residual: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual
            .max(self.primal_feasibility_residual)
            .max(self.complementarity_residual)
    }
}

fn least_squares(b: &DMatrix<f64>, y: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    let mut x = DVector::zeros(b.ncols());
    if cols.is_empty() {
        return x;
    }
    let sub = b.select_columns(cols);
    let svd = sub.svd(true, true);
    let sol = svd.solve(y, 1e-12).unwrap_or_else(|_| DVector::zeros(cols.len()));
    for (k, &j) in cols.iter().enumerate() {
        x[j] = sol[k];
    }
    x
}

/// Lawson–Hanson NNLS where only the columns flagged in `nonneg` are sign
/// constrained.
fn nnls(b: &DMatrix<f64>, y: &DVector<f64>, nonneg: &[bool]) -> DVector<f64> {
    let k = b.ncols();
    let mut passive: Vec<bool> = nonneg.iter().map(|&c| !c).collect();
    let cols = |p: &[bool]| -> Vec<usize> { (0..k).filter(|&j| p[j]).collect() };
    let mut x = least_squares(b, y, &cols(&passive));
    let tol = 1e-14 * (1.0 + y.amax());
    for _ in 0..(3 * k + 10) {
        let r = y - b * &x;
        let dual = b.transpose() * r;
        let candidate = (0..k)
            .filter(|&j| nonneg[j] && !passive[j] && dual[j] > tol)
            .max_by(|&a, &c| dual[a].total_cmp(&dual[c]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _ in 0..(3 * k + 10) {
            let s = least_squares(b, y, &cols(&passive));
            let blocked: Vec<usize> = (0..k).filter(|&i| nonneg[i] && passive[i] && s[i] <= 0.0).collect();
            if blocked.is_empty() {
                x = s;
                break;
            }
            let alpha = blocked
                .iter()
                .map(|&i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            x = &x + (&s - &x) * alpha;
            for i in 0..k {
                if nonneg[i] && passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

/// KKT residuals of `weights` for the problem recorded in `weights.objective`.
///
/// For [`Objective::MeanVariance`], `moments.mu` must be the expected-return
/// vector the utility was built from.
pub fn kkt_check(weights: &PortfolioWeights, moments: &MomentEstimates, bounds: &Bounds) -> KktReport {
    let n = weights.w.len();
    let w = DVector::from_column_slice(&weights.w);
    let sigma_w = &moments.sigma * &w;
    let (grad, target) = match weights.objective {
        Objective::MeanVariance { risk_aversion } => (sigma_w * risk_aversion - &moments.mu, None),
        Objective::TargetReturn { target } => (sigma_w * 2.0, Some(target)),
        Objective::MaxSharpe { .. } => (sigma_w * 2.0, Some(moments.mu.dot(&w))),
        Objective::MinVariance | Objective::Sampled => (sigma_w * 2.0, None),
    };

    let mut columns: Vec<DVector<f64>> = vec![DVector::from_element(n, 1.0)];
    let mut nonneg = vec![false];
    if target.is_some() {
        columns.push(moments.mu.clone());
        nonneg.push(false);
    }
    let mut active = vec![false; n];
    for i in 0..n {
        let at_lo = (weights.w[i] - bounds.lower[i]).abs() <= ACTIVE_TOLERANCE;
        let at_hi = (bounds.upper[i] - weights.w[i]).abs() <= ACTIVE_TOLERANCE;
        let mut e = DVector::zeros(n);
        match (at_lo, at_hi) {
            (true, true) => {
                e[i] = 1.0;
                columns.push(e);
                nonneg.push(false);
            }
            (true, false) => {
                e[i] = 1.0;
                columns.push(e);
                nonneg.push(true);
            }
            (false, true) => {
                e[i] = -1.0;
                columns.push(e);
                nonneg.push(true);
            }
            (false, false) => continue,
        }
        active[i] = true;
    }
    let b = DMatrix::from_columns(&columns);
    let x = nnls(&b, &grad, &nonneg);
    let residual = &grad - &b * &x;

    let stationarity_residual = residual.amax();
    let complementarity_residual = (0..n)
        .filter(|&i| !active[i])
        .map(|i| residual[i].abs())
        .fold(0.0, f64::max);

    let mut primal: f64 = (weights.w.iter().sum::<f64>() - 1.0).abs();
    if let Some(t) = target {
        primal = primal.max((moments.mu.dot(&w) - t).abs());
    }
    for i in 0..n {
        primal = primal
            .max(bounds.lower[i] - weights.w[i])
            .max(weights.w[i] - bounds.upper[i]);
    }
    KktReport {
        stationarity_residual,
        primal_feasibility_residual: primal.max(0.0),
        complementarity_residual,
    }
}
