use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::qp::{self, QpProblem};
use super::{Bounds, Objective, PortfolioWeights};
use crate::error::{Error, Result};
use crate::linalg;
use crate::market_data::MomentEstimates;

pub const DEFAULT_FRONTIER_POINTS: usize = 50;
/// Grid size of the frontier sweep used to bracket the max-Sharpe return.
pub const SHARPE_SWEEP_POINTS: usize = 64;

/// Tolerance on a requested target lying just outside the feasible interval.
const TARGET_SLACK: f64 = 1e-10;

/// One point of an efficient frontier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub target_return: f64,
    pub volatility: f64,
    pub weights: PortfolioWeights,
}

/// Lowest and highest `μᵀw` attainable under the budget and bounds, with the
/// portfolios attaining them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnRange {
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
}

fn check_inputs(moments: &MomentEstimates, bounds: &Bounds) -> Result<()> {
    bounds.validate(&moments.tickers)?;
    if !linalg::is_psd(&moments.sigma) {
        let (min_eigenvalue, max_eigenvalue) = linalg::eigen_extremes(&moments.sigma);
        return Err(Error::NotPositiveSemidefinite {
            context: "optimizer",
            min_eigenvalue,
            max_eigenvalue,
        });
    }
    Ok(())
}

/// Ridge `1e-10 × trace(Σ)/N` when Σ is numerically rank deficient, else 0.
fn ridge_for(sigma: &DMatrix<f64>) -> f64 {
    let n = sigma.nrows();
    if n == 0 {
        return 0.0;
    }
    let (min, max) = linalg::eigen_extremes(sigma);
    if min > 1e-12 * max.abs() && min > 0.0 {
        return 0.0;
    }
    let avg = sigma.trace() / n as f64;
    if avg > 0.0 {
        1e-10 * avg
    } else {
        1e-10
    }
}

/// Greedy fill: start at the lower bounds and hand out the remaining budget
/// in the given asset order.
fn greedy_fill(bounds: &Bounds, order: &[usize]) -> Vec<f64> {
    let mut w = bounds.lower.clone();
    let mut remaining = 1.0 - w.iter().sum::<f64>();
    for &i in order {
        if remaining <= 0.0 {
            break;
        }
        let room = bounds.upper[i] - bounds.lower[i];
        let add = room.min(remaining);
        w[i] += add;
        remaining -= add;
    }
    w
}

/// Feasible return interval under budget and bounds (a fractional knapsack).
pub fn feasible_return_range(moments: &MomentEstimates, bounds: &Bounds) -> Result<ReturnRange> {
    bounds.validate(&moments.tickers)?;
    let n = moments.n_assets();
    let mu = moments.mu.as_slice();
    let mut desc: Vec<usize> = (0..n).collect();
    desc.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]).then(a.cmp(&b)));
    let mut asc: Vec<usize> = (0..n).collect();
    asc.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]).then(a.cmp(&b)));
    let argmax = greedy_fill(bounds, &desc);
    let argmin = greedy_fill(bounds, &asc);
    Ok(ReturnRange {
        min: linalg::dot(mu, &argmin),
        max: linalg::dot(mu, &argmax),
        argmin,
        argmax,
    })
}

fn finish(
    moments: &MomentEstimates,
    bounds: &Bounds,
    mut w: Vec<f64>,
    objective: Objective,
    ridge: f64,
    iterations: usize,
) -> PortfolioWeights {
    for (x, (&lo, &hi)) in w.iter_mut().zip(bounds.lower.iter().zip(&bounds.upper)) {
        *x = x.clamp(lo, hi);
    }
    PortfolioWeights {
        tickers: moments.tickers.clone(),
        objective_value: moments.portfolio_variance(&w),
        w,
        bounds: Some(bounds.clone()),
        objective,
        ridge,
        iterations,
    }
}

fn variance_hessian(sigma: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let n = sigma.nrows();
    (sigma + DMatrix::from_diagonal_element(n, n, ridge)) * 2.0
}

/// Global minimum-variance portfolio: minimize `wᵀΣw` s.t. `Σw = 1`, bounds.
pub fn solve_gmv(moments: &MomentEstimates, bounds: &Bounds) -> Result<PortfolioWeights> {
    check_inputs(moments, bounds)?;
    let n = moments.n_assets();
    let ridge = ridge_for(&moments.sigma);
    let h = variance_hessian(&moments.sigma, ridge);
    let c = DVector::zeros(n);
    let a = DMatrix::from_element(1, n, 1.0);
    let b = DVector::from_element(1, 1.0);
    let order: Vec<usize> = (0..n).collect();
    let w0 = greedy_fill(bounds, &order);
    let sol = qp::solve(
        &QpProblem {
            h: &h,
            c: &c,
            a: &a,
            b: &b,
            lower: &bounds.lower,
            upper: &bounds.upper,
        },
        &w0,
    )?;
    Ok(finish(
        moments,
        bounds,
        sol.w,
        Objective::MinVariance,
        ridge,
        sol.iterations,
    ))
}

/// Minimum-variance portfolio earning exactly `target` (annualized).
pub fn solve_min_variance_at_return(
    moments: &MomentEstimates,
    bounds: &Bounds,
    target: f64,
) -> Result<PortfolioWeights> {
    check_inputs(moments, bounds)?;
    let range = feasible_return_range(moments, bounds)?;
    solve_at_return(moments, bounds, &range, target)
}

fn solve_at_return(
    moments: &MomentEstimates,
    bounds: &Bounds,
    range: &ReturnRange,
    target: f64,
) -> Result<PortfolioWeights> {
    let slack = TARGET_SLACK * (1.0 + range.min.abs().max(range.max.abs()));
    if !target.is_finite() || target < range.min - slack || target > range.max + slack {
        return Err(Error::TargetOutOfRange {
            target,
            min: range.min,
            max: range.max,
        });
    }
    let target = target.clamp(range.min, range.max);
    let n = moments.n_assets();
    let span = range.max - range.min;
    let w0: Vec<f64> = if span <= f64::EPSILON * (1.0 + range.max.abs()) {
        range.argmin.clone()
    } else {
        let theta = (range.max - target) / span;
        range
            .argmin
            .iter()
            .zip(&range.argmax)
            .map(|(lo, hi)| theta * lo + (1.0 - theta) * hi)
            .collect()
    };
    let ridge = ridge_for(&moments.sigma);
    let h = variance_hessian(&moments.sigma, ridge);
    let c = DVector::zeros(n);
    let mut a = DMatrix::from_element(2, n, 1.0);
    a.row_mut(1).copy_from(&moments.mu.transpose());
    let b = DVector::from_vec(vec![1.0, target]);
    let sol = qp::solve(
        &QpProblem {
            h: &h,
            c: &c,
            a: &a,
            b: &b,
            lower: &bounds.lower,
            upper: &bounds.upper,
        },
        &w0,
    )?;
    Ok(finish(
        moments,
        bounds,
        sol.w,
        Objective::TargetReturn { target },
        ridge,
        sol.iterations,
    ))
}

/// Maximizes `μᵀw − (δ/2)·wᵀΣw` under budget and bounds.
pub fn solve_mean_variance(moments: &MomentEstimates, bounds: &Bounds, risk_aversion: f64) -> Result<PortfolioWeights> {
    check_inputs(moments, bounds)?;
    if !(risk_aversion > 0.0 && risk_aversion.is_finite()) {
        return Err(Error::invalid(
            "optimizer::solve_mean_variance",
            format!("risk aversion must be positive, got {risk_aversion}"),
        ));
    }
    let n = moments.n_assets();
    let ridge = ridge_for(&moments.sigma);
    let h = (&moments.sigma + DMatrix::from_diagonal_element(n, n, ridge)) * risk_aversion;
    let c = -&moments.mu;
    let a = DMatrix::from_element(1, n, 1.0);
    let b = DVector::from_element(1, 1.0);
    let order: Vec<usize> = (0..n).collect();
    let w0 = greedy_fill(bounds, &order);
    let sol = qp::solve(
        &QpProblem {
            h: &h,
            c: &c,
            a: &a,
            b: &b,
            lower: &bounds.lower,
            upper: &bounds.upper,
        },
        &w0,
    )?;
    Ok(finish(
        moments,
        bounds,
        sol.w,
        Objective::MeanVariance { risk_aversion },
        ridge,
        sol.iterations,
    ))
}

fn sharpe(ret: f64, var: f64, risk_free: f64) -> f64 {
    let excess = ret - risk_free;
    if var > 0.0 {
        excess / var.sqrt()
    } else if excess > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Tangency portfolio: sweeps the frontier over [`SHARPE_SWEEP_POINTS`]
/// targets, then refines the best bracket by golden-section search.
pub fn solve_max_sharpe(moments: &MomentEstimates, bounds: &Bounds, risk_free: f64) -> Result<PortfolioWeights> {
    check_inputs(moments, bounds)?;
    let range = feasible_return_range(moments, bounds)?;
    if range.max <= risk_free {
        return Err(Error::NoPositiveExcess {
            max_return: range.max,
            risk_free,
        });
    }
    let lo = range.min.max(risk_free);
    let hi = range.max;
    let k = SHARPE_SWEEP_POINTS;
    let targets: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();

    let eval = |t: f64| -> Result<(f64, PortfolioWeights)> {
        let p = solve_at_return(moments, bounds, &range, t)?;
        let s = sharpe(moments.portfolio_return(&p.w), p.objective_value, risk_free);
        Ok((s, p))
    };

    let mut best: Option<(usize, f64, PortfolioWeights)> = None;
    for (i, &t) in targets.iter().enumerate() {
        let (s, p) = eval(t)?;
        if best.as_ref().is_none_or(|(_, bs, _)| s > *bs) {
            best = Some((i, s, p));
        }
    }
    let (bi, mut best_s, mut best_p) = best.expect("sweep has at least two points");

    let mut a = targets[bi.saturating_sub(1)];
    let mut b = targets[(bi + 1).min(k - 1)];
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, p1) = eval(x1)?;
    let (mut f2, p2) = eval(x2)?;
    for (f, p) in [(f1, p1), (f2, p2)] {
        if f > best_s {
            best_s = f;
            best_p = p;
        }
    }
    let tol = 1e-12 * (1.0 + hi.abs());
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            let (f, p) = eval(x2)?;
            f2 = f;
            if f > best_s {
                best_s = f;
                best_p = p;
            }
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            let (f, p) = eval(x1)?;
            f1 = f;
            if f > best_s {
                best_s = f;
                best_p = p;
            }
        }
    }
    best_p.objective = Objective::MaxSharpe { risk_free };
    Ok(best_p)
}

/// Efficient frontier on `n_points` equally spaced targets across the
/// feasible return interval.
pub fn trace_frontier(moments: &MomentEstimates, bounds: &Bounds, n_points: usize) -> Result<Vec<FrontierPoint>> {
    if n_points < 2 {
        return Err(Error::invalid(
            "optimizer::trace_frontier",
            format!("need at least 2 frontier points, got {n_points}"),
        ));
    }
    check_inputs(moments, bounds)?;
    let range = feasible_return_range(moments, bounds)?;
    let targets: Vec<f64> = (0..n_points)
        .map(|i| range.min + (range.max - range.min) * i as f64 / (n_points - 1) as f64)
        .collect();
    trace_with_range(moments, bounds, &range, &targets)
}

/// Frontier evaluated at caller-chosen targets.
pub fn trace_frontier_at(moments: &MomentEstimates, bounds: &Bounds, targets: &[f64]) -> Result<Vec<FrontierPoint>> {
    check_inputs(moments, bounds)?;
    let range = feasible_return_range(moments, bounds)?;
    trace_with_range(moments, bounds, &range, targets)
}

fn trace_with_range(
    moments: &MomentEstimates,
    bounds: &Bounds,
    range: &ReturnRange,
    targets: &[f64],
) -> Result<Vec<FrontierPoint>> {
    targets
        .iter()
        .map(|&t| {
            let weights = solve_at_return(moments, bounds, range, t)?;
            Ok(FrontierPoint {
                target_return: t,
                volatility: weights.volatility(),
                weights,
            })
        })
        .collect()
}
