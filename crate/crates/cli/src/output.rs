//! Machine-readable CSV/text writers and human summaries.
//!
//! Machine output uses the shortest round-trip form of every float; human
//! summaries show at least six significant digits.

use std::fmt::Write as _;

use frontierlab_core::backtest::BACKTEST_CSV_HEADER;
use frontierlab_core::factors::COEFFICIENT_NAMES;
use frontierlab_core::optimizer::FrontierPoint;
use frontierlab_core::BacktestReport;

use crate::app::{BlOut, FrontierComparison, MomentsOut, Provenance, RegressionOut, SimulationOut, SolvedPortfolio};

/// Fixed-point text with at least `digits` significant digits.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return format!("{:.*}", digits - 1, 0.0);
    }
    let magnitude = x.abs().log10().floor() as i64;
    if magnitude < -4 {
        return format!("{x:.*e}", digits - 1);
    }
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Human-summary number: eight significant digits.
pub fn num(x: f64) -> String {
    sig(x, 8)
}

pub fn moments_csv(m: &MomentsOut) -> String {
    let mut out = String::from("ticker,mu,volatility");
    for t in &m.tickers {
        let _ = write!(out, ",{t}");
    }
    out.push('\n');
    for (i, t) in m.tickers.iter().enumerate() {
        let _ = write!(out, "{t},{},{}", m.mu[i], m.volatility[i]);
        for v in &m.sigma[i] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn moments_summary(m: &MomentsOut) -> String {
    let mut out = String::new();
    let span = match (m.start, m.end) {
        (Some(a), Some(b)) => format!("{a} .. {b}"),
        _ => "-".into(),
    };
    let _ = writeln!(out, "annualized moments over {} observations ({span})", m.n_obs);
    let _ = writeln!(out, "{:<8} {:>14} {:>14}", "ticker", "mu", "volatility");
    for (i, t) in m.tickers.iter().enumerate() {
        let _ = writeln!(out, "{:<8} {:>14} {:>14}", t, num(m.mu[i]), num(m.volatility[i]));
    }
    out
}

/// `ticker,<label>...` with one column per portfolio.
pub fn weights_csv(tickers: &[String], columns: &[(&str, &[f64])]) -> String {
    let mut out = String::from("ticker");
    for (label, _) in columns {
        let _ = write!(out, ",{label}");
    }
    out.push('\n');
    for (i, t) in tickers.iter().enumerate() {
        out.push_str(t);
        for (_, w) in columns {
            let _ = write!(out, ",{}", w[i]);
        }
        out.push('\n');
    }
    out
}

pub fn portfolio_summary(title: &str, p: &SolvedPortfolio) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    for (t, w) in p.weights.tickers.iter().zip(&p.weights.w) {
        let _ = writeln!(out, "  {:<8} {:>12}", t, num(*w));
    }
    let _ = writeln!(out, "  expected return  {}", num(p.expected_return));
    let _ = writeln!(out, "  volatility       {}", num(p.volatility));
    let _ = writeln!(out, "  variance         {}", num(p.weights.objective_value));
    let _ = writeln!(out, "  max KKT residual {}", sig(p.kkt_max_residual, 6));
    let _ = writeln!(out, "  iterations       {}", p.weights.iterations);
    out
}

pub fn frontier_comparison_csv(c: &FrontierComparison) -> String {
    let mut out = String::from("target_return,constrained_volatility,unconstrained_volatility\n");
    for i in 0..c.targets.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            c.targets[i], c.constrained_volatility[i], c.unconstrained_volatility[i]
        );
    }
    out
}

pub fn frontier_comparison_summary(c: &FrontierComparison, cap: f64) -> String {
    let n = c.targets.len();
    format!(
        "frontier comparison at {n} shared targets, cap {}:\n  constrained below long-only at {} targets\n  constrained strictly above at {} targets\n  return range {} .. {}\n",
        num(cap),
        c.violations,
        c.strictly_greater,
        num(c.targets.first().copied().unwrap_or(f64::NAN)),
        num(c.targets.last().copied().unwrap_or(f64::NAN)),
    )
}

pub fn frontier_csv(points: &[FrontierPoint]) -> String {
    let mut out = String::from("target_return,volatility");
    if let Some(p) = points.first() {
        for t in &p.weights.tickers {
            let _ = write!(out, ",{t}");
        }
    }
    out.push('\n');
    for p in points {
        let _ = write!(out, "{},{}", p.target_return, p.volatility);
        for w in &p.weights.w {
            let _ = write!(out, ",{w}");
        }
        out.push('\n');
    }
    out
}

pub fn frontier_summary(points: &[FrontierPoint]) -> String {
    let mut out = format!("efficient frontier, {} points\n", points.len());
    let _ = writeln!(out, "{:>14} {:>14}", "target_return", "volatility");
    for p in points {
        let _ = writeln!(out, "{:>14} {:>14}", num(p.target_return), num(p.volatility));
    }
    out
}

pub fn simulation_trace_csv(s: &SimulationOut) -> String {
    let mut out = String::from("sample,best_objective\n");
    for p in &s.trace {
        let _ = writeln!(out, "{},{}", p.sample, p.best_objective);
    }
    out
}

pub fn simulation_summary(s: &SimulationOut) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "random search: {} samples, seed {}, sampler {:?}, objective {:?}",
        s.samples, s.seed, s.sampler, s.objective
    );
    let _ = writeln!(
        out,
        "  accepted {} rejected {} (rate {})",
        s.accepted,
        s.rejected,
        num(s.rejection_rate)
    );
    let _ = writeln!(
        out,
        "  best objective {} at draw {}",
        num(s.best_objective),
        s.best_index
    );
    let _ = writeln!(out, "  QP optimum     {}", num(s.qp_optimum));
    let _ = writeln!(out, "  relative gap   {}", sig(s.relative_gap, 6));
    for (t, w) in s.tickers.iter().zip(&s.best_weights) {
        let _ = writeln!(out, "  {:<8} {:>12}", t, num(*w));
    }
    out
}

/// OLS and robust reports as `key=value` blocks.
pub fn regression_text(r: &RegressionOut) -> String {
    format!("[ols]\n{}\n[robust]\n{}", r.ols.to_key_value(), r.robust.to_key_value())
}

pub fn regression_summary(r: &RegressionOut) -> String {
    let mut out = format!(
        "five-factor regression, {:?} window, {} observations\n",
        r.window, r.n_obs
    );
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>12} {:>10} {:>12} {:>12}",
        "", "ols", "std_error", "p_value", "robust", "std_error"
    );
    for (i, name) in COEFFICIENT_NAMES.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>12} {:>10} {:>12} {:>12}",
            name,
            sig(r.ols.coefficients[i], 6),
            sig(r.ols.std_errors[i], 6),
            sig(r.ols.p_values[i], 6),
            sig(r.robust.coefficients[i], 6),
            sig(r.robust.std_errors[i], 6),
        );
    }
    let _ = writeln!(
        out,
        "R² {}  adj R² {}  DW {}  JB p {}  kurtosis {}",
        num(r.ols.r_squared),
        num(r.ols.adj_r_squared),
        num(r.ols.durbin_watson),
        sig(r.ols.jb_p_value, 6),
        num(r.ols.kurtosis)
    );
    let _ = writeln!(
        out,
        "robust: {} iterations, converged {}, scale {}",
        r.robust.iterations,
        r.robust.converged,
        num(r.robust.scale)
    );
    out
}

pub fn bl_csv(b: &BlOut) -> String {
    let mut out = String::from("ticker,market_weight,pi,mu_bl,weight\n");
    for (i, t) in b.prior.tickers.iter().enumerate() {
        let _ = writeln!(
            out,
            "{t},{},{},{},{}",
            b.prior.market_weights[i], b.prior.pi[i], b.posterior.mu_bl[i], b.weights.w[i]
        );
    }
    out
}

pub fn bl_summary(b: &BlOut) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "black-litterman: delta {}  tau {}  market sharpe {}",
        num(b.prior.delta),
        sig(b.prior.tau, 6),
        num(b.prior.risk_aversion.sharpe)
    );
    for v in &b.posterior.views {
        let _ = writeln!(out, "  view: {v}");
    }
    let _ = writeln!(
        out,
        "{:<8} {:>12} {:>12} {:>12} {:>12}",
        "ticker", "market", "pi", "mu_bl", "weight"
    );
    for (i, t) in b.prior.tickers.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<8} {:>12} {:>12} {:>12} {:>12}",
            t,
            num(b.prior.market_weights[i]),
            num(b.prior.pi[i]),
            num(b.posterior.mu_bl[i]),
            num(b.weights.w[i])
        );
    }
    out
}

pub fn backtest_csv(rows: &[(&str, &BacktestReport)]) -> String {
    let mut out = format!("{BACKTEST_CSV_HEADER}\n");
    for (name, r) in rows {
        out.push_str(&r.csv_row(name));
        out.push('\n');
    }
    out
}

/// Wealth curves side by side; the first row is the start value 1.
pub fn wealth_csv(rows: &[(&str, &BacktestReport)]) -> String {
    let mut out = String::from("date");
    for (name, _) in rows {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    let Some((_, first)) = rows.first() else {
        return out;
    };
    for t in 0..first.wealth_curve.len() {
        match t {
            0 => out.push_str("start"),
            _ => {
                let _ = write!(out, "{}", first.dates[t - 1]);
            }
        }
        for (_, r) in rows {
            let _ = write!(out, ",{}", r.wealth_curve[t]);
        }
        out.push('\n');
    }
    out
}

pub fn backtest_summary(rows: &[(&str, &BacktestReport)]) -> String {
    let mut out = String::new();
    if let Some((_, r)) = rows.first() {
        let span = match (r.dates.first(), r.dates.last()) {
            (Some(a), Some(b)) => format!("{a} .. {b}"),
            _ => "-".into(),
        };
        let _ = writeln!(out, "backtest over {} days ({span})", r.dates.len());
    }
    let _ = writeln!(
        out,
        "{:<16} {:>14} {:>12} {:>14}",
        "portfolio", "cumulative", "sharpe", "max_drawdown"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>14} {:>12} {:>14}",
            name,
            num(r.cumulative_return),
            num(r.sharpe),
            num(r.max_drawdown)
        );
    }
    out
}

pub fn provenance_json(p: &Provenance) -> String {
    let mut s = serde_json::to_string_pretty(p).expect("provenance serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.123456789, 6), "0.123457");
        assert_eq!(sig(0.000123456789, 6), "0.000123457");
        assert_eq!(sig(1.5e-90, 3), "1.50e-90");
        assert_eq!(sig(1234.56789, 6), "1234.57");
        assert_eq!(sig(-2.5, 6), "-2.50000");
        assert_eq!(sig(123456789.0, 6), "123456789");
        assert_eq!(sig(0.0, 6), "0.00000");
        assert_eq!(sig(f64::NAN, 6), "NaN");
    }

    #[test]
    fn machine_floats_round_trip() {
        let x = 0.1 + 0.2;
        let csv = weights_csv(&["A".into()], &[("w", &[x])]);
        let v: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, x);
    }
}
