use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::{push_kv, FactorPanel, COEFFICIENT_NAMES, DESIGN_COLUMNS, N_PARAMS};
use crate::error::{Error, Result};

/// Relative singular-value floor below which the design counts as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    /// Intercept then the five betas, see [`COEFFICIENT_NAMES`].
    pub coefficients: [f64; 6],
    pub std_errors: [f64; 6],
    pub t_stats: [f64; 6],
    pub p_values: [f64; 6],
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub durbin_watson: f64,
    pub jarque_bera: f64,
    pub jb_p_value: f64,
    pub skewness: f64,
    /// Non-excess kurtosis (3 for a normal distribution).
    pub kurtosis: f64,
    pub n_obs: usize,
    /// Set when the response has zero total variation; R² is then reported as 0.
    pub degenerate_response: bool,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionReport {
    /// Flat `key=value` text, one statistic per line.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        push_kv(&mut out, "estimator", "ols");
        push_kv(&mut out, "n_obs", self.n_obs);
        for (i, name) in COEFFICIENT_NAMES.iter().enumerate() {
            push_kv(&mut out, &format!("{name}.coef"), self.coefficients[i]);
            push_kv(&mut out, &format!("{name}.std_error"), self.std_errors[i]);
            push_kv(&mut out, &format!("{name}.t_stat"), self.t_stats[i]);
            push_kv(&mut out, &format!("{name}.p_value"), self.p_values[i]);
        }
        push_kv(&mut out, "r_squared", self.r_squared);
        push_kv(&mut out, "adj_r_squared", self.adj_r_squared);
        push_kv(&mut out, "f_statistic", self.f_statistic);
        push_kv(&mut out, "f_p_value", self.f_p_value);
        push_kv(&mut out, "durbin_watson", self.durbin_watson);
        push_kv(&mut out, "jarque_bera", self.jarque_bera);
        push_kv(&mut out, "jb_p_value", self.jb_p_value);
        push_kv(&mut out, "skewness", self.skewness);
        push_kv(&mut out, "kurtosis", self.kurtosis);
        push_kv(&mut out, "degenerate_response", self.degenerate_response);
        out
    }
}

pub(super) fn check_inputs(y: &[f64], panel: &FactorPanel, context: &'static str) -> Result<DMatrix<f64>> {
    if y.len() != panel.len() {
        return Err(Error::invalid(
            context,
            format!("{} returns for {} factor rows", y.len(), panel.len()),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(context, "non-finite portfolio return"));
    }
    if y.len() <= N_PARAMS {
        return Err(Error::InsufficientData {
            context,
            what: "observations",
            need: N_PARAMS + 1,
            got: y.len(),
        });
    }
    let x = panel.design();
    check_rank(&x)?;
    Ok(x)
}

/// Rejects designs whose column-normalized condition exceeds `1/RANK_TOLERANCE`,
/// naming the columns that carry the near-null direction.
fn check_rank(x: &DMatrix<f64>) -> Result<()> {
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let zero: Vec<String> = norms
        .iter()
        .zip(DESIGN_COLUMNS)
        .filter(|(n, _)| **n == 0.0)
        .map(|(_, name)| name.to_string())
        .collect();
    if !zero.is_empty() {
        return Err(Error::RankDeficient { columns: zero });
    }
    let scaled = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] / norms[j]);
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (imax, imin) = (svd.singular_values.imax(), svd.singular_values.imin());
    if svd.singular_values[imin] > RANK_TOLERANCE * svd.singular_values[imax] {
        return Ok(());
    }
    let null = v_t.row(imin);
    let peak = null.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let columns = DESIGN_COLUMNS
        .iter()
        .zip(null.iter())
        .filter(|(_, v)| v.abs() > 1e-3 * peak)
        .map(|(name, _)| name.to_string())
        .collect();
    Err(Error::RankDeficient { columns })
}

/// Least-squares fit of `sqrt(w)·y` on `sqrt(w)·X` by Householder QR.
/// Returns the coefficients and `(XᵀWX)⁻¹`.
pub(super) fn weighted_fit(x: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let sw = |i: usize| w.map_or(1.0, |w| w[i].sqrt());
    let xw = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| sw(i) * x[(i, j)]);
    let yw = DVector::from_fn(y.len(), |i, _| sw(i) * y[i]);
    let qr = xw.qr();
    let r = qr.r();
    let qty = qr.q().transpose() * yw;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::numerical("factors::regress", "singular triangular factor"))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(x.ncols(), x.ncols()))
        .ok_or_else(|| Error::numerical("factors::regress", "singular triangular factor"))?;
    Ok((beta, &r_inv * r_inv.transpose()))
}

pub(super) fn residuals(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> Vec<f64> {
    let fitted = x * beta;
    y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect()
}

/// Two-sided t statistics and p-values; a zero standard error gives t = 0
/// for a zero coefficient and ±∞ otherwise.
pub(super) fn t_inference(coef: &[f64; 6], se: &[f64; 6], df: usize) -> ([f64; 6], [f64; 6]) {
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
    let mut t = [0.0; 6];
    let mut p = [1.0; 6];
    for i in 0..6 {
        t[i] = if se[i] > 0.0 {
            coef[i] / se[i]
        } else if coef[i] == 0.0 {
            0.0
        } else {
            coef[i].signum() * f64::INFINITY
        };
        p[i] = (2.0 * dist.sf(t[i].abs())).min(1.0);
    }
    (t, p)
}

pub(super) fn array6(v: impl IntoIterator<Item = f64>) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (o, x) in out.iter_mut().zip(v) {
        *o = x;
    }
    out
}

/// Ordinary least squares of portfolio excess returns on the five factors.
pub fn ols_regress(portfolio_excess: &[f64], panel: &FactorPanel) -> Result<RegressionReport> {
    let y = portfolio_excess;
    let x = check_inputs(y, panel, "factors::ols_regress")?;
    let n = y.len();
    let df = n - N_PARAMS;
    let (beta, xtx_inv) = weighted_fit(&x, y, None)?;
    let e = residuals(&x, y, &beta);

    let rss: f64 = e.iter().map(|v| v * v).sum();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let degenerate_response = tss == 0.0;
    let r_squared = if degenerate_response {
        0.0
    } else {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / df as f64;
    let k = (N_PARAMS - 1) as f64;
    let (f_statistic, f_p_value) = if degenerate_response {
        (0.0, 1.0)
    } else if r_squared >= 1.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (r_squared / k) / ((1.0 - r_squared) / df as f64);
        let dist = FisherSnedecor::new(k, df as f64).expect("positive degrees of freedom");
        (f, dist.sf(f))
    };

    let sigma2 = rss / df as f64;
    let coefficients = array6(beta.iter().copied());
    let std_errors = array6((0..6).map(|i| (sigma2 * xtx_inv[(i, i)]).max(0.0).sqrt()));
    let (t_stats, p_values) = t_inference(&coefficients, &std_errors, df);

    let durbin_watson = if rss > 0.0 {
        e.windows(2).map(|d| (d[1] - d[0]).powi(2)).sum::<f64>() / rss
    } else {
        2.0
    };
    let (skewness, kurtosis) = shape(&e);
    let jarque_bera = n as f64 / 6.0 * (skewness.powi(2) + (kurtosis - 3.0).powi(2) / 4.0);
    // Chi-square(2) survival function.
    let jb_p_value = (-jarque_bera / 2.0).exp();

    Ok(RegressionReport {
        coefficients,
        std_errors,
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        f_statistic,
        f_p_value,
        durbin_watson,
        jarque_bera,
        jb_p_value,
        skewness,
        kurtosis,
        n_obs: n,
        degenerate_response,
        residuals: e,
    })
}

/// Sample skewness and (non-excess) kurtosis from central moments; a
/// constant series is reported as normal-shaped (0, 3).
fn shape(e: &[f64]) -> (f64, f64) {
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let moment = |p: i32| e.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let m2 = moment(2);
    if m2 <= 0.0 {
        return (0.0, 3.0);
    }
    (moment(3) / m2.powf(1.5), moment(4) / (m2 * m2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::FactorUnits;
    use chrono::{Days, NaiveDate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn panel(seed: u64, t: usize) -> FactorPanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = [0.01, 0.005, 0.005, 0.004, 0.003];
        let cols: [Vec<f64>; 5] = std::array::from_fn(|k| {
            let d = Normal::new(0.0, sd[k]).unwrap();
            (0..t).map(|_| d.sample(&mut rng)).collect()
        });
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        FactorPanel::new(
            (0..t).map(|i| start + Days::new(i as u64)).collect(),
            cols,
            vec![0.0001; t],
            FactorUnits::Decimal,
        )
        .unwrap()
    }

    fn simulate(p: &FactorPanel, beta: [f64; 6], noise: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).unwrap();
        (0..p.len())
            .map(|t| {
                let mut v = beta[0];
                for k in 0..5 {
                    v += beta[k + 1] * p.factor(k)[t];
                }
                v + if noise > 0.0 { d.sample(&mut rng) } else { 0.0 }
            })
            .collect()
    }

    #[test]
    fn recovers_single_beta() {
        let p = panel(1, 300);
        let y = simulate(&p, [0.0, 0.8, 0.0, 0.0, 0.0, 0.0], 1e-6, 2);
        let r = ols_regress(&y, &p).unwrap();
        assert!((r.coefficients[1] - 0.8).abs() < 1e-4);
        assert!(r.coefficients[2..].iter().all(|b| b.abs() < 1e-3));
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let p = panel(3, 200);
        let beta = [0.0002, 0.81, -0.09, 0.20, 0.12, -0.03];
        let r = ols_regress(&simulate(&p, beta, 0.0, 0), &p).unwrap();
        for (b, t) in r.coefficients.iter().zip(beta) {
            assert!((b - t).abs() <= 1e-8);
        }
        assert!(r.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn zero_response_is_degenerate() {
        let p = panel(4, 50);
        let r = ols_regress(&vec![0.0; 50], &p).unwrap();
        assert!(r.degenerate_response);
        assert_eq!(r.r_squared, 0.0);
        assert!(r.coefficients.iter().all(|b| b.abs() < 1e-15));
        assert!(r.p_values.iter().all(|&p| p == 1.0));
        assert!((0.0..=4.0).contains(&r.durbin_watson));
    }

    #[test]
    fn residuals_are_orthogonal_and_r2_matches_correlation() {
        let p = panel(5, 400);
        let y = simulate(&p, [0.0001, 0.9, 0.1, -0.2, 0.05, 0.0], 0.003, 6);
        let r = ols_regress(&y, &p).unwrap();
        let x = p.design();
        let xte = x.transpose() * DVector::from_vec(r.residuals.clone());
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(xte.amax() <= 1e-8 * scale);

        let fitted: Vec<f64> = y.iter().zip(&r.residuals).map(|(a, e)| a - e).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (my, mf) = (mean(&y), mean(&fitted));
        let cov: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - my) * (b - mf)).sum();
        let vy: f64 = y.iter().map(|a| (a - my).powi(2)).sum();
        let vf: f64 = fitted.iter().map(|b| (b - mf).powi(2)).sum();
        assert!((r.r_squared - cov * cov / (vy * vf)).abs() <= 1e-10);
        assert!(r.adj_r_squared <= r.r_squared);
    }

    #[test]
    fn collinear_columns_are_named() {
        let mut p = panel(7, 60);
        p.cma = p.smb.iter().zip(&p.hml).map(|(a, b)| 2.0 * a - b).collect();
        let err = ols_regress(&vec![0.001; 60], &p).unwrap_err();
        match err {
            Error::RankDeficient { columns } => assert_eq!(columns, vec!["SMB", "HML", "CMA"]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn too_few_observations() {
        let p = panel(8, 6);
        assert!(matches!(
            ols_regress(&[0.0; 6], &p),
            Err(Error::InsufficientData { need: 7, got: 6, .. })
        ));
    }

    #[test]
    fn statistics_against_closed_forms() {
        let p = panel(9, 120);
        let y = simulate(&p, [0.0, 1.0, 0.3, 0.0, 0.0, 0.0], 0.004, 10);
        let r = ols_regress(&y, &p).unwrap();
        let n = 120.0;
        let f = (r.r_squared / 5.0) / ((1.0 - r.r_squared) / (n - 6.0));
        assert!((r.f_statistic - f).abs() <= 1e-9 * f);
        assert!((0.0..=1.0).contains(&r.f_p_value));
        let e = &r.residuals;
        let dw: f64 =
            (1..e.len()).map(|t| (e[t] - e[t - 1]).powi(2)).sum::<f64>() / e.iter().map(|v| v * v).sum::<f64>();
        assert!((r.durbin_watson - dw).abs() <= 1e-12);
        // Classical standard errors from an explicit inverse of XᵀX.
        let x = p.design();
        let inv = (x.transpose() * &x).try_inverse().unwrap();
        let s2 = e.iter().map(|v| v * v).sum::<f64>() / (n - 6.0);
        for i in 0..6 {
            let se = (s2 * inv[(i, i)]).sqrt();
            assert!((r.std_errors[i] - se).abs() <= 1e-8 * se);
        }
    }

    #[test]
    fn key_value_output_is_flat() {
        let p = panel(11, 30);
        let r = ols_regress(&simulate(&p, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 0.01, 1), &p).unwrap();
        let kv = r.to_key_value();
        assert!(kv.lines().all(|l| l.split_once('=').is_some()));
        assert!(kv.contains("beta_mkt.coef="));
        assert!(kv.contains("\nn_obs=30\n"));
    }
}
