use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::market::EquilibriumPrior;
use crate::error::{Error, Result};

/// One investor view; levels and spreads are annualized excess returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViewSpec {
    /// `outperformer` beats `underperformer` by `spread`.
    Relative {
        outperformer: String,
        underperformer: String,
        spread: f64,
    },
    /// `asset` returns `level`.
    Absolute { asset: String, level: f64 },
}

impl fmt::Display for ViewSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewSpec::Relative {
                outperformer,
                underperformer,
                spread,
            } => write!(f, "rel {outperformer} > {underperformer} by {spread}"),
            ViewSpec::Absolute { asset, level } => write!(f, "abs {asset} = {level}"),
        }
    }
}

/// Parses one view per line: `rel A > B by 0.02` or `abs A = 0.10`.
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_views(text: &str) -> Result<Vec<ViewSpec>> {
    const CTX: &str = "blacklitterman::parse_views";
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| Error::Parse {
            context: CTX,
            line: i + 1,
            reason,
        };
        let number = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("invalid number '{s}'")))
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let view = match tokens.as_slice() {
            [kind, a, ">", b, "by", v] if kind.eq_ignore_ascii_case("rel") => ViewSpec::Relative {
                outperformer: a.to_string(),
                underperformer: b.to_string(),
                spread: number(v)?,
            },
            [kind, a, "=", v] if kind.eq_ignore_ascii_case("abs") => ViewSpec::Absolute {
                asset: a.to_string(),
                level: number(v)?,
            },
            _ => return Err(err(format!("expected 'rel A > B by x' or 'abs A = x', got '{line}'"))),
        };
        out.push(view);
    }
    Ok(out)
}

/// Pick matrix, view returns and the diagonal of Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    /// K×N pick matrix.
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    /// Diagonal of Ω; off-diagonal entries are zero by construction.
    pub omega: DVector<f64>,
    pub labels: Vec<String>,
}

impl ViewSet {
    /// Checks shapes, non-zero pick rows and a strictly positive Ω diagonal.
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, omega: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        const CTX: &str = "blacklitterman::ViewSet";
        let k = p.nrows();
        if q.len() != k || omega.len() != k || labels.len() != k {
            return Err(Error::invalid(
                CTX,
                "P, Q, Omega and labels disagree on the number of views",
            ));
        }
        if let Some(r) = (0..k).find(|&r| p.row(r).iter().all(|&v| v == 0.0)) {
            return Err(Error::invalid(
                CTX,
                format!("view '{}' has an all-zero pick row", labels[r]),
            ));
        }
        if let Some(r) = (0..k).find(|&r| !(omega[r] > 0.0 && omega[r].is_finite())) {
            return Err(Error::invalid(
                CTX,
                format!("view '{}' has non-positive uncertainty {}", labels[r], omega[r]),
            ));
        }
        if q.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid(CTX, "non-finite view entry"));
        }
        Ok(Self { p, q, omega, labels })
    }

    pub fn empty(n_assets: usize) -> Self {
        Self {
            p: DMatrix::zeros(0, n_assets),
            q: DVector::zeros(0),
            omega: DVector::zeros(0),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn omega_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.omega)
    }
}

/// Builds P and Q from view specs with `Ω_kk = omega_scale · p_kᵀ(τΣ)p_k`.
pub fn build_views(specs: &[ViewSpec], prior: &EquilibriumPrior, omega_scale: f64) -> Result<ViewSet> {
    const CTX: &str = "blacklitterman::build_views";
    if !(omega_scale > 0.0 && omega_scale.is_finite()) {
        return Err(Error::invalid(
            CTX,
            format!("omega_scale must be positive, got {omega_scale}"),
        ));
    }
    let n = prior.n_assets();
    let index = |asset: &str| {
        prior.index(asset).ok_or_else(|| Error::UnknownAsset {
            context: CTX,
            asset: asset.to_string(),
        })
    };
    let k = specs.len();
    let mut p = DMatrix::zeros(k, n);
    let mut q = DVector::zeros(k);
    for (r, spec) in specs.iter().enumerate() {
        match spec {
            ViewSpec::Relative {
                outperformer,
                underperformer,
                spread,
            } => {
                let (a, b) = (index(outperformer)?, index(underperformer)?);
                if a == b {
                    return Err(Error::invalid(
                        CTX,
                        format!("view '{spec}' compares an asset with itself"),
                    ));
                }
                p[(r, a)] = 1.0;
                p[(r, b)] = -1.0;
                q[r] = *spread;
            }
            ViewSpec::Absolute { asset, level } => {
                p[(r, index(asset)?)] = 1.0;
                q[r] = *level;
            }
        }
        if (0..r).any(|s| q[s] == q[r] && p.row(s) == p.row(r)) {
            return Err(Error::DuplicateView(spec.to_string()));
        }
    }
    let scaled = &prior.sigma * prior.tau;
    let omega = DVector::from_fn(k, |r, _| {
        let row = p.row(r).transpose();
        omega_scale * (row.transpose() * &scaled * &row)[(0, 0)]
    });
    ViewSet::new(p, q, omega, specs.iter().map(ToString::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TICKERS: [&str; 11] = [
        "TSLA", "WMT", "BAC", "GS", "LLY", "MRK", "GOOG", "META", "AAPL", "XOM", "REST",
    ];

    fn prior() -> EquilibriumPrior {
        let n = TICKERS.len();
        let b = DMatrix::from_fn(n, n, |i, j| ((i * 5 + j * 3) % 7) as f64 / 40.0);
        let sigma = &b * b.transpose() + DMatrix::identity(n, n) * 0.01;
        EquilibriumPrior::new(
            TICKERS.iter().map(|s| s.to_string()).collect(),
            sigma,
            DVector::from_element(n, 1.0 / n as f64),
            2.5,
            0.05,
            252,
        )
        .unwrap()
    }

    fn two_views() -> Vec<ViewSpec> {
        parse_views("rel AAPL > GOOG by 0.02\nabs TSLA = 0.10\n").unwrap()
    }

    #[test]
    fn relative_and_absolute_rows() {
        let v = build_views(&two_views(), &prior(), 1.0).unwrap();
        assert_eq!(v.p.shape(), (2, 11));
        let (aapl, goog, tsla) = (8, 6, 0);
        for j in 0..11 {
            let want0 = if j == aapl {
                1.0
            } else if j == goog {
                -1.0
            } else {
                0.0
            };
            let want1 = if j == tsla { 1.0 } else { 0.0 };
            assert_eq!((v.p[(0, j)], v.p[(1, j)]), (want0, want1));
        }
        assert_eq!(v.q.as_slice(), &[0.02, 0.10]);
        assert_eq!(v.labels, vec!["rel AAPL > GOOG by 0.02", "abs TSLA = 0.1"]);
    }

    #[test]
    fn omega_is_scaled_view_variance() {
        let pr = prior();
        let v1 = build_views(&two_views(), &pr, 1.0).unwrap();
        let v2 = build_views(&two_views(), &pr, 2.0).unwrap();
        for k in 0..2 {
            assert_eq!(v2.omega[k], 2.0 * v1.omega[k]);
        }
        let s = &pr.sigma;
        let rel = pr.tau * (s[(8, 8)] + s[(6, 6)] - 2.0 * s[(8, 6)]);
        assert!((v1.omega[0] - rel).abs() <= 1e-15);
        assert!((v1.omega[1] - pr.tau * s[(0, 0)]).abs() <= 1e-15);
        let m = v1.omega_matrix();
        assert_eq!((m[(0, 1)], m[(1, 0)]), (0.0, 0.0));
    }

    #[test]
    fn empty_spec_list() {
        let v = build_views(&[], &prior(), 1.0).unwrap();
        assert!(v.is_empty());
        assert_eq!(v.p.shape(), (0, 11));
    }

    #[test]
    fn rejects_unknown_duplicate_and_self_views() {
        let pr = prior();
        let unknown = parse_views("abs NVDA = 0.1").unwrap();
        assert!(matches!(
            build_views(&unknown, &pr, 1.0),
            Err(Error::UnknownAsset { .. })
        ));
        let dup = parse_views("abs TSLA = 0.1\nabs TSLA = 0.1").unwrap();
        assert!(matches!(build_views(&dup, &pr, 1.0), Err(Error::DuplicateView(_))));
        let selfish = parse_views("rel TSLA > TSLA by 0.1").unwrap();
        assert!(build_views(&selfish, &pr, 1.0).is_err());
        assert!(build_views(&two_views(), &pr, 0.0).is_err());
    }

    #[test]
    fn parser_reports_line() {
        let err = parse_views("# views\nabs A = 0.1\nrel A B 0.2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(parse_views("abs A = x").is_err());
        for v in two_views() {
            assert_eq!(parse_views(&v.to_string()).unwrap(), vec![v]);
        }
    }
}
