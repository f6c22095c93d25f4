//! Price ingestion, date alignment, log returns, annualized moments and
//! train/test splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_TRADING_DAYS: u32 = 252;

/// Adjusted close prices of one ticker, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub ticker: String,
    pub observations: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    /// Validates ordering and positivity.
    pub fn new(ticker: impl Into<String>, observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let ticker = ticker.into();
        for (row, pair) in observations.windows(2).enumerate() {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::invalid(
                    "market-data",
                    format!(
                        "{ticker}: dates not strictly increasing at observation {} ({} after {})",
                        row + 2,
                        pair[1].0,
                        pair[0].0
                    ),
                ));
            }
        }
        for (row, &(_, price)) in observations.iter().enumerate() {
            if !(price > 0.0 && price.is_finite()) {
                return Err(Error::NonPositivePrice {
                    ticker,
                    row: row + 1,
                    price,
                });
            }
        }
        Ok(Self { ticker, observations })
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.observations.iter().map(|(d, _)| *d)
    }

    pub fn prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|(_, p)| *p)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Date-aligned T×N matrix of daily log returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    returns: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, returns: DMatrix<f64>) -> Result<Self> {
        if returns.nrows() != dates.len() || returns.ncols() != tickers.len() {
            return Err(Error::invalid(
                "market-data",
                format!(
                    "panel shape {}x{} does not match {} dates and {} tickers",
                    returns.nrows(),
                    returns.ncols(),
                    dates.len(),
                    tickers.len()
                ),
            ));
        }
        if dates.windows(2).any(|d| d[1] <= d[0]) {
            return Err(Error::invalid("market-data", "panel dates not strictly increasing"));
        }
        if let Some(pos) = returns.iter().position(|x| !x.is_finite()) {
            let (row, col) = (pos % returns.nrows(), pos / returns.nrows());
            return Err(Error::invalid(
                "market-data",
                format!("non-finite return for {} on {}", tickers[col], dates[row]),
            ));
        }
        Ok(Self {
            tickers,
            dates,
            returns,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn n_obs(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn column(&self, ticker: &str) -> Option<Vec<f64>> {
        self.ticker_index(ticker)
            .map(|j| self.returns.column(j).iter().copied().collect())
    }

    /// Panel restricted to the given tickers, in the given order.
    pub fn select(&self, tickers: &[&str]) -> Result<ReturnPanel> {
        let idx = tickers
            .iter()
            .map(|t| {
                self.ticker_index(t).ok_or_else(|| Error::UnknownAsset {
                    context: "market-data",
                    asset: t.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let returns = self.returns.select_columns(&idx);
        ReturnPanel::new(
            tickers.iter().map(|t| t.to_string()).collect(),
            self.dates.clone(),
            returns,
        )
    }

    /// Panel restricted to rows whose dates satisfy `keep`.
    pub fn filter_rows(&self, keep: impl Fn(NaiveDate) -> bool) -> ReturnPanel {
        let rows: Vec<usize> = (0..self.n_obs()).filter(|&t| keep(self.dates[t])).collect();
        ReturnPanel {
            tickers: self.tickers.clone(),
            dates: rows.iter().map(|&t| self.dates[t]).collect(),
            returns: self.returns.select_rows(&rows),
        }
    }
}

/// Annualized expected returns and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub tickers: Vec<String>,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub trading_days_per_year: u32,
}

impl MomentEstimates {
    /// Builds moments from explicit inputs; sigma is symmetrized and checked for PSD.
    pub fn new(
        tickers: Vec<String>,
        mu: DVector<f64>,
        sigma: DMatrix<f64>,
        trading_days_per_year: u32,
    ) -> Result<Self> {
        let n = tickers.len();
        if mu.len() != n || sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::invalid(
                "market-data",
                format!(
                    "moment dimensions disagree: {} tickers, mu {}, sigma {}x{}",
                    n,
                    mu.len(),
                    sigma.nrows(),
                    sigma.ncols()
                ),
            ));
        }
        if mu.iter().chain(sigma.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("market-data", "non-finite moment entry"));
        }
        let sigma = linalg::symmetrize(&sigma);
        if !linalg::is_psd(&sigma) {
            let (min_eigenvalue, max_eigenvalue) = linalg::eigen_extremes(&sigma);
            return Err(Error::NotPositiveSemidefinite {
                context: "market-data",
                min_eigenvalue,
                max_eigenvalue,
            });
        }
        Ok(Self {
            tickers,
            mu,
            sigma,
            trading_days_per_year,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn subset(&self, tickers: &[&str]) -> Result<MomentEstimates> {
        let idx = tickers
            .iter()
            .map(|t| {
                self.tickers
                    .iter()
                    .position(|x| x == t)
                    .ok_or_else(|| Error::UnknownAsset {
                        context: "market-data",
                        asset: t.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentEstimates {
            tickers: tickers.iter().map(|t| t.to_string()).collect(),
            mu: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mu[i])),
            sigma: DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.sigma[(idx[r], idx[c])]),
            trading_days_per_year: self.trading_days_per_year,
        })
    }

    pub fn portfolio_return(&self, w: &[f64]) -> f64 {
        linalg::dot(self.mu.as_slice(), w)
    }

    pub fn portfolio_variance(&self, w: &[f64]) -> f64 {
        linalg::quad_form(&self.sigma, w)
    }
}

/// Chronological train/test partition of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub boundary_date: NaiveDate,
    pub train: ReturnPanel,
    pub test: ReturnPanel,
}

/// Reads a CSV document from a local path or an `http(s)://` URL.
pub fn read_source(source: &str) -> Result<String> {
    if source.starts_with("http://") || source.starts_with("https://") {
        let mut response = ureq::get(source).call().map_err(|e| Error::Io {
            source_name: source.to_string(),
            reason: e.to_string(),
        })?;
        response.body_mut().read_to_string().map_err(|e| Error::Io {
            source_name: source.to_string(),
            reason: e.to_string(),
        })
    } else {
        std::fs::read_to_string(Path::new(source)).map_err(|e| Error::Io {
            source_name: source.to_string(),
            reason: e.to_string(),
        })
    }
}

/// Parses `YYYY-MM-DD` or `YYYYMMDD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .ok()
}

/// Loads price series from a CSV file path or URL.
pub fn load_prices(source: &str) -> Result<Vec<PriceSeries>> {
    parse_prices(&read_source(source)?)
}

/// Parses wide (`date,T1,T2,…`) or long (`date,ticker,adj_close`) price CSV text.
pub fn parse_prices(text: &str) -> Result<Vec<PriceSeries>> {
    const CTX: &str = "market-data::load_prices";
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            context: CTX,
            line: 1,
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(Error::Parse {
            context: CTX,
            line: 1,
            reason: "header needs a date column and at least one price column".into(),
        });
    }
    let lower: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    let is_long = lower.len() == 3 && lower[1] == "ticker" && lower[2] == "adj_close";

    // ticker -> (date -> (price, line))
    let mut columns: BTreeMap<String, BTreeMap<NaiveDate, (f64, usize)>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    if !is_long {
        for t in &header[1..] {
            if t.is_empty() {
                return Err(Error::Parse {
                    context: CTX,
                    line: 1,
                    reason: "empty ticker name in header".into(),
                });
            }
            order.push(t.clone());
            columns.entry(t.clone()).or_default();
        }
    }

    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            context: CTX,
            line,
            reason: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let date = parse_date(&record[0]).ok_or_else(|| Error::Parse {
            context: CTX,
            line,
            reason: format!("unparseable date '{}'", &record[0]),
        })?;
        let mut put = |ticker: &str, raw: &str| -> Result<()> {
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Ok(());
            }
            let price: f64 = raw.parse().map_err(|_| Error::Parse {
                context: CTX,
                line,
                reason: format!("unparseable price '{raw}' for {ticker}"),
            })?;
            if !(price > 0.0 && price.is_finite()) {
                return Err(Error::NonPositivePrice {
                    ticker: ticker.to_string(),
                    row: line,
                    price,
                });
            }
            let col = columns.entry(ticker.to_string()).or_default();
            if col.insert(date, (price, line)).is_some() {
                return Err(Error::Parse {
                    context: CTX,
                    line,
                    reason: format!("duplicate date {date} for {ticker}"),
                });
            }
            Ok(())
        };
        if is_long {
            let ticker = record[1].to_string();
            if ticker.is_empty() {
                return Err(Error::Parse {
                    context: CTX,
                    line,
                    reason: "empty ticker".into(),
                });
            }
            if !order.contains(&ticker) {
                order.push(ticker.clone());
            }
            put(&ticker, &record[2])?;
        } else {
            for (j, ticker) in header[1..].iter().enumerate() {
                put(ticker, record.get(j + 1).unwrap_or(""))?;
            }
        }
    }

    order
        .into_iter()
        .map(|t| {
            let obs = columns
                .remove(&t)
                .unwrap_or_default()
                .into_iter()
                .map(|(d, (p, _))| (d, p))
                .collect();
            PriceSeries::new(t, obs)
        })
        .collect()
}

/// Restricts every series to the intersection of all date sets.
pub fn align(series: &[PriceSeries]) -> Result<Vec<PriceSeries>> {
    if series.is_empty() {
        return Err(Error::InsufficientData {
            context: "market-data::align",
            what: "series",
            need: 1,
            got: 0,
        });
    }
    let mut common: BTreeSet<NaiveDate> = series[0].dates().collect();
    for s in &series[1..] {
        let dates: BTreeSet<NaiveDate> = s.dates().collect();
        common = common.intersection(&dates).copied().collect();
    }
    if common.len() < 2 {
        return Err(Error::InsufficientData {
            context: "market-data::align",
            what: "common dates",
            need: 2,
            got: common.len(),
        });
    }
    Ok(series
        .iter()
        .map(|s| PriceSeries {
            ticker: s.ticker.clone(),
            observations: s
                .observations
                .iter()
                .filter(|(d, _)| common.contains(d))
                .copied()
                .collect(),
        })
        .collect())
}

/// Daily log returns `ln(P_t / P_{t-1})`; the first date is dropped.
pub fn log_returns(series: &[PriceSeries]) -> Result<ReturnPanel> {
    let first = series.first().ok_or(Error::InsufficientData {
        context: "market-data::log_returns",
        what: "series",
        need: 1,
        got: 0,
    })?;
    let dates: Vec<NaiveDate> = first.dates().collect();
    if dates.len() < 2 {
        return Err(Error::InsufficientData {
            context: "market-data::log_returns",
            what: "prices per series",
            need: 2,
            got: dates.len(),
        });
    }
    for s in series {
        if !s.dates().eq(dates.iter().copied()) {
            return Err(Error::invalid(
                "market-data::log_returns",
                format!("series {} is not aligned with {}", s.ticker, first.ticker),
            ));
        }
    }
    let t = dates.len() - 1;
    let returns = DMatrix::from_fn(t, series.len(), |row, col| {
        let obs = &series[col].observations;
        (obs[row + 1].1 / obs[row].1).ln()
    });
    ReturnPanel::new(
        series.iter().map(|s| s.ticker.clone()).collect(),
        dates[1..].to_vec(),
        returns,
    )
}

/// `mu = trading_days × column means`, `sigma = trading_days × sample covariance`
/// (denominator T−1), symmetrized.
pub fn estimate_moments(panel: &ReturnPanel, trading_days: u32) -> Result<MomentEstimates> {
    let t = panel.n_obs();
    if t < 2 {
        return Err(Error::InsufficientData {
            context: "market-data::estimate_moments",
            what: "observations",
            need: 2,
            got: t,
        });
    }
    if trading_days == 0 {
        return Err(Error::invalid(
            "market-data::estimate_moments",
            "trading_days must be positive",
        ));
    }
    let r = panel.returns();
    let scale = f64::from(trading_days);
    let means = r.row_mean();
    let centered = DMatrix::from_fn(t, r.ncols(), |i, j| r[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered / (t as f64 - 1.0);
    let mu = DVector::from_iterator(r.ncols(), means.iter().map(|m| m * scale));
    MomentEstimates::new(panel.tickers().to_vec(), mu, cov * scale, trading_days)
}

/// Splits rows into `date <= boundary` (train) and `date > boundary` (test).
pub fn split_panel(panel: &ReturnPanel, boundary: NaiveDate) -> Result<SplitSpec> {
    let train = panel.filter_rows(|d| d <= boundary);
    let test = panel.filter_rows(|d| d > boundary);
    if train.n_obs() == 0 || test.n_obs() == 0 {
        let (first, last) = match (panel.dates().first(), panel.dates().last()) {
            (Some(f), Some(l)) => (f.to_string(), l.to_string()),
            _ => ("-".into(), "-".into()),
        };
        return Err(Error::invalid(
            "market-data::split_panel",
            format!(
                "boundary {boundary} leaves an empty {} side (panel spans {first} .. {last})",
                if train.n_obs() == 0 { "train" } else { "test" }
            ),
        ));
    }
    Ok(SplitSpec {
        boundary_date: boundary,
        train,
        test,
    })
}
