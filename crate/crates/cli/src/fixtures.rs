//! Deterministic synthetic data bundled with the tool.
//!
//! Daily asset log returns follow a five-factor model plus Gaussian noise,
//! so the panel has a realistic cross-sectional correlation structure and the
//! factor file explains it. The residual market asset tracks the market factor.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const FIXTURE_SEED: u64 = 20_230_901;
pub const TICKERS: [&str; 10] = ["TSLA", "WMT", "BAC", "GS", "LLY", "MRK", "GOOG", "META", "AAPL", "XOM"];
pub const RESIDUAL_TICKER: &str = "REST";
/// Market-cap row holding the whole-market total.
pub const TOTAL_ROW: &str = "TOTAL";
pub const START: (i32, u32, u32) = (2023, 9, 1);
pub const END: (i32, u32, u32) = (2025, 12, 31);
pub const BOUNDARY: &str = "2025-09-30";
/// Five-asset subset used by the random-search comparisons.
pub const SEARCH_SUBSET: [&str; 5] = ["AAPL", "GOOG", "TSLA", "XOM", "GS"];

pub const PRICES_FILE: &str = "prices.csv";
pub const FACTORS_FILE: &str = "factors.csv";
pub const MARKET_CAPS_FILE: &str = "market_caps.csv";
pub const RESIDUAL_FILE: &str = "residual_prices.csv";
pub const VIEWS_FILE: &str = "views.txt";
pub const CONFIG_FILE: &str = "frontierlab.toml";

/// Daily means and volatilities of Mkt-RF, SMB, HML, RMW, CMA (decimal).
const FACTOR_MEAN: [f64; 5] = [0.0006, 0.0, 0.0001, 0.0001, 0.0];
const FACTOR_VOL: [f64; 5] = [0.009, 0.005, 0.005, 0.004, 0.003];
const DAILY_RF: f64 = 0.00018;

struct AssetModel {
    ticker: &'static str,
    alpha: f64,
    betas: [f64; 5],
    idio_vol: f64,
    start_price: f64,
    market_cap: f64,
}

#[rustfmt::skip]
const ASSETS: [AssetModel; 10] = [
    AssetModel { ticker: "TSLA", alpha: 0.0002, betas: [1.8, 0.5, -0.6, -0.5, -0.4], idio_vol: 0.028, start_price: 245.0, market_cap: 0.8e12 },
    AssetModel { ticker: "WMT", alpha: 0.0002, betas: [0.5, -0.2, 0.1, 0.3, 0.2], idio_vol: 0.009, start_price: 53.0, market_cap: 0.6e12 },
    AssetModel { ticker: "BAC", alpha: 0.0, betas: [1.2, 0.1, 0.9, -0.2, 0.1], idio_vol: 0.012, start_price: 28.0, market_cap: 0.3e12 },
    AssetModel { ticker: "GS", alpha: 0.0001, betas: [1.3, 0.0, 0.7, 0.0, 0.0], idio_vol: 0.012, start_price: 325.0, market_cap: 0.15e12 },
    AssetModel { ticker: "LLY", alpha: 0.0004, betas: [0.6, -0.3, -0.4, 0.4, 0.3], idio_vol: 0.016, start_price: 540.0, market_cap: 0.7e12 },
    AssetModel { ticker: "MRK", alpha: -0.0001, betas: [0.4, -0.2, 0.2, 0.3, 0.4], idio_vol: 0.011, start_price: 103.0, market_cap: 0.25e12 },
    AssetModel { ticker: "GOOG", alpha: 0.0003, betas: [1.1, -0.3, -0.3, 0.3, -0.3], idio_vol: 0.014, start_price: 137.0, market_cap: 2.0e12 },
    AssetModel { ticker: "META", alpha: 0.0003, betas: [1.3, -0.2, -0.5, 0.2, -0.5], idio_vol: 0.017, start_price: 296.0, market_cap: 1.5e12 },
    AssetModel { ticker: "AAPL", alpha: 0.0002, betas: [1.1, -0.3, -0.3, 0.4, -0.2], idio_vol: 0.011, start_price: 189.0, market_cap: 3.5e12 },
    AssetModel { ticker: "XOM", alpha: 0.0001, betas: [0.6, 0.1, 0.8, 0.2, 0.5], idio_vol: 0.009, start_price: 112.0, market_cap: 0.45e12 },
];
const TOTAL_MARKET_CAP: f64 = 40.0e12;
const RESIDUAL_IDIO_VOL: f64 = 0.002;

/// Text of every bundled file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureSet {
    pub prices_csv: String,
    pub factors_csv: String,
    pub market_caps_csv: String,
    pub residual_csv: String,
    pub views: String,
    pub config_toml: String,
}

/// Directory holding the committed fixture files.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_path(file: &str) -> String {
    fixture_dir().join(file).to_string_lossy().into_owned()
}

fn weekdays() -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(START.0, START.1, START.2).expect("valid start date");
    let end = NaiveDate::from_ymd_opt(END.0, END.1, END.2).expect("valid end date");
    start
        .iter_days()
        .take_while(|d| *d <= end)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

/// Generates all fixture files from `seed`; identical seeds give identical text.
pub fn generate(seed: u64) -> FixtureSet {
    let dates = weekdays();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut draw = |mean: f64, sd: f64| mean + sd * std_normal.sample(&mut rng);

    let mut prices: Vec<Vec<f64>> = ASSETS.iter().map(|a| vec![a.start_price]).collect();
    let mut residual = vec![100.0];
    let mut factors_csv = String::from(
        "Synthetic daily five-factor returns in percent, generated by frontierlab\n\n,Mkt-RF,SMB,HML,RMW,CMA,RF\n",
    );
    for (t, date) in dates.iter().enumerate() {
        // Factors are stored rounded, and returns are generated from the stored values.
        let f: Vec<f64> = (0..5)
            .map(|k| round_to(100.0 * draw(FACTOR_MEAN[k], FACTOR_VOL[k]), 4) / 100.0)
            .collect();
        let rf = DAILY_RF;
        let _ = writeln!(
            factors_csv,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            date.format("%Y%m%d"),
            100.0 * f[0],
            100.0 * f[1],
            100.0 * f[2],
            100.0 * f[3],
            100.0 * f[4],
            100.0 * rf
        );
        if t == 0 {
            continue;
        }
        for (a, path) in ASSETS.iter().zip(prices.iter_mut()) {
            let systematic: f64 = a.betas.iter().zip(&f).map(|(b, x)| b * x).sum();
            let r = rf + a.alpha + systematic + draw(0.0, a.idio_vol);
            let last = *path.last().expect("seeded with a start price");
            path.push(last * r.exp());
        }
        let r = rf + f[0] + draw(0.0, RESIDUAL_IDIO_VOL);
        let last = *residual.last().expect("seeded with a start level");
        residual.push(last * r.exp());
    }
    let _ = writeln!(factors_csv);

    let mut prices_csv = String::from("date");
    for a in &ASSETS {
        prices_csv.push(',');
        prices_csv.push_str(a.ticker);
    }
    prices_csv.push('\n');
    let mut residual_csv = format!("date,{RESIDUAL_TICKER}\n");
    for (t, date) in dates.iter().enumerate() {
        let _ = write!(prices_csv, "{date}");
        for path in &prices {
            let _ = write!(prices_csv, ",{:.4}", path[t]);
        }
        prices_csv.push('\n');
        let _ = writeln!(residual_csv, "{date},{:.4}", residual[t]);
    }

    let mut market_caps_csv = String::from("ticker,market_cap\n");
    for a in &ASSETS {
        let _ = writeln!(market_caps_csv, "{},{:.0}", a.ticker, a.market_cap);
    }
    let _ = writeln!(market_caps_csv, "{TOTAL_ROW},{TOTAL_MARKET_CAP:.0}");

    FixtureSet {
        prices_csv,
        factors_csv,
        market_caps_csv,
        residual_csv,
        views: "# one view per line\nrel AAPL > GOOG by 0.02\nabs TSLA = 0.10\n".into(),
        config_toml: default_config_toml(),
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

fn default_config_toml() -> String {
    format!(
        r#"# Bundled end-to-end configuration; paths are relative to this file.

[data]
prices = "{PRICES_FILE}"
factors = "{FACTORS_FILE}"
boundary = "{BOUNDARY}"
trading_days = 252
risk_free = 0.0

[bounds]
max_weight = 0.15

[frontier]
points = 50

[simulation]
samples = 20000
seed = 42
sampler = "dirichlet"
workers = 1

[bl]
market_caps = "{MARKET_CAPS_FILE}"
residual = "{RESIDUAL_FILE}"
views = "{VIEWS_FILE}"
omega_scale = 1.0
"#
    )
}

/// Writes every fixture file into `dir`, creating it if needed.
pub fn write_fixtures(dir: &Path, seed: u64) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let set = generate(seed);
    let files = [
        (PRICES_FILE, &set.prices_csv),
        (FACTORS_FILE, &set.factors_csv),
        (MARKET_CAPS_FILE, &set.market_caps_csv),
        (RESIDUAL_FILE, &set.residual_csv),
        (VIEWS_FILE, &set.views),
        (CONFIG_FILE, &set.config_toml),
    ];
    files
        .iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(7), generate(7));
        assert_ne!(generate(7).prices_csv, generate(8).prices_csv);
    }

    #[test]
    fn committed_files_match_the_generator() {
        let set = generate(FIXTURE_SEED);
        let read = |f: &str| std::fs::read_to_string(fixture_dir().join(f)).unwrap();
        assert_eq!(read(PRICES_FILE), set.prices_csv);
        assert_eq!(read(FACTORS_FILE), set.factors_csv);
        assert_eq!(read(MARKET_CAPS_FILE), set.market_caps_csv);
        assert_eq!(read(RESIDUAL_FILE), set.residual_csv);
    }

    #[test]
    fn calendar_has_only_weekdays() {
        let d = weekdays();
        assert_eq!(d.first().unwrap().to_string(), "2023-09-01");
        assert!(d.iter().all(|x| x.weekday().number_from_monday() <= 5));
        assert_eq!(ASSETS.iter().map(|a| a.ticker).collect::<Vec<_>>(), TICKERS);
    }
}
