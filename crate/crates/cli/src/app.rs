//! Data loading and the operations shared by the CLI and the service.

use frontierlab_core::backtest::{portfolio_log_returns, run_backtest_with, BacktestOptions, Rebalance};
use frontierlab_core::blacklitterman::{
    bl_optimal_weights, build_market_portfolio, build_views, equilibrium_prior, posterior, PriorOptions, RiskAversion,
    UtilityCovariance,
};
use frontierlab_core::factors::{align_excess, load_factors, ols_regress, robust_regress, RobustOptions, UnitsHint};
use frontierlab_core::market_data::{align, estimate_moments, load_prices, log_returns, read_source, split_panel};
use frontierlab_core::montecarlo::{
    objective_gap, reference_optimum, simulate_search, SamplerKind, SearchObjective, TracePoint,
};
use frontierlab_core::optimizer::{
    kkt_check, solve_gmv, solve_max_sharpe, trace_frontier, trace_frontier_at, Bounds, FrontierPoint,
};
use frontierlab_core::{
    BacktestReport, FactorPanel, MarketPortfolio, MomentEstimates, NaiveDate, PortfolioWeights, RegressionReport,
    ReturnPanel, RobustRegressionReport, SimulationConfig, ViewSpec,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{AppError, AppResult, Context};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to replay a result exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
}

/// Which inputs beyond prices a command requires.
#[derive(Debug, Clone, Copy, Default)]
pub struct Needs {
    pub factors: bool,
    pub market: bool,
    pub test_window: bool,
}

impl Needs {
    pub const ALL: Needs = Needs {
        factors: true,
        market: true,
        test_window: true,
    };
}

/// Market portfolio over the estimation window plus the N+1 return panels.
#[derive(Debug, Clone)]
pub struct MarketData {
    pub train: MarketPortfolio,
    pub full: ReturnPanel,
    pub test: Option<ReturnPanel>,
    pub total_market_cap: f64,
}

/// Immutable inputs for one run or one service lifetime.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: RunConfig,
    pub config_hash: String,
    pub panel: ReturnPanel,
    pub train: ReturnPanel,
    pub test: Option<ReturnPanel>,
    /// Estimated on the train window.
    pub moments: MomentEstimates,
    pub factors: Option<FactorPanel>,
    pub market: Option<MarketData>,
}

fn required<'a>(value: &'a Option<String>, op: &'static str, what: &str) -> AppResult<&'a str> {
    value
        .as_deref()
        .ok_or_else(|| AppError::usage(op, format!("no {what} configured")))
}

/// Parses `ticker,market_cap` rows; the `TOTAL` row carries the whole-market cap.
pub fn parse_market_caps(text: &str) -> AppResult<(Vec<(String, f64)>, f64)> {
    const OP: &str = "blacklitterman::load_market_caps";
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut caps = Vec::new();
    let mut total = None;
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| AppError::data(OP, e.to_string()))?;
        let (Some(ticker), Some(value)) = (row.get(0), row.get(1)) else {
            return Err(AppError::data(OP, format!("row {} needs ticker and market_cap", i + 2)));
        };
        let cap: f64 = value
            .parse()
            .map_err(|_| AppError::data(OP, format!("row {}: invalid market cap '{value}'", i + 2)))?;
        if ticker.eq_ignore_ascii_case(crate::fixtures::TOTAL_ROW) {
            total = Some(cap);
        } else {
            caps.push((ticker.to_string(), cap));
        }
    }
    let total = total.ok_or_else(|| AppError::data(OP, "missing TOTAL row with the whole-market cap"))?;
    Ok((caps, total))
}

fn load_market(cfg: &RunConfig, panel: &ReturnPanel) -> AppResult<MarketData> {
    const OP: &str = "blacklitterman::build_market_portfolio";
    let caps_text = read_source(required(&cfg.bl.market_caps, OP, "market caps")?).op(OP)?;
    let (caps, total) = parse_market_caps(&caps_text)?;
    let residual_series = load_prices(required(&cfg.bl.residual, OP, "residual price source")?).op(OP)?;
    let residual = log_returns(&align(&residual_series).op(OP)?).op(OP)?;
    let assets = panel.filter_rows(|d| residual.dates().binary_search(&d).is_ok());
    let residual = residual.filter_rows(|d| assets.dates().binary_search(&d).is_ok());
    let full = build_market_portfolio(&caps, total, &assets, &residual).op(OP)?;
    let (train_returns, test) = match cfg.boundary {
        Some(b) => {
            let split = split_panel(&full.returns, b).op(OP)?;
            (split.train, Some(split.test))
        }
        None => (full.returns.clone(), None),
    };
    Ok(MarketData {
        train: MarketPortfolio {
            tickers: full.tickers.clone(),
            weights: full.weights,
            returns: train_returns,
        },
        full: full.returns,
        test,
        total_market_cap: total,
    })
}

impl Dataset {
    pub fn load(config: RunConfig, needs: Needs) -> AppResult<Self> {
        const OP: &str = "market-data::load_prices";
        let series = load_prices(required(&config.prices, OP, "price source; pass --prices")?).op(OP)?;
        let panel = log_returns(&align(&series).op(OP)?).op(OP)?;
        let (train, test) = match config.boundary {
            Some(b) => {
                let split = split_panel(&panel, b).op("market-data::split_panel")?;
                (split.train, Some(split.test))
            }
            None if needs.test_window => {
                return Err(AppError::usage(
                    "market-data::split_panel",
                    "an estimation boundary date is required; pass --boundary",
                ))
            }
            None => (panel.clone(), None),
        };
        let moments = estimate_moments(&train, config.trading_days).op("market-data::estimate_moments")?;
        let factors = if needs.factors {
            let path = required(
                &config.factors,
                "factors::load_factors",
                "factor source; pass --factors",
            )?;
            Some(load_factors(path, UnitsHint::Auto).op("factors::load_factors")?)
        } else {
            None
        };
        let market = if needs.market {
            Some(load_market(&config, &panel)?)
        } else {
            None
        };
        Ok(Self {
            config_hash: config.config_hash(),
            config,
            panel,
            train,
            test,
            moments,
            factors,
            market,
        })
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance_with(self.config.simulation.seed, None)
    }

    /// Provenance for a derived request: the request body is folded into the hash.
    pub fn provenance_with(&self, seed: u64, request: Option<&[u8]>) -> Provenance {
        let config_hash = match request {
            None => self.config_hash.clone(),
            Some(body) => {
                use sha2::{Digest, Sha256};
                let mut h = Sha256::new();
                h.update(self.config_hash.as_bytes());
                h.update(body);
                crate::config::hex(&h.finalize())
            }
        };
        Provenance {
            config_hash,
            seed,
            version: VERSION,
        }
    }

    pub fn tickers(&self) -> &[String] {
        &self.moments.tickers
    }

    /// Named tickers plus the residual symbol, when market data is loaded.
    pub fn market_tickers(&self) -> Option<&[String]> {
        self.market.as_ref().map(|m| m.train.tickers.as_slice())
    }

    /// Return panel covering every weight ticker: the asset panel, or the
    /// N+1 market panel when the residual asset is held.
    pub fn panel_for(&self, tickers: &[String], window: Window) -> AppResult<&ReturnPanel> {
        let assets = self.window(window)?;
        if tickers.iter().all(|t| assets.ticker_index(t).is_some()) {
            return Ok(assets);
        }
        match (&self.market, window) {
            (Some(m), Window::Train) => Ok(&m.train.returns),
            (Some(m), Window::All) => Ok(&m.full),
            (Some(m), Window::Test) => m
                .test
                .as_ref()
                .ok_or_else(|| AppError::usage("market-data::split_panel", "the test window needs a boundary date")),
            (None, _) => Ok(assets),
        }
    }

    /// Uniform bounds from the configuration.
    pub fn config_bounds(&self) -> AppResult<Bounds> {
        uniform_bounds(self.tickers(), self.config.min_weight, self.config.upper())
    }

    pub fn window(&self, window: Window) -> AppResult<&ReturnPanel> {
        match window {
            Window::Train => Ok(&self.train),
            Window::All => Ok(&self.panel),
            Window::Test => self
                .test
                .as_ref()
                .ok_or_else(|| AppError::usage("market-data::split_panel", "the test window needs a boundary date")),
        }
    }
}

pub fn uniform_bounds(tickers: &[String], lower: f64, upper: f64) -> AppResult<Bounds> {
    let b = Bounds {
        lower: vec![lower; tickers.len()],
        upper: vec![upper; tickers.len()],
    };
    b.validate(tickers).op("optimizer::validate_bounds")?;
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Train,
    Test,
    All,
}

impl std::str::FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "test" => Ok(Self::Test),
            "all" => Ok(Self::All),
            other => Err(format!("unknown window '{other}' (expected train, test or all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsOut {
    pub tickers: Vec<String>,
    pub mu: Vec<f64>,
    pub volatility: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub n_obs: usize,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

pub fn moments_out(ds: &Dataset) -> MomentsOut {
    let m = &ds.moments;
    let n = m.n_assets();
    MomentsOut {
        tickers: m.tickers.clone(),
        mu: m.mu.iter().copied().collect(),
        volatility: (0..n).map(|i| m.sigma[(i, i)].sqrt()).collect(),
        sigma: (0..n).map(|i| (0..n).map(|j| m.sigma[(i, j)]).collect()).collect(),
        n_obs: ds.train.n_obs(),
        start: ds.train.dates().first().copied(),
        end: ds.train.dates().last().copied(),
    }
}

/// Optimized weights with summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvedPortfolio {
    pub weights: PortfolioWeights,
    pub expected_return: f64,
    pub volatility: f64,
    pub kkt_max_residual: f64,
}

fn solved(moments: &MomentEstimates, bounds: &Bounds, weights: PortfolioWeights) -> SolvedPortfolio {
    SolvedPortfolio {
        expected_return: moments.portfolio_return(&weights.w),
        volatility: weights.volatility(),
        kkt_max_residual: kkt_check(&weights, moments, bounds).max_residual(),
        weights,
    }
}

/// What `/optimize` and the CLI can solve for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizeObjective {
    #[default]
    MinVariance,
    MaxSharpe {
        #[serde(default)]
        risk_free: f64,
    },
    TargetReturn {
        target: f64,
    },
}

pub fn optimize(
    moments: &MomentEstimates,
    bounds: &Bounds,
    objective: OptimizeObjective,
) -> AppResult<SolvedPortfolio> {
    let w = match objective {
        OptimizeObjective::MinVariance => solve_gmv(moments, bounds).op("optimizer::solve_gmv")?,
        OptimizeObjective::MaxSharpe { risk_free } => {
            solve_max_sharpe(moments, bounds, risk_free).op("optimizer::solve_max_sharpe")?
        }
        OptimizeObjective::TargetReturn { target } => {
            frontierlab_core::optimizer::solve_min_variance_at_return(moments, bounds, target)
                .op("optimizer::solve_min_variance_at_return")?
        }
    };
    Ok(solved(moments, bounds, w))
}

/// Capped frontier against the long-only frontier at the capped frontier's targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierComparison {
    pub targets: Vec<f64>,
    pub constrained_volatility: Vec<f64>,
    pub unconstrained_volatility: Vec<f64>,
    /// Targets where the capped volatility is below the long-only one.
    pub violations: usize,
    /// Targets where the capped volatility is strictly above.
    pub strictly_greater: usize,
}

pub fn compare_frontiers(moments: &MomentEstimates, capped: &Bounds, points: usize) -> AppResult<FrontierComparison> {
    const OP: &str = "optimizer::trace_frontier";
    let constrained = trace_frontier(moments, capped, points).op(OP)?;
    let targets: Vec<f64> = constrained.iter().map(|p| p.target_return).collect();
    let long_only = Bounds::long_only(moments.n_assets());
    let unconstrained = trace_frontier_at(moments, &long_only, &targets).op(OP)?;
    let cv: Vec<f64> = constrained.iter().map(|p| p.volatility).collect();
    let uv: Vec<f64> = unconstrained.iter().map(|p| p.volatility).collect();
    Ok(FrontierComparison {
        violations: cv.iter().zip(&uv).filter(|(c, u)| c < u).count(),
        strictly_greater: cv.iter().zip(&uv).filter(|(c, u)| c > u).count(),
        targets,
        constrained_volatility: cv,
        unconstrained_volatility: uv,
    })
}

pub fn frontier(moments: &MomentEstimates, bounds: &Bounds, points: usize) -> AppResult<Vec<FrontierPoint>> {
    trace_frontier(moments, bounds, points).op("optimizer::trace_frontier")
}

/// Random-search settings accepted by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationRequest {
    pub samples: u64,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub objective: SearchObjective,
    pub min_weight: f64,
    pub max_weight: Option<f64>,
    /// Subset of tickers; all when absent.
    pub assets: Option<Vec<String>>,
    pub workers: usize,
    /// Maximum number of trace points returned.
    pub trace_points: usize,
}

impl Default for SimulationRequest {
    fn default() -> Self {
        Self {
            samples: crate::config::DEFAULT_SAMPLES,
            seed: crate::config::DEFAULT_SEED,
            sampler: SamplerKind::Dirichlet,
            objective: SearchObjective::MinVariance,
            min_weight: 0.0,
            max_weight: None,
            assets: None,
            workers: 1,
            trace_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationOut {
    pub tickers: Vec<String>,
    pub best_weights: Vec<f64>,
    pub best_objective: f64,
    pub best_index: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub rejection_rate: f64,
    /// Exact optimum of the same problem from the QP solver.
    pub qp_optimum: f64,
    pub relative_gap: f64,
    pub trace: Vec<TracePoint>,
    pub samples: u64,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub objective: SearchObjective,
    pub rng: &'static str,
}

/// Keeps at most `max_points` trace points, always including the last.
pub fn decimate(trace: &[TracePoint], max_points: usize) -> Vec<TracePoint> {
    if trace.len() <= max_points || max_points < 2 {
        return trace.to_vec();
    }
    let last = trace.len() - 1;
    let mut idx: Vec<usize> = (0..max_points).map(|k| k * last / (max_points - 1)).collect();
    idx.dedup();
    idx.into_iter().map(|i| trace[i]).collect()
}

pub fn simulate(moments: &MomentEstimates, req: &SimulationRequest) -> AppResult<SimulationOut> {
    const OP: &str = "montecarlo::simulate_search";
    if req.samples == 0 {
        return Err(AppError::usage(OP, "samples must be positive"));
    }
    let moments = match &req.assets {
        Some(a) => moments
            .subset(&a.iter().map(String::as_str).collect::<Vec<_>>())
            .op(OP)?,
        None => moments.clone(),
    };
    let bounds = uniform_bounds(&moments.tickers, req.min_weight, req.max_weight.unwrap_or(1.0))?;
    let mut cfg = SimulationConfig::new(req.samples, bounds.clone(), req.objective);
    cfg.seed = req.seed;
    cfg.sampler = req.sampler;
    cfg.workers = req.workers.max(1);
    let result = simulate_search(&moments, &cfg).op(OP)?;
    let qp_optimum = reference_optimum(&moments, &bounds, req.objective).op("montecarlo::reference_optimum")?;
    Ok(SimulationOut {
        tickers: moments.tickers.clone(),
        best_weights: result.best_weights.w.clone(),
        best_objective: result.best_objective,
        best_index: result.best_index,
        accepted: result.accepted,
        rejected: result.rejected,
        rejection_rate: result.rejection_rate(),
        qp_optimum,
        relative_gap: objective_gap(req.objective, result.best_objective, qp_optimum),
        trace: decimate(&result.trace, req.trace_points),
        samples: req.samples,
        seed: req.seed,
        sampler: req.sampler,
        objective: req.objective,
        rng: result.rng,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionOut {
    pub window: Window,
    pub n_obs: usize,
    pub ols: RegressionReport,
    pub robust: RobustRegressionReport,
}

/// Five-factor regressions of the portfolio's daily simple excess returns.
pub fn regress(ds: &Dataset, weights: &PortfolioWeights, window: Window) -> AppResult<RegressionOut> {
    const OP: &str = "factors::regress";
    let factors = ds
        .factors
        .as_ref()
        .ok_or_else(|| AppError::usage(OP, "no factor source configured; pass --factors"))?;
    let panel = ds.window(window)?;
    let log = portfolio_log_returns(&weights.tickers, &weights.w, panel).op(OP)?;
    let simple: Vec<f64> = log.iter().map(|r| r.exp_m1()).collect();
    let (excess, sub) = align_excess(panel.dates(), &simple, factors).op("factors::align_excess")?;
    let ols = ols_regress(&excess, &sub).op("factors::ols_regress")?;
    let robust = robust_regress(&excess, &sub, &RobustOptions::default()).op("factors::robust_regress")?;
    Ok(RegressionOut {
        window,
        n_obs: excess.len(),
        ols,
        robust,
    })
}

/// Black-Litterman settings for one request.
#[derive(Debug, Clone, PartialEq)]
pub struct BlRequest {
    pub views: Vec<ViewSpec>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub omega_scale: f64,
    /// Bounds over the N+1 market tickers; budget-only when absent.
    pub bounds: Option<Bounds>,
}

impl Default for BlRequest {
    fn default() -> Self {
        Self {
            views: Vec::new(),
            tau: None,
            delta: None,
            omega_scale: crate::config::DEFAULT_OMEGA_SCALE,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlPrior {
    pub tickers: Vec<String>,
    pub market_weights: Vec<f64>,
    pub pi: Vec<f64>,
    pub delta: f64,
    pub tau: f64,
    pub risk_aversion: RiskAversion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlPosteriorOut {
    pub mu_bl: Vec<f64>,
    pub sigma_bl: Vec<Vec<f64>>,
    pub views: Vec<String>,
    pub q: Vec<f64>,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlOut {
    pub prior: BlPrior,
    pub posterior: BlPosteriorOut,
    pub weights: PortfolioWeights,
}

pub fn black_litterman(ds: &Dataset, req: &BlRequest) -> AppResult<BlOut> {
    const OP: &str = "blacklitterman::posterior";
    let market = ds
        .market
        .as_ref()
        .ok_or_else(|| AppError::usage(OP, "no market caps or residual series configured"))?;
    let options = PriorOptions {
        risk_free: ds.config.risk_free,
        trading_days: ds.config.trading_days,
        tau: req.tau,
        delta: req.delta,
    };
    let (prior, ra) = equilibrium_prior(&market.train, &options).op("blacklitterman::equilibrium_prior")?;
    let views = build_views(&req.views, &prior, req.omega_scale).op("blacklitterman::build_views")?;
    let post = posterior(&prior, &views).op(OP)?;
    let weights = bl_optimal_weights(&post, req.bounds.as_ref(), UtilityCovariance::Prior)
        .op("blacklitterman::bl_optimal_weights")?;
    let n = prior.n_assets();
    Ok(BlOut {
        prior: BlPrior {
            tickers: prior.tickers.clone(),
            market_weights: prior.market_weights.iter().copied().collect(),
            pi: prior.pi.iter().copied().collect(),
            delta: prior.delta,
            tau: prior.tau,
            risk_aversion: ra,
        },
        posterior: BlPosteriorOut {
            mu_bl: post.mu_bl.iter().copied().collect(),
            sigma_bl: (0..n)
                .map(|i| (0..n).map(|j| post.sigma_bl[(i, j)]).collect())
                .collect(),
            views: views.labels.clone(),
            q: views.q.iter().copied().collect(),
            omega: views.omega.iter().copied().collect(),
        },
        weights,
    })
}

/// Weights given as ticker/value pairs; the budget is not enforced here.
pub fn weights_from_pairs(pairs: &[(String, f64)]) -> PortfolioWeights {
    PortfolioWeights {
        tickers: pairs.iter().map(|(t, _)| t.clone()).collect(),
        w: pairs.iter().map(|(_, w)| *w).collect(),
        bounds: None,
        objective_value: f64::NAN,
        objective: frontierlab_core::Objective::Sampled,
        ridge: 0.0,
        iterations: 0,
    }
}

/// Reads a `ticker,weight` CSV.
pub fn parse_weights_csv(text: &str) -> AppResult<Vec<(String, f64)>> {
    const OP: &str = "backtest::load_weights";
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| AppError::data(OP, e.to_string()))?;
        let (Some(t), Some(v)) = (row.get(0), row.get(1)) else {
            return Err(AppError::data(OP, format!("row {} needs ticker and weight", i + 2)));
        };
        let w: f64 = v
            .parse()
            .map_err(|_| AppError::data(OP, format!("row {}: invalid weight '{v}'", i + 2)))?;
        out.push((t.to_string(), w));
    }
    if out.is_empty() {
        return Err(AppError::data(OP, "weights file has no rows"));
    }
    Ok(out)
}

/// Checks that weights name distinct assets and sum to one.
pub fn check_budget(weights: &PortfolioWeights) -> AppResult<()> {
    const OP: &str = "backtest::run_backtest";
    let sum: f64 = weights.w.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(AppError::usage(OP, format!("weights sum to {sum}, expected 1")));
    }
    for (i, t) in weights.tickers.iter().enumerate() {
        if weights.tickers[..i].contains(t) {
            return Err(AppError::usage(OP, format!("asset {t} appears twice")));
        }
    }
    Ok(())
}

pub fn backtest(
    panel: &ReturnPanel,
    weights: &PortfolioWeights,
    options: &BacktestOptions,
) -> AppResult<BacktestReport> {
    check_budget(weights)?;
    run_backtest_with(weights, panel, options).op("backtest::run_backtest")
}

pub fn backtest_options(cfg: &RunConfig, rebalance: Rebalance) -> BacktestOptions {
    BacktestOptions {
        risk_free: cfg.risk_free,
        trading_days: cfg.trading_days,
        rebalance,
    }
}
