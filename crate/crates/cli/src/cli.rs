//! Command-line interface.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use frontierlab_core::backtest::Rebalance;
use frontierlab_core::optimizer::Bounds;
use frontierlab_core::PortfolioWeights;

use crate::app::{self, Dataset, Needs, OptimizeObjective, SimulationRequest, Window};
use crate::config::{self, Overrides, RunConfig};
use crate::error::{AppError, AppResult, EXIT_OK, EXIT_USAGE};
use crate::{fixtures, output, pipeline, service};

#[derive(Debug, Parser)]
#[command(
    name = "frontierlab",
    version,
    about = "Portfolio optimization, random search, factor regression, Black-Litterman and backtesting"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand; each overrides the config file.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true, env = "FRONTIERLAB_CONFIG")]
    pub config: Option<PathBuf>,
    /// Price CSV (wide or long layout), path or URL.
    #[arg(long, global = true, env = "FRONTIERLAB_PRICES")]
    pub prices: Option<String>,
    /// Daily five-factor CSV, path or URL.
    #[arg(long, global = true, env = "FRONTIERLAB_FACTORS")]
    pub factors: Option<String>,
    /// Last date of the estimation window (YYYY-MM-DD).
    #[arg(long, global = true, env = "FRONTIERLAB_BOUNDARY")]
    pub boundary: Option<String>,
    #[arg(long, global = true, env = "FRONTIERLAB_TRADING_DAYS")]
    pub trading_days: Option<u32>,
    /// Annualized risk-free rate.
    #[arg(long, global = true, env = "FRONTIERLAB_RISK_FREE", allow_negative_numbers = true)]
    pub risk_free: Option<f64>,
    /// Lower weight bound applied to every asset.
    #[arg(long, global = true, env = "FRONTIERLAB_MIN_WEIGHT")]
    pub min_weight: Option<f64>,
    /// Upper weight bound applied to every asset.
    #[arg(long, global = true, env = "FRONTIERLAB_MAX_WEIGHT")]
    pub max_weight: Option<f64>,
    #[arg(long, global = true, env = "FRONTIERLAB_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for random search.
    #[arg(long, global = true, env = "FRONTIERLAB_WORKERS")]
    pub workers: Option<usize>,
    /// Output directory; without it results go to stdout and the summary to stderr.
    #[arg(long, global = true, env = "FRONTIERLAB_OUT")]
    pub out: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Annualized mean returns and covariance of the estimation window.
    Moments,
    /// Global minimum-variance portfolio under the configured bounds.
    Gmv,
    /// Efficient frontier, optionally against the long-only frontier.
    Frontier(FrontierArgs),
    /// Random-portfolio search compared with the exact optimum.
    Simulate(SimulateArgs),
    /// Five-factor OLS and Huber regressions of a portfolio.
    Regress(RegressArgs),
    /// Black-Litterman posterior and allocation.
    Bl(BlArgs),
    /// Out-of-sample evaluation of fixed weights.
    Backtest(BacktestArgs),
    /// Every stage end to end: moments, gmv, frontier, regress, bl, backtest.
    Pipeline(BlArgs),
    /// HTTP service over a snapshot of the configured data.
    Serve(ServeArgs),
    /// Writes the synthetic fixture files.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    #[arg(long, env = "FRONTIERLAB_POINTS")]
    pub points: Option<usize>,
    /// Also trace the long-only frontier at the same targets.
    #[arg(long)]
    pub compare_unconstrained: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SearchTarget {
    MinVariance,
    MaxSharpe,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, env = "FRONTIERLAB_SAMPLES")]
    pub samples: Option<u64>,
    /// dirichlet, uniform_normalized or halton.
    #[arg(long, env = "FRONTIERLAB_SAMPLER")]
    pub sampler: Option<String>,
    #[arg(long, value_enum, default_value = "min-variance")]
    pub objective: SearchTarget,
    /// Comma-separated subset of tickers.
    #[arg(long, value_delimiter = ',')]
    pub assets: Option<Vec<String>>,
    /// Maximum number of convergence-trace rows.
    #[arg(long, default_value_t = 200)]
    pub trace_points: usize,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[arg(long, default_value = "train")]
    pub window: Window,
    /// `ticker,weight` CSV; defaults to the GMV portfolio under the configured bounds.
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug, Args)]
pub struct BlArgs {
    /// `ticker,market_cap` CSV with a TOTAL row.
    #[arg(long, env = "FRONTIERLAB_MARKET_CAPS")]
    pub market_caps: Option<String>,
    /// Price CSV of the residual market asset.
    #[arg(long, env = "FRONTIERLAB_RESIDUAL")]
    pub residual: Option<String>,
    /// File with one view per line.
    #[arg(long, env = "FRONTIERLAB_VIEWS")]
    pub views: Option<String>,
    /// Inline view, e.g. "rel AAPL > GOOG by 0.02" or "abs TSLA = 0.10"; repeatable.
    #[arg(long = "view")]
    pub view: Vec<String>,
    #[arg(long, env = "FRONTIERLAB_TAU")]
    pub tau: Option<f64>,
    /// Overrides the implied risk aversion.
    #[arg(long, env = "FRONTIERLAB_DELTA")]
    pub delta: Option<f64>,
    #[arg(long, env = "FRONTIERLAB_OMEGA_SCALE")]
    pub omega_scale: Option<f64>,
    /// Cap on every Black-Litterman weight; budget-only when absent.
    #[arg(long, env = "FRONTIERLAB_BL_MAX_WEIGHT")]
    pub bl_max_weight: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PortfolioChoice {
    /// GMV under the configured bounds.
    Gmv,
    /// GMV with bounds [0, 1].
    LongOnlyGmv,
    /// Maximum Sharpe ratio under the configured bounds.
    MaxSharpe,
    /// 1/N.
    Equal,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// `ticker,weight` CSV; overrides --portfolio.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, value_enum, default_value = "gmv")]
    pub portfolio: PortfolioChoice,
    #[arg(long, value_enum, default_value = "daily")]
    pub rebalance: RebalanceArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RebalanceArg {
    Daily,
    BuyAndHold,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "FRONTIERLAB_HOST")]
    pub host: Option<String>,
    #[arg(long, env = "FRONTIERLAB_PORT")]
    pub port: Option<u16>,
    /// Directory of built UI assets served at `/`.
    #[arg(long, env = "FRONTIERLAB_STATIC_DIR")]
    pub static_dir: Option<String>,
    #[command(flatten)]
    pub bl: BlArgs,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = fixtures::FIXTURE_SEED)]
    pub fixture_seed: u64,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn overrides(common: &CommonArgs, command: &Command) -> Overrides {
    let mut o = Overrides {
        prices: common.prices.clone(),
        factors: common.factors.clone(),
        boundary: common.boundary.clone(),
        trading_days: common.trading_days,
        risk_free: common.risk_free,
        min_weight: common.min_weight,
        max_weight: common.max_weight,
        seed: common.seed,
        workers: common.workers,
        out: common.out.clone(),
        ..Overrides::default()
    };
    let bl = match command {
        Command::Bl(b) | Command::Pipeline(b) => Some(b),
        Command::Serve(s) => Some(&s.bl),
        _ => None,
    };
    if let Some(b) = bl {
        o.market_caps = b.market_caps.clone();
        o.residual = b.residual.clone();
        o.views_file = b.views.clone();
        o.views = b.view.clone();
        o.tau = b.tau;
        o.delta = b.delta;
        o.omega_scale = b.omega_scale;
        o.bl_max_weight = b.bl_max_weight;
    }
    match command {
        Command::Frontier(f) => o.points = f.points,
        Command::Simulate(s) => {
            o.samples = s.samples;
            o.sampler = s.sampler.clone();
        }
        Command::Serve(s) => {
            o.host = s.host.clone();
            o.port = s.port;
            o.static_dir = s.static_dir.clone();
        }
        _ => {}
    }
    o
}

/// Machine-readable files plus a human summary.
struct Emit {
    files: Vec<(&'static str, String)>,
    summary: String,
}

impl Emit {
    fn write(self, cfg: &RunConfig, provenance: &app::Provenance) -> AppResult<()> {
        const OP: &str = "app-interface::write_output";
        let trailer = format!(
            "config_hash: {}\nseed: {}\nversion: {}\n",
            provenance.config_hash, provenance.seed, provenance.version
        );
        match &cfg.output_dir {
            Some(dir) => {
                let dir = Path::new(dir);
                std::fs::create_dir_all(dir)
                    .map_err(|e| AppError::data(OP, format!("cannot create {}: {e}", dir.display())))?;
                for (name, text) in &self.files {
                    std::fs::write(dir.join(name), text)
                        .map_err(|e| AppError::data(OP, format!("cannot write {name}: {e}")))?;
                }
                std::fs::write(dir.join("provenance.json"), output::provenance_json(provenance))
                    .map_err(|e| AppError::data(OP, format!("cannot write provenance.json: {e}")))?;
                print!("{}{trailer}", self.summary);
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                for (_, text) in &self.files {
                    let _ = stdout.write_all(text.as_bytes());
                }
                eprint!("{}{trailer}", self.summary);
            }
        }
        Ok(())
    }
}

fn load_weights_file(path: &str) -> AppResult<PortfolioWeights> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::data("backtest::load_weights", format!("cannot read {path}: {e}")))?;
    Ok(app::weights_from_pairs(&app::parse_weights_csv(&text)?))
}

fn choose_portfolio(ds: &Dataset, choice: PortfolioChoice) -> AppResult<PortfolioWeights> {
    let m = &ds.moments;
    Ok(match choice {
        PortfolioChoice::Gmv => app::optimize(m, &ds.config_bounds()?, OptimizeObjective::MinVariance)?.weights,
        PortfolioChoice::LongOnlyGmv => {
            app::optimize(m, &Bounds::long_only(m.n_assets()), OptimizeObjective::MinVariance)?.weights
        }
        PortfolioChoice::MaxSharpe => {
            let objective = OptimizeObjective::MaxSharpe {
                risk_free: ds.config.risk_free,
            };
            app::optimize(m, &ds.config_bounds()?, objective)?.weights
        }
        PortfolioChoice::Equal => {
            let n = m.n_assets() as f64;
            app::weights_from_pairs(&m.tickers.iter().map(|t| (t.clone(), 1.0 / n)).collect::<Vec<_>>())
        }
    })
}

pub fn run(cli: Cli) -> AppResult<()> {
    if let Command::Fixtures(f) = &cli.command {
        let written = fixtures::write_fixtures(&f.dir, f.fixture_seed)
            .map_err(|e| AppError::data("app-interface::fixtures", e.to_string()))?;
        for p in written {
            println!("{}", p.display());
        }
        return Ok(());
    }
    let over = overrides(&cli.common, &cli.command);
    let cfg = config::resolve(cli.common.config.as_deref(), over)?;
    let needs = match &cli.command {
        Command::Regress(_) => Needs {
            factors: true,
            ..Needs::default()
        },
        Command::Bl(_) => Needs {
            market: true,
            ..Needs::default()
        },
        Command::Backtest(_) => Needs {
            test_window: true,
            market: cfg.bl.market_caps.is_some() && cfg.bl.residual.is_some(),
            ..Needs::default()
        },
        Command::Pipeline(_) => Needs::ALL,
        Command::Serve(_) => Needs {
            factors: cfg.factors.is_some(),
            market: cfg.bl.market_caps.is_some() && cfg.bl.residual.is_some(),
            test_window: false,
        },
        _ => Needs::default(),
    };
    let ds = Dataset::load(cfg, needs)?;
    let mut provenance = ds.provenance();
    let emit = match cli.command {
        Command::Moments => {
            let m = app::moments_out(&ds);
            Emit {
                files: vec![("moments.csv", output::moments_csv(&m))],
                summary: output::moments_summary(&m),
            }
        }
        Command::Gmv => {
            let p = app::optimize(&ds.moments, &ds.config_bounds()?, OptimizeObjective::MinVariance)?;
            Emit {
                files: vec![(
                    "gmv_weights.csv",
                    output::weights_csv(ds.tickers(), &[("weight", &p.weights.w)]),
                )],
                summary: output::portfolio_summary(
                    &format!("GMV, weights in [{}, {}]", ds.config.min_weight, ds.config.upper()),
                    &p,
                ),
            }
        }
        Command::Frontier(f) => {
            let bounds = ds.config_bounds()?;
            if f.compare_unconstrained {
                let c = app::compare_frontiers(&ds.moments, &bounds, ds.config.frontier_points)?;
                Emit {
                    files: vec![("frontier.csv", output::frontier_comparison_csv(&c))],
                    summary: output::frontier_comparison_summary(&c, ds.config.upper()),
                }
            } else {
                let points = app::frontier(&ds.moments, &bounds, ds.config.frontier_points)?;
                Emit {
                    files: vec![("frontier.csv", output::frontier_csv(&points))],
                    summary: output::frontier_summary(&points),
                }
            }
        }
        Command::Simulate(s) => {
            let objective = match s.objective {
                SearchTarget::MinVariance => "min-variance",
                SearchTarget::MaxSharpe => "max-sharpe",
            };
            let sim = &ds.config.simulation;
            let req = SimulationRequest {
                samples: sim.samples,
                seed: sim.seed,
                sampler: sim.sampler,
                objective: config::parse_search_objective(objective, ds.config.risk_free)?,
                min_weight: ds.config.min_weight,
                max_weight: ds.config.max_weight,
                assets: s.assets,
                workers: sim.workers,
                trace_points: s.trace_points,
            };
            let out = app::simulate(&ds.moments, &req)?;
            provenance.seed = out.seed;
            Emit {
                files: vec![
                    (
                        "simulation_weights.csv",
                        output::weights_csv(&out.tickers, &[("weight", &out.best_weights)]),
                    ),
                    ("simulation_trace.csv", output::simulation_trace_csv(&out)),
                ],
                summary: output::simulation_summary(&out),
            }
        }
        Command::Regress(r) => {
            let weights = match &r.weights {
                Some(path) => load_weights_file(path)?,
                None => choose_portfolio(&ds, PortfolioChoice::Gmv)?,
            };
            let out = app::regress(&ds, &weights, r.window)?;
            Emit {
                files: vec![("regression.txt", output::regression_text(&out))],
                summary: output::regression_summary(&out),
            }
        }
        Command::Bl(_) => {
            let out = app::black_litterman(&ds, &pipeline::bl_request(&ds)?)?;
            Emit {
                files: vec![("bl.csv", output::bl_csv(&out))],
                summary: output::bl_summary(&out),
            }
        }
        Command::Backtest(b) => {
            let (name, weights) = match &b.weights {
                Some(path) => ("weights_file", load_weights_file(path)?),
                None => {
                    let name = match b.portfolio {
                        PortfolioChoice::Gmv => "gmv",
                        PortfolioChoice::LongOnlyGmv => "long_only_gmv",
                        PortfolioChoice::MaxSharpe => "max_sharpe",
                        PortfolioChoice::Equal => "equal_weight",
                    };
                    (name, choose_portfolio(&ds, b.portfolio)?)
                }
            };
            let rebalance = match b.rebalance {
                RebalanceArg::Daily => Rebalance::Daily,
                RebalanceArg::BuyAndHold => Rebalance::BuyAndHold,
            };
            let panel = ds.panel_for(&weights.tickers, Window::Test)?;
            let report = app::backtest(panel, &weights, &app::backtest_options(&ds.config, rebalance))?;
            let rows = [(name, &report)];
            Emit {
                files: vec![
                    ("backtest.csv", output::backtest_csv(&rows)),
                    ("wealth.csv", output::wealth_csv(&rows)),
                ],
                summary: output::backtest_summary(&rows),
            }
        }
        Command::Pipeline(_) => {
            let artifacts = pipeline::run(&ds)?;
            if let Some(dir) = &ds.config.output_dir {
                const OP: &str = "app-interface::write_output";
                let dir = Path::new(dir);
                std::fs::create_dir_all(dir)
                    .map_err(|e| AppError::data(OP, format!("cannot create {}: {e}", dir.display())))?;
                for (name, text) in &artifacts.files {
                    std::fs::write(dir.join(name), text)
                        .map_err(|e| AppError::data(OP, format!("cannot write {name}: {e}")))?;
                }
            }
            print!("{}", artifacts.summary);
            return Ok(());
        }
        Command::Serve(_) => return service::serve_blocking(ds),
        Command::Fixtures(_) => unreachable!("handled before loading data"),
    };
    emit.write(&ds.config, &provenance)
}
