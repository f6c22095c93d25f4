//! Stateless HTTP service over an immutable dataset snapshot.
//!
//! Every handler reads the shared [`Dataset`] and nothing else, so responses
//! depend only on the request. Solver work runs on the blocking pool.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use frontierlab_core::backtest::Rebalance;
use frontierlab_core::montecarlo::SearchObjective;
use frontierlab_core::optimizer::{Bounds, FrontierPoint};
use frontierlab_core::{PortfolioWeights, ViewSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::app::{self, BlRequest, Dataset, OptimizeObjective, Provenance, SimulationRequest, Window};
use crate::error::{AppError, AppResult, Kind};

#[derive(Debug, Clone)]
pub struct AppState {
    pub dataset: Arc<Dataset>,
    /// Upper limit on random-search worker threads per request.
    pub max_workers: usize,
}

/// JSON error body with a machine-readable category.
#[derive(Debug)]
pub struct ApiError(AppError);

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let (status, reason) = match e.kind {
            Kind::Usage | Kind::Data => (StatusCode::BAD_REQUEST, e.message.clone()),
            Kind::Infeasible => (StatusCode::UNPROCESSABLE_ENTITY, e.message.clone()),
            // Solver internals stay in the server log.
            Kind::Solver => (
                StatusCode::INTERNAL_SERVER_ERROR,
                "numerical solver failure".to_string(),
            ),
        };
        if e.kind == Kind::Solver {
            eprintln!("error: {e}");
        }
        let body = json!({
            "error": { "category": e.category(), "operation": e.op, "reason": reason }
        });
        (status, axum::Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn parse<T: DeserializeOwned + Default>(op: &'static str, body: &Bytes) -> AppResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| AppError::usage(op, format!("malformed request: {e}")))
}

/// Response body with the provenance block appended.
fn respond<T: Serialize>(payload: &T, provenance: Provenance) -> Response {
    let mut value = serde_json::to_value(payload).expect("response serializes");
    if let Value::Object(map) = &mut value {
        map.insert(
            "provenance".into(),
            serde_json::to_value(provenance).expect("provenance serializes"),
        );
    }
    (StatusCode::OK, axum::Json(value)).into_response()
}

/// Canonical request bytes folded into the response hash.
fn canonical<T: Serialize>(req: &T) -> Vec<u8> {
    serde_json::to_vec(req).expect("request serializes")
}

async fn blocking<T, F>(f: F) -> AppResult<T>
where
    F: FnOnce() -> AppResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|_| AppError {
        kind: Kind::Solver,
        op: "app-interface::serve",
        message: "worker task failed".into(),
    })?
}

/// A bound given for all assets or per ticker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundValue {
    All(f64),
    PerAsset(BTreeMap<String, f64>),
}

/// Box constraints in request form; absent fields keep the long-only default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSpec {
    pub min_weight: Option<f64>,
    pub max_weight: Option<f64>,
    pub lower: Option<BoundValue>,
    pub upper: Option<BoundValue>,
}

impl BoundsSpec {
    pub fn to_bounds(&self, tickers: &[String]) -> AppResult<Bounds> {
        const OP: &str = "optimizer::validate_bounds";
        let n = tickers.len();
        let mut lower = vec![self.min_weight.unwrap_or(0.0); n];
        let mut upper = vec![self.max_weight.unwrap_or(1.0); n];
        for (target, value) in [(&mut lower, &self.lower), (&mut upper, &self.upper)] {
            match value {
                Some(BoundValue::All(v)) => target.iter_mut().for_each(|x| *x = *v),
                Some(BoundValue::PerAsset(map)) => {
                    for (ticker, v) in map {
                        let i = tickers
                            .iter()
                            .position(|t| t == ticker)
                            .ok_or_else(|| AppError::usage(OP, format!("unknown asset '{ticker}' in bounds")))?;
                        target[i] = *v;
                    }
                }
                None => {}
            }
        }
        let b = Bounds { lower, upper };
        b.validate(tickers).map_err(|e| AppError::core(OP, e))?;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeRequest {
    pub bounds: BoundsSpec,
    pub objective: OptimizeObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierRequest {
    pub bounds: BoundsSpec,
    pub points: usize,
}

impl Default for FrontierRequest {
    fn default() -> Self {
        Self {
            bounds: BoundsSpec::default(),
            points: frontierlab_core::optimizer::DEFAULT_FRONTIER_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateRequest {
    pub config: SimulationRequest,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressRequest {
    pub window: Window,
    /// Ticker to weight; the configured GMV portfolio when absent.
    pub weights: Option<BTreeMap<String, f64>>,
}

/// A view as structured JSON or in the text form `rel A > B by x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ViewInput {
    Spec(ViewSpec),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlacklittermanRequest {
    pub views: Vec<ViewInput>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub omega_scale: f64,
    pub bounds: Option<BoundsSpec>,
}

impl Default for BlacklittermanRequest {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestRequest {
    pub weights: BTreeMap<String, f64>,
    pub window: Window,
    pub rebalance: Rebalance,
}

impl Default for BacktestRequest {
    fn default() -> Self {
        Self {
            weights: BTreeMap::new(),
            window: Window::Test,
            rebalance: Rebalance::Daily,
        }
    }
}

pub fn router(state: AppState) -> Router {
    let static_dir = state.dataset.config.service.static_dir.clone();
    let api = Router::new()
        .route("/health", get(health))
        .route("/assets", get(assets))
        .route("/optimize", post(optimize))
        .route("/frontier", post(frontier))
        .route("/simulate", post(simulate))
        .route("/regress", post(regress))
        .route("/blacklitterman", post(blacklitterman))
        .route("/backtest", post(backtest))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn health(State(s): State<AppState>) -> Response {
    respond(
        &json!({ "status": "ok", "version": app::VERSION }),
        s.dataset.provenance(),
    )
}

async fn assets(State(s): State<AppState>) -> Response {
    let ds = &s.dataset;
    let moments = app::moments_out(ds);
    let window = |p: &frontierlab_core::ReturnPanel| {
        json!({
            "start": p.dates().first(),
            "end": p.dates().last(),
            "n_obs": p.n_obs(),
        })
    };
    let body = json!({
        "tickers": moments.tickers,
        "mu": moments.mu,
        "volatility": moments.volatility,
        "boundary": ds.config.boundary,
        "train": window(&ds.train),
        "test": ds.test.as_ref().map(window),
        "market_tickers": ds.market_tickers(),
        "market_weights": ds.market.as_ref().map(|m| m.train.weights.clone()),
        "factors_loaded": ds.factors.is_some(),
        "default_bounds": { "min_weight": ds.config.min_weight, "max_weight": ds.config.upper() },
    });
    respond(&body, ds.provenance())
}

async fn optimize(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let req: OptimizeRequest = parse("optimizer::optimize", &body)?;
    let provenance = s
        .dataset
        .provenance_with(s.dataset.config.simulation.seed, Some(&canonical(&req)));
    let ds = s.dataset.clone();
    let out = blocking(move || {
        let bounds = req.bounds.to_bounds(ds.tickers())?;
        app::optimize(&ds.moments, &bounds, req.objective)
    })
    .await?;
    Ok(respond(&out, provenance))
}

#[derive(Debug, Serialize)]
struct FrontierResponse {
    constrained: Vec<FrontierPoint>,
    unconstrained: Vec<FrontierPoint>,
    gmv_constrained: PortfolioWeights,
    gmv_unconstrained: PortfolioWeights,
    comparison: app::FrontierComparison,
}

async fn frontier(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let req: FrontierRequest = parse("optimizer::trace_frontier", &body)?;
    if req.points < 2 {
        return Err(AppError::usage("optimizer::trace_frontier", "points must be at least 2").into());
    }
    let provenance = s
        .dataset
        .provenance_with(s.dataset.config.simulation.seed, Some(&canonical(&req)));
    let ds = s.dataset.clone();
    let out = blocking(move || {
        let m = &ds.moments;
        let bounds = req.bounds.to_bounds(ds.tickers())?;
        let long_only = Bounds::long_only(m.n_assets());
        Ok(FrontierResponse {
            constrained: app::frontier(m, &bounds, req.points)?,
            unconstrained: app::frontier(m, &long_only, req.points)?,
            gmv_constrained: app::optimize(m, &bounds, OptimizeObjective::MinVariance)?.weights,
            gmv_unconstrained: app::optimize(m, &long_only, OptimizeObjective::MinVariance)?.weights,
            comparison: app::compare_frontiers(m, &bounds, req.points)?,
        })
    })
    .await?;
    Ok(respond(&out, provenance))
}

async fn simulate(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let mut req: SimulateRequest = parse("montecarlo::simulate_search", &body)?;
    req.config.workers = req.config.workers.clamp(1, s.max_workers);
    if let SearchObjective::MaxSharpe { risk_free } = req.config.objective {
        if !risk_free.is_finite() {
            return Err(AppError::usage("montecarlo::simulate_search", "risk_free must be finite").into());
        }
    }
    // Worker count does not change results, so it stays out of the hash.
    let mut hashed = req.clone();
    hashed.config.workers = 1;
    let provenance = s.dataset.provenance_with(req.config.seed, Some(&canonical(&hashed)));
    let ds = s.dataset.clone();
    let out = blocking(move || app::simulate(&ds.moments, &req.config)).await?;
    Ok(respond(&out, provenance))
}

async fn regress(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let req: RegressRequest = parse("factors::regress", &body)?;
    let provenance = s
        .dataset
        .provenance_with(s.dataset.config.simulation.seed, Some(&canonical(&req)));
    let ds = s.dataset.clone();
    let out = blocking(move || {
        let weights = match &req.weights {
            Some(map) => app::weights_from_pairs(&map.iter().map(|(t, w)| (t.clone(), *w)).collect::<Vec<_>>()),
            None => app::optimize(&ds.moments, &ds.config_bounds()?, OptimizeObjective::MinVariance)?.weights,
        };
        app::check_budget(&weights)?;
        app::regress(&ds, &weights, req.window)
    })
    .await?;
    Ok(respond(&out, provenance))
}

async fn blacklitterman(State(s): State<AppState>, body: Bytes) -> ApiResult {
    const OP: &str = "blacklitterman::posterior";
    let req: BlacklittermanRequest = parse(OP, &body)?;
    let provenance = s
        .dataset
        .provenance_with(s.dataset.config.simulation.seed, Some(&canonical(&req)));
    let ds = s.dataset.clone();
    let out = blocking(move || {
        let tickers = ds
            .market_tickers()
            .ok_or_else(|| AppError::usage(OP, "the service was started without market data"))?;
        let mut views = Vec::with_capacity(req.views.len());
        for v in &req.views {
            match v {
                ViewInput::Spec(spec) => views.push(spec.clone()),
                ViewInput::Text(line) => views.extend(crate::pipeline::parse_views(std::slice::from_ref(line))?),
            }
        }
        let bounds = match &req.bounds {
            Some(spec) => Some(spec.to_bounds(tickers)?),
            None => None,
        };
        app::black_litterman(
            &ds,
            &BlRequest {
                views,
                tau: req.tau,
                delta: req.delta,
                omega_scale: req.omega_scale,
                bounds,
            },
        )
    })
    .await?;
    Ok(respond(&out, provenance))
}

async fn backtest(State(s): State<AppState>, body: Bytes) -> ApiResult {
    const OP: &str = "backtest::run_backtest";
    let req: BacktestRequest = parse(OP, &body)?;
    if req.weights.is_empty() {
        return Err(AppError::usage(OP, "weights are required").into());
    }
    let provenance = s
        .dataset
        .provenance_with(s.dataset.config.simulation.seed, Some(&canonical(&req)));
    let ds = s.dataset.clone();
    let out = blocking(move || {
        let weights = app::weights_from_pairs(&req.weights.iter().map(|(t, w)| (t.clone(), *w)).collect::<Vec<_>>());
        let panel = ds.panel_for(&weights.tickers, req.window)?;
        app::backtest(panel, &weights, &app::backtest_options(&ds.config, req.rebalance))
    })
    .await?;
    Ok(respond(&out, provenance))
}

pub fn state(dataset: Dataset) -> AppState {
    let max_workers = dataset.config.service.max_workers.max(1);
    AppState {
        dataset: Arc::new(dataset),
        max_workers,
    }
}

/// Binds the configured address and serves until interrupted.
pub fn serve_blocking(dataset: Dataset) -> AppResult<()> {
    const OP: &str = "app-interface::serve";
    let addr = format!("{}:{}", dataset.config.service.host, dataset.config.service.port);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| AppError::data(OP, e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| AppError::usage(OP, format!("cannot bind {addr}: {e}")))?;
        println!("listening on http://{addr}");
        axum::serve(listener, router(state(dataset)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| AppError::data(OP, e.to_string()))
    })
}
