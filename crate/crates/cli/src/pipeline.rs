//! End-to-end recipe: moments, GMV, frontier, regression, Black-Litterman, backtest.

use frontierlab_core::backtest::Rebalance;
use frontierlab_core::optimizer::Bounds;
use frontierlab_core::ViewSpec;
use serde::Serialize;

use crate::app::{self, BlRequest, Dataset, OptimizeObjective, Provenance, Window};
use crate::error::{AppError, AppResult, Context};
use crate::output;

/// Stage identifiers in execution order.
pub const STAGES: [&str; 6] = ["moments", "gmv", "frontier", "regress", "bl", "backtest"];

/// Named pipeline with its provenance block.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecipe {
    pub name: &'static str,
    pub stages: Vec<StageSpec>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSpec {
    pub stage: &'static str,
    pub parameters: Vec<(&'static str, String)>,
}

/// Files produced by a run, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(&'static str, String)>,
    pub summary: String,
}

pub fn parse_views(lines: &[String]) -> AppResult<Vec<ViewSpec>> {
    frontierlab_core::blacklitterman::parse_views(&lines.join("\n")).op("blacklitterman::parse_views")
}

/// Black-Litterman request from the run configuration.
pub fn bl_request(ds: &Dataset) -> AppResult<BlRequest> {
    let c = &ds.config.bl;
    let bounds = match (c.max_weight, ds.market_tickers()) {
        (Some(cap), Some(tickers)) => Some(app::uniform_bounds(tickers, 0.0, cap)?),
        _ => None,
    };
    Ok(BlRequest {
        views: parse_views(&c.views)?,
        tau: c.tau,
        delta: c.delta,
        omega_scale: c.omega_scale,
        bounds,
    })
}

pub fn recipe(ds: &Dataset) -> ExperimentRecipe {
    let c = &ds.config;
    let cap = c.upper().to_string();
    let boundary = c.boundary.map_or_else(|| "-".into(), |d| d.to_string());
    let stage = |stage, parameters| StageSpec { stage, parameters };
    ExperimentRecipe {
        name: "fixture-end-to-end",
        stages: vec![
            stage(
                "moments",
                vec![("boundary", boundary), ("trading_days", c.trading_days.to_string())],
            ),
            stage(
                "gmv",
                vec![("max_weight", cap.clone()), ("min_weight", c.min_weight.to_string())],
            ),
            stage(
                "frontier",
                vec![("points", c.frontier_points.to_string()), ("max_weight", cap.clone())],
            ),
            stage(
                "regress",
                vec![("portfolio", "gmv_constrained".into()), ("window", "train".into())],
            ),
            stage(
                "bl",
                vec![
                    ("views", c.bl.views.len().to_string()),
                    ("omega_scale", c.bl.omega_scale.to_string()),
                ],
            ),
            stage(
                "backtest",
                vec![("window", "test".into()), ("rebalance", "daily".into())],
            ),
        ],
        provenance: ds.provenance(),
    }
}

/// Runs every stage on a dataset loaded with [`app::Needs::ALL`].
pub fn run(ds: &Dataset) -> AppResult<Artifacts> {
    let c = &ds.config;
    let mut files = Vec::new();
    let mut summary = String::new();

    let moments = app::moments_out(ds);
    files.push(("moments.csv", output::moments_csv(&moments)));
    summary.push_str(&output::moments_summary(&moments));
    summary.push('\n');

    let capped = ds.config_bounds()?;
    let long_only = Bounds::long_only(ds.moments.n_assets());
    let gmv_capped = app::optimize(&ds.moments, &capped, OptimizeObjective::MinVariance)?;
    let gmv_long = app::optimize(&ds.moments, &long_only, OptimizeObjective::MinVariance)?;
    files.push((
        "gmv_weights.csv",
        output::weights_csv(
            ds.tickers(),
            &[
                ("constrained", &gmv_capped.weights.w),
                ("long_only", &gmv_long.weights.w),
            ],
        ),
    ));
    summary.push_str(&output::portfolio_summary(
        &format!("GMV, weights capped at {}", output::num(c.upper())),
        &gmv_capped,
    ));
    summary.push_str(&output::portfolio_summary("GMV, long-only", &gmv_long));
    summary.push('\n');

    let comparison = app::compare_frontiers(&ds.moments, &capped, c.frontier_points)?;
    files.push(("frontier.csv", output::frontier_comparison_csv(&comparison)));
    summary.push_str(&output::frontier_comparison_summary(&comparison, c.upper()));
    summary.push('\n');

    let regression = app::regress(ds, &gmv_capped.weights, Window::Train)?;
    files.push(("regression.txt", output::regression_text(&regression)));
    summary.push_str(&output::regression_summary(&regression));
    summary.push('\n');

    let bl = app::black_litterman(ds, &bl_request(ds)?)?;
    files.push(("bl.csv", output::bl_csv(&bl)));
    summary.push_str(&output::bl_summary(&bl));
    summary.push('\n');

    let test = ds.window(Window::Test)?;
    let market_test = ds
        .market
        .as_ref()
        .and_then(|m| m.test.as_ref())
        .ok_or_else(|| AppError::usage("backtest::run_backtest", "the market test window is empty"))?;
    let options = app::backtest_options(c, Rebalance::Daily);
    let n = ds.moments.n_assets();
    let equal = app::weights_from_pairs(
        &ds.tickers()
            .iter()
            .map(|t| (t.clone(), 1.0 / n as f64))
            .collect::<Vec<_>>(),
    );
    let reports = [
        ("gmv_constrained", app::backtest(test, &gmv_capped.weights, &options)?),
        ("gmv_long_only", app::backtest(test, &gmv_long.weights, &options)?),
        ("equal_weight", app::backtest(test, &equal, &options)?),
        ("black_litterman", app::backtest(market_test, &bl.weights, &options)?),
    ];
    let rows: Vec<(&str, &_)> = reports.iter().map(|(n, r)| (*n, r)).collect();
    files.push(("backtest.csv", output::backtest_csv(&rows)));
    let aligned: Vec<(&str, &_)> = rows
        .iter()
        .filter(|(_, r)| r.dates == rows[0].1.dates)
        .copied()
        .collect();
    files.push(("wealth.csv", output::wealth_csv(&aligned)));
    summary.push_str(&output::backtest_summary(&rows));
    summary.push('\n');

    let recipe = recipe(ds);
    summary.push_str(&format!(
        "stages: {}\nconfig_hash: {}\nseed: {}\nversion: {}\n",
        STAGES.join(" -> "),
        recipe.provenance.config_hash,
        recipe.provenance.seed,
        recipe.provenance.version
    ));
    let mut recipe_json = serde_json::to_string_pretty(&recipe).expect("recipe serializes");
    recipe_json.push('\n');
    files.push(("recipe.json", recipe_json));
    files.push(("provenance.json", output::provenance_json(&recipe.provenance)));
    files.push(("summary.txt", summary.clone()));
    Ok(Artifacts { files, summary })
}
