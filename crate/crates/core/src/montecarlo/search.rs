use serde::{Deserialize, Serialize};

use super::sampler::{PortfolioSampler, SamplerKind, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::market_data::MomentEstimates;
use crate::optimizer::{Bounds, Objective, PortfolioWeights};

/// Number of evenly spaced checkpoints recorded in every trace.
pub const TRACE_GRID_POINTS: u64 = 1_000;

/// What the random search scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchObjective {
    MinVariance,
    MaxSharpe { risk_free: f64 },
}

impl SearchObjective {
    /// Loss to minimize (variance, or negated Sharpe).
    fn loss(&self, ret: f64, var: f64) -> f64 {
        match *self {
            SearchObjective::MinVariance => var,
            SearchObjective::MaxSharpe { risk_free } => {
                let excess = ret - risk_free;
                if var > 0.0 {
                    -excess / var.sqrt()
                } else if excess > 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn value(&self, loss: f64) -> f64 {
        match self {
            SearchObjective::MinVariance => loss,
            SearchObjective::MaxSharpe { .. } => -loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub n_samples: u64,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub bounds: Bounds,
    pub objective: SearchObjective,
    /// Worker threads; 0 and 1 both mean single-threaded.
    pub workers: usize,
}

impl SimulationConfig {
    pub fn new(n_samples: u64, bounds: Bounds, objective: SearchObjective) -> Self {
        Self {
            n_samples,
            sampler: SamplerKind::default(),
            seed: 0,
            bounds,
            objective,
            workers: 1,
        }
    }
}

/// `sample` is the number of draws made so far (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub sample: u64,
    pub best_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub best_weights: PortfolioWeights,
    /// Variance for min-variance searches, Sharpe ratio for max-Sharpe.
    pub best_objective: f64,
    /// Draw index (0-based) of the best sample.
    pub best_index: u64,
    pub accepted: u64,
    pub rejected: u64,
    /// Every improvement plus [`TRACE_GRID_POINTS`] evenly spaced checkpoints.
    pub trace: Vec<TracePoint>,
    pub objective: SearchObjective,
    pub rng: &'static str,
}

impl SimulationResult {
    pub fn rejection_rate(&self) -> f64 {
        self.rejected as f64 / (self.accepted + self.rejected).max(1) as f64
    }

    /// First draw count at which the running best reached `threshold`
    /// (≤ for min-variance, ≥ for max-Sharpe).
    pub fn samples_to_reach(&self, threshold: f64) -> Option<u64> {
        self.trace
            .iter()
            .find(|p| match self.objective {
                SearchObjective::MinVariance => p.best_objective <= threshold,
                SearchObjective::MaxSharpe { .. } => p.best_objective >= threshold,
            })
            .map(|p| p.sample)
    }
}

struct Best {
    loss: f64,
    index: u64,
    w: Vec<f64>,
}

struct ChunkOutcome {
    best: Option<Best>,
    accepted: u64,
    /// (sample count, loss) at each chunk-local improvement.
    improvements: Vec<(u64, f64)>,
    /// (sample count, chunk-local best loss) at grid checkpoints.
    checkpoints: Vec<(u64, Option<f64>)>,
}

fn is_checkpoint(count: u64, n: u64) -> bool {
    if n <= TRACE_GRID_POINTS {
        return true;
    }
    // count is a checkpoint when it equals ceil(k·n/G) for some k.
    let k = (count as u128 * TRACE_GRID_POINTS as u128) / n as u128;
    let at = |k: u128| (k * n as u128).div_ceil(TRACE_GRID_POINTS as u128) as u64;
    at(k) == count || at(k + 1) == count
}

fn run_chunk(
    moments: &MomentEstimates,
    config: &SimulationConfig,
    sampler: &PortfolioSampler,
    range: std::ops::Range<u64>,
) -> ChunkOutcome {
    let n = moments.n_assets();
    let mut w = vec![0.0; n];
    let mut out = ChunkOutcome {
        best: None,
        accepted: 0,
        improvements: Vec::new(),
        checkpoints: Vec::new(),
    };
    let (lower, upper) = (&config.bounds.lower, &config.bounds.upper);
    for index in range {
        sampler.sample_into(index, &mut w);
        let inside = (0..n).all(|i| w[i] >= lower[i] && w[i] <= upper[i]);
        if inside {
            out.accepted += 1;
            let loss = config
                .objective
                .loss(moments.portfolio_return(&w), moments.portfolio_variance(&w));
            if out.best.as_ref().is_none_or(|b| loss < b.loss) {
                out.best = Some(Best {
                    loss,
                    index,
                    w: w.clone(),
                });
                out.improvements.push((index + 1, loss));
            }
        }
        if is_checkpoint(index + 1, config.n_samples) {
            out.checkpoints.push((index + 1, out.best.as_ref().map(|b| b.loss)));
        }
    }
    out
}

/// Random portfolio search with rejection of out-of-bounds draws.
///
/// Results depend only on `(moments, config)`: each draw is a pure function
/// of its index, and worker chunks are merged in index order with ties going
/// to the lowest index, so any worker count gives the identical result.
pub fn simulate_search(moments: &MomentEstimates, config: &SimulationConfig) -> Result<SimulationResult> {
    if config.n_samples == 0 {
        return Err(Error::invalid(
            "montecarlo::simulate_search",
            "n_samples must be at least 1",
        ));
    }
    config.bounds.validate(&moments.tickers)?;
    let n = config.n_samples;
    let sampler = PortfolioSampler::new(config.sampler, moments.n_assets(), config.seed);

    let workers = config.workers.max(1).min(n as usize);
    let chunks: Vec<std::ops::Range<u64>> = (0..workers as u64)
        .map(|k| (k * n / workers as u64)..((k + 1) * n / workers as u64))
        .collect();
    let outcomes: Vec<ChunkOutcome> = if workers == 1 {
        vec![run_chunk(moments, config, &sampler, 0..n)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .iter()
                .cloned()
                .map(|r| {
                    let sampler = &sampler;
                    scope.spawn(move || run_chunk(moments, config, sampler, r))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation worker panicked"))
                .collect()
        })
    };

    let mut best: Option<Best> = None;
    let mut accepted = 0;
    let mut trace: Vec<TracePoint> = Vec::new();
    let objective = config.objective;
    for chunk in outcomes {
        accepted += chunk.accepted;
        let before = best.as_ref().map(|b| b.loss);
        let mut points: Vec<(u64, f64)> = Vec::new();
        for &(sample, loss) in &chunk.improvements {
            if before.is_none_or(|b| loss < b) {
                points.push((sample, loss));
            }
        }
        for &(sample, local) in &chunk.checkpoints {
            let merged = match (before, local) {
                (Some(b), Some(l)) => Some(b.min(l)),
                (b, l) => b.or(l),
            };
            if let Some(v) = merged {
                points.push((sample, v));
            }
        }
        points.sort_by_key(|&(s, _)| s);
        points.dedup_by_key(|&mut (s, _)| s);
        trace.extend(points.into_iter().map(|(sample, loss)| TracePoint {
            sample,
            best_objective: objective.value(loss),
        }));
        if let Some(cb) = chunk.best {
            if before.is_none_or(|b| cb.loss < b) {
                best = Some(cb);
            }
        }
    }

    let rejected = n - accepted;
    let best = best.ok_or(Error::NoAcceptedSamples {
        n_samples: n,
        rejection_rate: 1.0,
    })?;
    let best_weights = PortfolioWeights {
        tickers: moments.tickers.clone(),
        objective_value: moments.portfolio_variance(&best.w),
        w: best.w,
        bounds: Some(config.bounds.clone()),
        objective: Objective::Sampled,
        ridge: 0.0,
        iterations: 0,
    };
    Ok(SimulationResult {
        best_weights,
        best_objective: objective.value(best.loss),
        best_index: best.index,
        accepted,
        rejected,
        trace,
        objective,
        rng: RNG_ALGORITHM,
    })
}
