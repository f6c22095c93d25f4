//! Random portfolio search on the unit simplex, used to show how far naive
//! sampling lands from the exact QP optimum, especially under box limits.

mod convergence;
mod halton;
mod sampler;
mod search;

pub use convergence::{convergence_csv, convergence_study, objective_gap, reference_optimum, ConvergenceRow};
pub use halton::{first_primes, halton_value};
pub use sampler::{sample_portfolio, PortfolioSampler, SamplerKind, RNG_ALGORITHM};
pub use search::{simulate_search, SearchObjective, SimulationConfig, SimulationResult, TracePoint, TRACE_GRID_POINTS};
