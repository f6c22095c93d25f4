use serde::Serialize;

use super::search::{simulate_search, SearchObjective, SimulationConfig};
use crate::error::Result;
use crate::market_data::MomentEstimates;
use crate::optimizer::{solve_gmv, solve_max_sharpe, Bounds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub samples: u64,
    pub mean_gap: f64,
    pub stddev_gap: f64,
    pub repetitions: usize,
}

/// Exact optimum from the QP solver: minimum variance, or maximum Sharpe.
pub fn reference_optimum(moments: &MomentEstimates, bounds: &Bounds, objective: SearchObjective) -> Result<f64> {
    match objective {
        SearchObjective::MinVariance => Ok(solve_gmv(moments, bounds)?.objective_value),
        SearchObjective::MaxSharpe { risk_free } => {
            let p = solve_max_sharpe(moments, bounds, risk_free)?;
            Ok((moments.portfolio_return(&p.w) - risk_free) / p.volatility())
        }
    }
}

/// Relative shortfall of a simulated objective against the exact optimum.
pub fn objective_gap(objective: SearchObjective, simulated: f64, optimum: f64) -> f64 {
    match objective {
        SearchObjective::MinVariance => (simulated - optimum) / optimum.abs(),
        SearchObjective::MaxSharpe { .. } => (optimum - simulated) / optimum.abs(),
    }
}

/// For each sample count, runs `repetitions` searches with seeds
/// `template.seed, template.seed + 1, …` and summarizes the relative gap.
pub fn convergence_study(
    moments: &MomentEstimates,
    template: &SimulationConfig,
    sample_counts: &[u64],
    repetitions: usize,
) -> Result<Vec<ConvergenceRow>> {
    let optimum = reference_optimum(moments, &template.bounds, template.objective)?;
    sample_counts
        .iter()
        .map(|&samples| {
            let gaps = (0..repetitions)
                .map(|r| {
                    let mut cfg = template.clone();
                    cfg.n_samples = samples;
                    cfg.seed = template.seed.wrapping_add(r as u64);
                    let res = simulate_search(moments, &cfg)?;
                    Ok(objective_gap(cfg.objective, res.best_objective, optimum))
                })
                .collect::<Result<Vec<f64>>>()?;
            let k = gaps.len().max(1) as f64;
            let mean = gaps.iter().sum::<f64>() / k;
            let var = if gaps.len() > 1 {
                gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            Ok(ConvergenceRow {
                samples,
                mean_gap: mean,
                stddev_gap: var.sqrt(),
                repetitions,
            })
        })
        .collect()
}

/// CSV with header `samples,mean_gap,stddev_gap,repetitions`.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("samples,mean_gap,stddev_gap,repetitions\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.samples, r.mean_gap, r.stddev_gap, r.repetitions
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn gap_shrinks_with_samples() {
        let sigma = DMatrix::from_row_slice(3, 3, &[0.04, 0.006, 0.002, 0.006, 0.09, 0.01, 0.002, 0.01, 0.02]);
        let m = MomentEstimates::new(
            vec!["A".into(), "B".into(), "C".into()],
            DVector::from_vec(vec![0.08, 0.12, 0.05]),
            sigma,
            252,
        )
        .unwrap();
        let cfg = SimulationConfig::new(1, Bounds::long_only(3), SearchObjective::MinVariance);
        let rows = convergence_study(&m, &cfg, &[100, 1_000, 10_000], 8).unwrap();
        assert!(rows.windows(2).all(|r| r[1].mean_gap <= r[0].mean_gap));
        assert!(rows.iter().all(|r| r.mean_gap >= 0.0 && r.repetitions == 8));
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with("samples,mean_gap,stddev_gap,repetitions\n100,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
