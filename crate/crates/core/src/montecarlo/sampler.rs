use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::halton::{first_primes, halton_value};

/// Name of the generator recorded in simulation metadata.
pub const RNG_ALGORITHM: &str = "chacha8, one stream per sample index";

/// How random portfolios are drawn on the unit simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Dirichlet(1, …, 1): uniform on the simplex.
    #[default]
    Dirichlet,
    /// N uniform(0, 1) draws divided by their sum.
    UniformNormalized,
    /// Halton point in N−1 dimensions mapped through ordered spacings.
    Halton,
}

impl std::str::FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dirichlet" => Ok(Self::Dirichlet),
            "uniform_normalized" | "uniform" => Ok(Self::UniformNormalized),
            "halton" => Ok(Self::Halton),
            other => Err(format!(
                "unknown sampler '{other}' (expected dirichlet, uniform_normalized or halton)"
            )),
        }
    }
}

/// Deterministic simplex sampler: draw `i` depends only on `(kind, n, seed, i)`.
#[derive(Debug, Clone)]
pub struct PortfolioSampler {
    kind: SamplerKind,
    dimension: usize,
    base_rng: ChaCha8Rng,
    halton_offset: u64,
    primes: Vec<u64>,
}

impl PortfolioSampler {
    pub fn new(kind: SamplerKind, dimension: usize, seed: u64) -> Self {
        Self {
            kind,
            dimension,
            base_rng: ChaCha8Rng::seed_from_u64(seed),
            // Seeds shift the starting index of the Halton sequence.
            halton_offset: 1 + (seed & 0xFFFF_FFFF),
            primes: first_primes(dimension.saturating_sub(1)),
        }
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Writes draw number `index` into `out` (length = dimension).
    pub fn sample_into(&self, index: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dimension);
        let n = self.dimension;
        if n == 1 {
            out[0] = 1.0;
            return;
        }
        match self.kind {
            SamplerKind::Dirichlet | SamplerKind::UniformNormalized => {
                let mut rng = self.base_rng.clone();
                rng.set_stream(index);
                for x in out.iter_mut() {
                    *x = match self.kind {
                        SamplerKind::Dirichlet => Exp1.sample(&mut rng),
                        _ => rng.random::<f64>(),
                    };
                }
                let sum: f64 = out.iter().sum();
                if sum > 0.0 {
                    out.iter_mut().for_each(|x| *x /= sum);
                } else {
                    out.iter_mut().for_each(|x| *x = 1.0 / n as f64);
                }
            }
            SamplerKind::Halton => {
                let h = self.halton_offset.wrapping_add(index);
                let mut u: Vec<f64> = self.primes.iter().map(|&p| halton_value(h, p)).collect();
                u.sort_by(f64::total_cmp);
                let mut prev = 0.0;
                for (x, &ui) in out.iter_mut().zip(&u) {
                    *x = ui - prev;
                    prev = ui;
                }
                out[n - 1] = 1.0 - prev;
            }
        }
    }

    pub fn sample(&self, index: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.sample_into(index, &mut out);
        out
    }
}

/// One simplex draw; see [`PortfolioSampler`].
pub fn sample_portfolio(kind: SamplerKind, dimension: usize, seed: u64, index: u64) -> Vec<f64> {
    PortfolioSampler::new(kind, dimension, seed).sample(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimension_is_degenerate() {
        for kind in [
            SamplerKind::Dirichlet,
            SamplerKind::UniformNormalized,
            SamplerKind::Halton,
        ] {
            assert_eq!(sample_portfolio(kind, 1, 9, 3), vec![1.0]);
        }
    }

    #[test]
    fn draws_lie_on_the_simplex() {
        for kind in [
            SamplerKind::Dirichlet,
            SamplerKind::UniformNormalized,
            SamplerKind::Halton,
        ] {
            let s = PortfolioSampler::new(kind, 7, 42);
            for i in 0..500 {
                let w = s.sample(i);
                assert!(w.iter().all(|&x| x >= 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn halton_two_dimensions_is_base_two_sequence() {
        let s = PortfolioSampler::new(SamplerKind::Halton, 2, 0);
        for i in 0..20u64 {
            let h = halton_value(1 + i, 2);
            assert_eq!(s.sample(i), vec![h, 1.0 - h]);
        }
    }

    #[test]
    fn dirichlet_mean_is_uniform() {
        let n = 4;
        let s = PortfolioSampler::new(SamplerKind::Dirichlet, n, 2024);
        let draws = 100_000;
        let mut mean = vec![0.0; n];
        for i in 0..draws {
            for (m, x) in mean.iter_mut().zip(s.sample(i)) {
                *m += x / draws as f64;
            }
        }
        assert!(mean.iter().all(|m| (m - 0.25).abs() < 0.005), "{mean:?}");
    }

    #[test]
    fn draws_are_pure_functions_of_index() {
        let s = PortfolioSampler::new(SamplerKind::Dirichlet, 5, 1);
        let forward: Vec<Vec<f64>> = (0..10).map(|i| s.sample(i)).collect();
        let backward: Vec<Vec<f64>> = (0..10).rev().map(|i| s.sample(i)).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        assert_ne!(
            s.sample(0),
            PortfolioSampler::new(SamplerKind::Dirichlet, 5, 2).sample(0)
        );
    }

    #[test]
    fn parses_names() {
        assert_eq!("halton".parse::<SamplerKind>().unwrap(), SamplerKind::Halton);
        assert!("sobol".parse::<SamplerKind>().is_err());
    }
}
