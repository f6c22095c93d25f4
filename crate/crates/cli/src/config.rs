//! Run configuration: TOML file, overridden by environment and flags.

use std::path::{Path, PathBuf};

use frontierlab_core::market_data::{parse_date, DEFAULT_TRADING_DAYS};
use frontierlab_core::montecarlo::{SamplerKind, SearchObjective};
use frontierlab_core::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

const OP: &str = "app-interface::load_config";

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: u64 = 10_000;
pub const DEFAULT_OMEGA_SCALE: f64 = 1.0;
pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_PORT: u16 = 8642;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub frontier: FrontierSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub bl: BlSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub service: ServiceSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub prices: Option<String>,
    pub factors: Option<String>,
    pub boundary: Option<String>,
    pub trading_days: Option<u32>,
    pub risk_free: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub min_weight: Option<f64>,
    pub max_weight: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierSection {
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub sampler: Option<String>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlSection {
    pub market_caps: Option<String>,
    pub residual: Option<String>,
    /// Path to a views file.
    pub views: Option<String>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub omega_scale: Option<f64>,
    pub max_weight: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSection {
    pub host: Option<String>,
    pub port: Option<u16>,
    pub static_dir: Option<String>,
    pub max_workers: Option<usize>,
}

/// Values supplied on the command line or through `FRONTIERLAB_*` variables.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub prices: Option<String>,
    pub factors: Option<String>,
    pub boundary: Option<String>,
    pub trading_days: Option<u32>,
    pub risk_free: Option<f64>,
    pub min_weight: Option<f64>,
    pub max_weight: Option<f64>,
    pub points: Option<usize>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub sampler: Option<String>,
    pub workers: Option<usize>,
    pub market_caps: Option<String>,
    pub residual: Option<String>,
    pub views_file: Option<String>,
    pub views: Vec<String>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub omega_scale: Option<f64>,
    pub bl_max_weight: Option<f64>,
    pub out: Option<String>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub static_dir: Option<String>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub prices: Option<String>,
    pub factors: Option<String>,
    pub boundary: Option<NaiveDate>,
    pub trading_days: u32,
    pub risk_free: f64,
    pub min_weight: f64,
    /// `None` leaves the long-only cap of 1.
    pub max_weight: Option<f64>,
    pub frontier_points: usize,
    pub simulation: SimulationSettings,
    pub bl: BlSettings,
    pub output_dir: Option<String>,
    #[serde(skip)]
    pub service: ServiceSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSettings {
    pub samples: u64,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlSettings {
    pub market_caps: Option<String>,
    pub residual: Option<String>,
    /// View lines in `rel A > B by x` / `abs A = x` form.
    pub views: Vec<String>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub omega_scale: f64,
    /// `None` gives the budget-only allocation.
    pub max_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServiceSettings {
    pub host: String,
    pub port: u16,
    pub static_dir: Option<String>,
    pub max_workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            prices: None,
            factors: None,
            boundary: None,
            trading_days: DEFAULT_TRADING_DAYS,
            risk_free: 0.0,
            min_weight: 0.0,
            max_weight: None,
            frontier_points: frontierlab_core::optimizer::DEFAULT_FRONTIER_POINTS,
            simulation: SimulationSettings {
                samples: DEFAULT_SAMPLES,
                seed: DEFAULT_SEED,
                sampler: SamplerKind::Dirichlet,
                workers: 1,
            },
            bl: BlSettings {
                market_caps: None,
                residual: None,
                views: Vec::new(),
                tau: None,
                delta: None,
                omega_scale: DEFAULT_OMEGA_SCALE,
                max_weight: None,
            },
            output_dir: None,
            service: ServiceSettings {
                host: DEFAULT_HOST.into(),
                port: DEFAULT_PORT,
                static_dir: None,
                max_workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            },
        }
    }
}

pub fn parse_file_config(text: &str) -> AppResult<FileConfig> {
    toml::from_str(text).map_err(|e| AppError::usage(OP, format!("invalid config: {e}")))
}

/// Paths in a config file are relative to the file's directory.
fn relative_to(base: Option<&Path>, path: Option<String>) -> Option<String> {
    let path = path?;
    if path.starts_with("http://") || path.starts_with("https://") {
        return Some(path);
    }
    match base {
        Some(dir) if Path::new(&path).is_relative() => Some(dir.join(&path).to_string_lossy().into_owned()),
        _ => Some(path),
    }
}

fn read_views_file(path: &str) -> AppResult<Vec<String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| AppError::data(OP, format!("cannot read views file {path}: {e}")))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn check_file(label: &str, path: &Option<String>) -> AppResult<()> {
    match path {
        Some(p) if !p.starts_with("http://") && !p.starts_with("https://") && !Path::new(p).is_file() => {
            Err(AppError::data(OP, format!("{label} file {p} does not exist")))
        }
        _ => Ok(()),
    }
}

fn check_weight(label: &str, v: Option<f64>) -> AppResult<()> {
    match v {
        Some(x) if !(0.0..=1.0).contains(&x) || !x.is_finite() => {
            Err(AppError::usage(OP, format!("{label} must lie in [0, 1], got {x}")))
        }
        _ => Ok(()),
    }
}

/// Merges a config file (if any) with overrides; later sources win.
pub fn resolve(config_path: Option<&Path>, over: Overrides) -> AppResult<RunConfig> {
    let (file, base) = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| AppError::data(OP, format!("cannot read config {}: {e}", p.display())))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
            (parse_file_config(&text)?, Some(dir))
        }
        None => (FileConfig::default(), None),
    };
    let base = base.as_deref();
    let d = RunConfig::default();

    let boundary = match over.boundary.or(file.data.boundary) {
        Some(s) => Some(parse_date(&s).ok_or_else(|| AppError::usage(OP, format!("invalid boundary date '{s}'")))?),
        None => None,
    };
    let sampler = match over.sampler.or(file.simulation.sampler) {
        Some(s) => s.parse::<SamplerKind>().map_err(|e| AppError::usage(OP, e))?,
        None => d.simulation.sampler,
    };
    let views_file = over.views_file.or_else(|| relative_to(base, file.bl.views));
    let mut views = match &views_file {
        Some(p) => read_views_file(p)?,
        None => Vec::new(),
    };
    views.extend(over.views);

    let cfg = RunConfig {
        prices: over.prices.or_else(|| relative_to(base, file.data.prices)),
        factors: over.factors.or_else(|| relative_to(base, file.data.factors)),
        boundary,
        trading_days: over.trading_days.or(file.data.trading_days).unwrap_or(d.trading_days),
        risk_free: over.risk_free.or(file.data.risk_free).unwrap_or(d.risk_free),
        min_weight: over.min_weight.or(file.bounds.min_weight).unwrap_or(d.min_weight),
        max_weight: over.max_weight.or(file.bounds.max_weight),
        frontier_points: over.points.or(file.frontier.points).unwrap_or(d.frontier_points),
        simulation: SimulationSettings {
            samples: over.samples.or(file.simulation.samples).unwrap_or(d.simulation.samples),
            seed: over.seed.or(file.simulation.seed).unwrap_or(d.simulation.seed),
            sampler,
            workers: over.workers.or(file.simulation.workers).unwrap_or(d.simulation.workers),
        },
        bl: BlSettings {
            market_caps: over.market_caps.or_else(|| relative_to(base, file.bl.market_caps)),
            residual: over.residual.or_else(|| relative_to(base, file.bl.residual)),
            views,
            tau: over.tau.or(file.bl.tau),
            delta: over.delta.or(file.bl.delta),
            omega_scale: over.omega_scale.or(file.bl.omega_scale).unwrap_or(d.bl.omega_scale),
            max_weight: over.bl_max_weight.or(file.bl.max_weight),
        },
        output_dir: over.out.or_else(|| relative_to(base, file.output.dir)),
        service: ServiceSettings {
            host: over.host.or(file.service.host).unwrap_or(d.service.host),
            port: over.port.or(file.service.port).unwrap_or(d.service.port),
            static_dir: over.static_dir.or_else(|| relative_to(base, file.service.static_dir)),
            max_workers: file.service.max_workers.unwrap_or(d.service.max_workers).max(1),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Referenced files exist and numeric settings are in range.
    pub fn validate(&self) -> AppResult<()> {
        check_file("prices", &self.prices)?;
        check_file("factors", &self.factors)?;
        check_file("market caps", &self.bl.market_caps)?;
        check_file("residual", &self.bl.residual)?;
        check_weight("min_weight", Some(self.min_weight))?;
        check_weight("max_weight", self.max_weight)?;
        check_weight("bl max_weight", self.bl.max_weight)?;
        if let Some(hi) = self.max_weight {
            if hi < self.min_weight {
                return Err(AppError::usage(
                    OP,
                    format!("max_weight {hi} is below min_weight {}", self.min_weight),
                ));
            }
        }
        if self.trading_days == 0 {
            return Err(AppError::usage(OP, "trading_days must be positive"));
        }
        if !self.risk_free.is_finite() {
            return Err(AppError::usage(OP, "risk_free must be finite"));
        }
        if self.frontier_points < 2 {
            return Err(AppError::usage(OP, "frontier points must be at least 2"));
        }
        if self.simulation.samples == 0 {
            return Err(AppError::usage(OP, "simulation samples must be positive"));
        }
        if !(self.bl.omega_scale > 0.0 && self.bl.omega_scale.is_finite()) {
            return Err(AppError::usage(OP, "omega_scale must be positive"));
        }
        Ok(())
    }

    /// Upper weight bound actually applied (1 when uncapped).
    pub fn upper(&self) -> f64 {
        self.max_weight.unwrap_or(1.0)
    }

    /// SHA-256 over the canonical JSON form, with each referenced file
    /// replaced by the digest of its contents so the hash does not depend on
    /// where the files live.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        let digest_of = |p: &mut Option<String>| {
            if let Some(path) = p.as_mut() {
                if let Ok(bytes) = std::fs::read(&*path) {
                    *path = format!("sha256:{}", hex(&Sha256::digest(bytes)));
                }
            }
        };
        digest_of(&mut canonical.prices);
        digest_of(&mut canonical.factors);
        digest_of(&mut canonical.bl.market_caps);
        digest_of(&mut canonical.bl.residual);
        canonical.output_dir = None;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses an objective name used by `simulate`.
pub fn parse_search_objective(name: &str, risk_free: f64) -> AppResult<SearchObjective> {
    match name {
        "min-variance" | "min_variance" => Ok(SearchObjective::MinVariance),
        "max-sharpe" | "max_sharpe" => Ok(SearchObjective::MaxSharpe { risk_free }),
        other => Err(AppError::usage(
            "montecarlo::simulate_search",
            format!("unknown objective '{other}' (expected min-variance or max-sharpe)"),
        )),
    }
}
