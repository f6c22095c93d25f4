//! Command-line front end and HTTP service for the frontierlab pipeline.

pub mod app;
pub mod cli;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod output;
pub mod pipeline;
pub mod service;

pub use app::{Dataset, Needs, Provenance};
pub use config::RunConfig;
pub use error::{AppError, AppResult};
