//! Front-end error type carrying the operation that failed.

use std::fmt;

use frontierlab_core::{Error as CoreError, ErrorCategory};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags, config values or request fields.
    Usage,
    /// Unreadable or inconsistent input files.
    Data,
    /// Feasible-set problems: empty box, unreachable target.
    Infeasible,
    /// Numerical failure inside a solver.
    Solver,
}

#[derive(Debug, Clone)]
pub struct AppError {
    pub kind: Kind,
    /// `module::operation` that raised the error.
    pub op: &'static str,
    pub message: String,
}

impl AppError {
    pub fn usage(op: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Usage,
            op,
            message: message.into(),
        }
    }

    pub fn data(op: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Data,
            op,
            message: message.into(),
        }
    }

    pub fn core(op: &'static str, err: CoreError) -> Self {
        let kind = match err.category() {
            ErrorCategory::Data => Kind::Data,
            ErrorCategory::InvalidInput => Kind::Usage,
            ErrorCategory::Infeasible => Kind::Infeasible,
            ErrorCategory::Solver => Kind::Solver,
        };
        Self {
            kind,
            op,
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Usage => EXIT_USAGE,
            Kind::Data => EXIT_DATA,
            Kind::Infeasible | Kind::Solver => EXIT_SOLVER,
        }
    }

    pub fn category(&self) -> &'static str {
        match self.kind {
            Kind::Usage => "invalid_input",
            Kind::Data => "data",
            Kind::Infeasible => "infeasible",
            Kind::Solver => "solver",
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.op, self.message)
    }
}

impl std::error::Error for AppError {}

pub type AppResult<T> = std::result::Result<T, AppError>;

/// Attaches an operation name to core results.
pub trait Context<T> {
    fn op(self, op: &'static str) -> AppResult<T>;
}

impl<T> Context<T> for frontierlab_core::Result<T> {
    fn op(self, op: &'static str) -> AppResult<T> {
        self.map_err(|e| AppError::core(op, e))
    }
}
