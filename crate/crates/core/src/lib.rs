//! Numerical toolkit for the boundedness mechanism of polynomial oscillators
//!
//! ```text
//! x'' + sum_i b_i(t) x^(2i+1) x' + x^(2n+1) + sum_i a_i(t) x^(2i+1) = 0
//! ```
//!
//! with even, 1-periodic coefficients. The pipeline runs from generalized
//! trigonometric functions through an action-angle chart and averaging
//! transforms to the reversible time-1 twist map, whose invariant curves
//! confine every orbit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actionangle;
pub mod coefficients;
pub mod dynamics;
pub mod experiments;
pub mod normalform;
pub mod ode;
pub mod poincare;
pub mod quadrature;
pub mod report;
pub mod special;

use thiserror::Error;

pub use coefficients::{CoefficientSpec, PeriodicFunction, Regularity, ValidationReport};
pub use ode::OdeError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coefficient spec: {0}")]
    InvalidSpec(ValidationReport),
    #[error("coefficient is tagged L1; its derivative is not available")]
    RegularityViolation,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("generalized trig table does not close: |(S,C)(T0) - (0,1)| = {residual:e}")]
    ClosureFailure { residual: f64 },
    #[error("generalized trig table error bound {eval_err:e} exceeds {limit:e}")]
    TableAccuracy { eval_err: f64, limit: f64 },
    #[error("point lies inside the excluded disk (rho = {rho:e} < rho_min = {rho_min:e})")]
    ChartSingular { rho: f64, rho_min: f64 },
    #[error("{kind} generator is not a contraction: sup |dV| = {sup:.3e} exceeds {threshold} at A = {amplitude}")]
    NonContraction {
        kind: &'static str,
        sup: f64,
        threshold: f64,
        amplitude: f64,
    },
    #[error("{what} breaks its declared parity by {defect:.3e}")]
    SymmetryBroken { what: String, defect: f64 },
    #[error("annulus exhausted after {steps} transform steps (remaining interval [{lo}, {hi}])")]
    DomainExhausted { steps: usize, lo: f64, hi: f64 },
    #[error("rotation number undefined: {0}")]
    UndefinedRotation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config hash mismatch: envelope says {stored}, recomputed {computed}")]
    HashMismatch { stored: String, computed: String },
    #[error("unsupported schema version {found} (this build reads {supported})")]
    UnsupportedSchema { found: u64, supported: u64 },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
