//! Averaging normal form of the twist system in action-angle variables.
//!
//! In the chart `psi0` the rescaled oscillator reads
//!
//! ```text
//! rho'   = f1 + f2
//! theta' = d A^n rho^(2 beta - 1) + g1 + g2
//! ```
//!
//! Radial steps `mu = rho + V(rho, theta, t)` remove the oscillating part
//! of `f1`; angular steps `phi = theta + V(rho, theta, t)` move the
//! `theta`-average of `g1` into a drift term `H(rho, t)` and shrink the
//! rest. Generators are evaluated numerically: the first step from the
//! factorized terms, later ones on a Chebyshev x Fourier x Fourier grid.

mod chain;
mod grid;
mod scaling;
mod step;
mod terms;

pub use chain::{
    compose_chain, f1_after_radial, ChainGauge, ChainOptions, ChainSymmetry, ComposedSystem,
    DomainRecord,
};
pub use grid::GridResolution;
pub use scaling::{
    loglog_fit, order_scaling, twist_scaling, OrderScalingReport, ScalingFamily, ScalingGrid,
    ScalingTerm,
};
pub use step::{
    build_angular_step, build_radial_step, Generator, ParityDefect, RadialTimeFn, StepKind,
    TransformStep, CONTRACTION_THRESHOLD, PARITY_TOL,
};
pub use terms::{
    AnnulusDomain, Family, Monomial, MonomialPrimitive, PerturbationTerms, TermPiece, TermValues,
};
