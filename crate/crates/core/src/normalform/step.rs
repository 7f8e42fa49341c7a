use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{Field2, Field3};
use super::terms::{AnnulusDomain, Family, MonomialPrimitive, PerturbationTerms, TermPiece};
use crate::actionangle::AAConstants;
use crate::coefficients::Regularity;
use crate::{Error, Result};

/// Largest admissible `sup |dV|` for the fixed-point inversion.
pub const CONTRACTION_THRESHOLD: f64 = 0.5;
/// Parity defect tolerated on construction.
pub const PARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    /// `mu = rho + V(rho, theta, t)`; `V` even in `theta` and in `t`.
    Radial,
    /// `phi = theta + V(rho, theta, t)`; `V` odd in `theta`, even in `t`.
    Angular,
}

pub trait Generator: Send + Sync {
    fn value(&self, rho: f64, theta: f64, t: f64) -> f64;
    /// `(V_rho, V_theta, V_t)`.
    fn gradient(&self, rho: f64, theta: f64, t: f64) -> [f64; 3];
}

/// Evaluator of a `(rho, t)` function supplied to an angular step.
pub type RadialTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `V = -sum_j p_j(rho, t) P_j(theta) / D(rho, t)` for factorized
/// integrands, with `D = Omega(rho) + c0 h(rho, t)`.
struct Factorized {
    parts: Vec<(TermPiece, Arc<MonomialPrimitive>)>,
    k: AAConstants,
    amplitude: f64,
    h: Option<RadialTimeFn>,
}

impl Factorized {
    fn new(pt: &PerturbationTerms, family: Family, h: Option<RadialTimeFn>) -> Result<Self> {
        let mut parts: Vec<(TermPiece, Arc<MonomialPrimitive>)> = Vec::new();
        for p in pt.pieces(family) {
            if p.coeff.regularity() != Regularity::C1 {
                return Err(Error::RegularityViolation);
            }
            let prim = parts
                .iter()
                .find(|(q, _)| q.mono == p.mono)
                .map(|(_, m)| m.clone())
                .unwrap_or_else(|| Arc::new(MonomialPrimitive::new(p.mono, pt.trig.clone())));
            parts.push((p.clone(), prim));
        }
        Ok(Self {
            parts,
            k: pt.k,
            amplitude: pt.amplitude(),
            h,
        })
    }

    /// `(D, D_rho, D_t)`.
    fn denominator(&self, rho: f64, t: f64) -> (f64, f64, f64) {
        let om = self.k.frequency(self.amplitude, rho);
        let mut d = (om, self.k.twist_exponent() * om / rho, 0.0);
        if let Some(h) = &self.h {
            let (er, et) = (1e-6 * rho, 1e-6);
            d.0 += h(rho, t);
            d.1 += (h(rho + er, t) - h(rho - er, t)) / (2.0 * er);
            d.2 += (h(rho, t + et) - h(rho, t - et)) / (2.0 * et);
        }
        d
    }

    fn averaged(&self, rho: f64, t: f64) -> f64 {
        self.parts
            .iter()
            .map(|(p, m)| p.radial_factor(rho, t) * m.mean)
            .sum()
    }
}

impl Generator for Factorized {
    fn value(&self, rho: f64, theta: f64, t: f64) -> f64 {
        let num: f64 = self
            .parts
            .iter()
            .map(|(p, m)| p.radial_factor(rho, t) * m.eval(theta))
            .sum();
        -num / self.denominator(rho, t).0
    }

    fn gradient(&self, rho: f64, theta: f64, t: f64) -> [f64; 3] {
        let (mut n, mut n_rho, mut n_theta, mut n_t) = (0.0, 0.0, 0.0, 0.0);
        for (p, m) in &self.parts {
            let r = rho.powf(p.rho_pow);
            let coeff = p.coeff.evaluate(t);
            // regularity was checked on construction
            let dcoeff = p.coeff.derivative(t).unwrap_or(f64::NAN);
            let prim = m.eval(theta);
            n += p.scale * coeff * r * prim;
            n_rho += p.scale * coeff * p.rho_pow * r / rho * prim;
            n_theta += p.scale * coeff * r * m.integrand(theta);
            n_t += p.scale * dcoeff * r * prim;
        }
        let (d, d_rho, d_t) = self.denominator(rho, t);
        [
            -n_rho / d + n * d_rho / (d * d),
            -n_theta / d,
            -n_t / d + n * d_t / (d * d),
        ]
    }
}

/// Spectral grid representation of `V` and its first derivatives.
pub(crate) struct GridGenerator {
    pub v: Field3,
    pub v_rho: Field3,
    pub v_theta: Field3,
    pub v_t: Field3,
}

impl Generator for GridGenerator {
    fn value(&self, rho: f64, theta: f64, t: f64) -> f64 {
        self.v.eval(rho, theta, t)
    }

    fn gradient(&self, rho: f64, theta: f64, t: f64) -> [f64; 3] {
        let w = self.v.grid.weights(rho, theta, t);
        [
            self.v_rho.apply(&w),
            self.v_theta.apply(&w),
            self.v_t.apply(&w),
        ]
    }
}

#[derive(Clone)]
enum Averaged {
    Factorized(Arc<Factorized>),
    Grid(Field2),
}

impl Averaged {
    fn eval(&self, rho: f64, t: f64) -> f64 {
        match self {
            Averaged::Factorized(f) => f.averaged(rho, t),
            Averaged::Grid(g) => g.eval(rho, t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityDefect {
    pub v: f64,
    pub u: f64,
}

impl ParityDefect {
    pub fn max(&self) -> f64 {
        self.v.max(self.u)
    }
}

/// One averaging transform with its generator `V` and inverse shift `U`.
#[derive(Clone)]
pub struct TransformStep {
    pub kind: StepKind,
    pub amplitude: f64,
    /// Radial interval on which `V` is defined.
    pub domain: (f64, f64),
    /// `sup |V|` on the construction grid.
    pub sup_v: f64,
    /// `sup |V_rho|` (radial) or `sup |V_theta|` (angular).
    pub contraction: f64,
    pub parity: ParityDefect,
    generator: Arc<dyn Generator>,
    averaged: Option<Averaged>,
}

impl std::fmt::Debug for TransformStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformStep")
            .field("kind", &self.kind)
            .field("amplitude", &self.amplitude)
            .field("domain", &self.domain)
            .field("sup_v", &self.sup_v)
            .field("contraction", &self.contraction)
            .field("parity", &self.parity)
            .finish()
    }
}

/// Sample resolution for the construction-time contraction and parity
/// checks.
const CHECK_RHO: usize = 9;
const CHECK_THETA: usize = 32;
const CHECK_T: usize = 8;

impl TransformStep {
    fn assemble(
        kind: StepKind,
        amplitude: f64,
        domain: (f64, f64),
        generator: Arc<dyn Generator>,
        averaged: Option<Averaged>,
    ) -> Result<Self> {
        let mut step = Self {
            kind,
            amplitude,
            domain,
            sup_v: 0.0,
            contraction: 0.0,
            parity: ParityDefect { v: 0.0, u: 0.0 },
            generator,
            averaged,
        };
        let (lo, hi) = domain;
        let slot = if kind == StepKind::Radial { 0 } else { 1 };
        for i in 0..CHECK_RHO {
            let rho = lo + (hi - lo) * i as f64 / (CHECK_RHO - 1) as f64;
            for j in 0..CHECK_THETA {
                let th = j as f64 / CHECK_THETA as f64;
                for k in 0..CHECK_T {
                    let t = k as f64 / CHECK_T as f64;
                    step.sup_v = step.sup_v.max(step.v(rho, th, t).abs());
                    step.contraction = step.contraction.max(step.gradient(rho, th, t)[slot].abs());
                }
            }
        }
        if !(step.contraction <= CONTRACTION_THRESHOLD) {
            return Err(Error::NonContraction {
                kind: if kind == StepKind::Radial {
                    "radial"
                } else {
                    "angular"
                },
                sup: step.contraction,
                threshold: CONTRACTION_THRESHOLD,
                amplitude,
            });
        }
        let rhos: Vec<f64> = (0..4)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / 4.0)
            .collect();
        step.parity = step.parity_defect(&rhos, 16, 4);
        if !(step.parity.max() <= PARITY_TOL) {
            return Err(Error::SymmetryBroken {
                what: format!("{kind:?} generator"),
                defect: step.parity.max(),
            });
        }
        Ok(step)
    }

    pub fn v(&self, rho: f64, theta: f64, t: f64) -> f64 {
        self.generator.value(rho, theta, t)
    }

    pub fn gradient(&self, rho: f64, theta: f64, t: f64) -> [f64; 3] {
        self.generator.gradient(rho, theta, t)
    }

    /// `[g1](rho, t)` removed by an angular step.
    pub fn averaged_term(&self, rho: f64, t: f64) -> Option<f64> {
        self.averaged.as_ref().map(|a| a.eval(rho, t))
    }

    /// Old coordinates to new: `(rho, theta) -> (mu, phi)`.
    pub fn forward(&self, rho: f64, theta: f64, t: f64) -> (f64, f64) {
        let v = self.v(rho, theta, t);
        match self.kind {
            StepKind::Radial => (rho + v, theta),
            StepKind::Angular => (rho, theta + v),
        }
    }

    /// New coordinates to old by fixed-point iteration on
    /// `rho = mu - V(rho, phi, t)` (radial) or `theta = phi - V(rho, theta, t)`
    /// (angular).
    pub fn inverse(&self, mu: f64, phi: f64, t: f64) -> (f64, f64) {
        let mut x = match self.kind {
            StepKind::Radial => mu,
            StepKind::Angular => phi,
        };
        for _ in 0..100 {
            let next = match self.kind {
                StepKind::Radial => mu - self.v(x, phi, t),
                StepKind::Angular => phi - self.v(mu, x, t),
            };
            let delta = (next - x).abs();
            x = next;
            if delta <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        match self.kind {
            StepKind::Radial => (x, phi),
            StepKind::Angular => (mu, x),
        }
    }

    /// Inverse shift `U`: `rho - mu` (radial) or `theta - phi` (angular).
    pub fn u(&self, mu: f64, phi: f64, t: f64) -> f64 {
        let (rho, theta) = self.inverse(mu, phi, t);
        match self.kind {
            StepKind::Radial => rho - mu,
            StepKind::Angular => theta - phi,
        }
    }

    /// Largest violation of the declared parities of `V` and `U` on the
    /// grid `rhos x {j / n_theta} x {k / n_t}`.
    pub fn parity_defect(&self, rhos: &[f64], n_theta: usize, n_t: usize) -> ParityDefect {
        let odd_theta = self.kind == StepKind::Angular;
        let mut d = ParityDefect { v: 0.0, u: 0.0 };
        for &rho in rhos {
            for j in 0..n_theta {
                let th = j as f64 / n_theta as f64;
                for k in 0..n_t {
                    let t = k as f64 / n_t as f64;
                    for (slot, f) in [
                        (
                            0,
                            &(|r: f64, a: f64, b: f64| self.v(r, a, b))
                                as &dyn Fn(f64, f64, f64) -> f64,
                        ),
                        (1, &|r: f64, a: f64, b: f64| self.u(r, a, b)),
                    ] {
                        let base = f(rho, th, t);
                        let refl = f(rho, -th, t);
                        let theta_def = if odd_theta {
                            (refl + base).abs()
                        } else {
                            (refl - base).abs()
                        };
                        let t_def = (f(rho, th, -t) - base).abs();
                        let m = theta_def.max(t_def);
                        if slot == 0 {
                            d.v = d.v.max(m);
                        } else {
                            d.u = d.u.max(m);
                        }
                    }
                }
            }
        }
        d
    }
}

/// First radial averaging step: `V = -int_0^theta f1 ds / (d A^n rho^(2 beta - 1))`.
pub fn build_radial_step(pt: &PerturbationTerms, domain: &AnnulusDomain) -> Result<TransformStep> {
    let gen = Arc::new(Factorized::new(pt, Family::F1, None)?);
    TransformStep::assemble(
        StepKind::Radial,
        pt.amplitude(),
        (domain.inner, domain.outer),
        gen,
        None,
    )
}

/// Angular averaging step:
/// `V = -int_0^theta (g1 - [g1]) ds / (d A^n rho^(2 beta - 1) + c0 h_prev)`,
/// with `c0 = 0` when no `h_prev` is supplied (the first pass).
pub fn build_angular_step(
    pt: &PerturbationTerms,
    domain: &AnnulusDomain,
    h_prev: Option<RadialTimeFn>,
) -> Result<TransformStep> {
    let gen = Arc::new(Factorized::new(pt, Family::G1, h_prev)?);
    let avg = Averaged::Factorized(gen.clone());
    TransformStep::assemble(
        StepKind::Angular,
        pt.amplitude(),
        (domain.inner, domain.outer),
        gen,
        Some(avg),
    )
}

pub(crate) fn grid_step(
    kind: StepKind,
    amplitude: f64,
    gen: GridGenerator,
    averaged: Option<Field2>,
) -> Result<TransformStep> {
    let domain = (gen.v.grid.lo, gen.v.grid.hi);
    TransformStep::assemble(
        kind,
        amplitude,
        domain,
        Arc::new(gen),
        averaged.map(Averaged::Grid),
    )
}
