use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actionangle::AAConstants;
use crate::coefficients::PeriodicFunction;
use crate::dynamics::SystemConfig;
use crate::quadrature::GaussLegendre;
use crate::special::GeneralizedTrig;
use crate::{Error, Result};

/// Annulus `inner <= rho <= outer`, `theta in T^1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusDomain {
    pub inner: f64,
    pub outer: f64,
}

impl AnnulusDomain {
    /// `D_s = {1 <= rho <= s}`.
    pub fn standard(s: f64) -> Result<Self> {
        if !(s > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "outer radius s = {s} must exceed 1"
            )));
        }
        Ok(Self {
            inner: 1.0,
            outer: s,
        })
    }

    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner && outer.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "annulus [{inner}, {outer}] is empty or unbounded"
            )));
        }
        Ok(Self { inner, outer })
    }

    pub fn contains(&self, rho: f64) -> bool {
        rho >= self.inner && rho <= self.outer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    F1,
    F2,
    G1,
    G2,
}

/// `C^c_pow S^s_pow` at phase `theta T0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub c_pow: u32,
    pub s_pow: u32,
}

impl Monomial {
    #[inline]
    pub fn eval(&self, s: f64, c: f64) -> f64 {
        c.powi(self.c_pow as i32) * s.powi(self.s_pow as i32)
    }
}

/// One summand `scale * coeff(t) * rho^rho_pow * monomial(theta)`.
#[derive(Debug, Clone)]
pub struct TermPiece {
    pub family: Family,
    pub coeff: PeriodicFunction,
    pub scale: f64,
    pub rho_pow: f64,
    pub mono: Monomial,
}

impl TermPiece {
    #[inline]
    pub fn radial_factor(&self, rho: f64, t: f64) -> f64 {
        self.scale * self.coeff.evaluate(t) * rho.powf(self.rho_pow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TermValues {
    pub f1: f64,
    pub f2: f64,
    pub g1: f64,
    pub g2: f64,
}

/// The perturbation of the twist in action-angle form,
/// `rho' = f1 + f2`, `theta' = d A^n rho^(2 beta - 1) + g1 + g2`.
/// The `1`-parts collect the a-indices from `split_index` up and every
/// damping term; the `2`-parts collect the low a-indices.
#[derive(Debug, Clone)]
pub struct PerturbationTerms {
    pub cfg: SystemConfig,
    pub k: AAConstants,
    pub trig: Arc<GeneralizedTrig>,
    pub split: usize,
    pieces: Vec<TermPiece>,
}

impl PerturbationTerms {
    pub fn new(cfg: SystemConfig, trig: Arc<GeneralizedTrig>) -> Result<Self> {
        if !cfg.rescaled {
            return Err(Error::InvalidParameter(
                "perturbation terms live on the rescaled system".into(),
            ));
        }
        if trig.n() != cfg.spec.n {
            return Err(Error::InvalidParameter(format!(
                "trig table is for n = {}, spec has n = {}",
                trig.n(),
                cfg.spec.n
            )));
        }
        let n = cfg.spec.n as i32;
        let k = AAConstants::new(cfg.spec.n, trig.period());
        let split = cfg.spec.split_index();
        let a = cfg.amplitude;
        let (alpha, c, t0) = (k.alpha, k.c, k.t0);
        let mut pieces = Vec::new();
        for (i, coeff) in cfg.spec.a.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            let fi = i as f64;
            let amp = a.powi(2 * i as i32 - n);
            let e = 2.0 * (fi + 1.0) * alpha;
            let (ff, gf) = if i >= split {
                (Family::F1, Family::G1)
            } else {
                (Family::F2, Family::G2)
            };
            pieces.push(TermPiece {
                family: ff,
                coeff: coeff.clone(),
                scale: -amp * t0 * c.powf(e),
                rho_pow: e,
                mono: Monomial {
                    c_pow: 1,
                    s_pow: 2 * i as u32 + 1,
                },
            });
            pieces.push(TermPiece {
                family: gf,
                coeff: coeff.clone(),
                scale: alpha * amp * c.powf(e),
                rho_pow: e - 1.0,
                mono: Monomial {
                    c_pow: 0,
                    s_pow: 2 * i as u32 + 2,
                },
            });
        }
        for (i, coeff) in cfg.spec.b.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            let fi = i as f64;
            let amp = a.powi(2 * i as i32 + 1);
            let e = (2.0 * fi + 1.0) * alpha;
            pieces.push(TermPiece {
                family: Family::F1,
                coeff: coeff.clone(),
                scale: -amp * t0 * c.powf(e + 1.0),
                rho_pow: e + 1.0,
                mono: Monomial {
                    c_pow: 2,
                    s_pow: 2 * i as u32 + 1,
                },
            });
            pieces.push(TermPiece {
                family: Family::G1,
                coeff: coeff.clone(),
                scale: alpha * amp * c.powf(e + 1.0),
                rho_pow: e,
                mono: Monomial {
                    c_pow: 1,
                    s_pow: 2 * i as u32 + 2,
                },
            });
        }
        Ok(Self {
            cfg,
            k,
            trig,
            split,
            pieces,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.cfg.amplitude
    }

    pub fn pieces(&self, family: Family) -> impl Iterator<Item = &TermPiece> {
        self.pieces.iter().filter(move |p| p.family == family)
    }

    /// `d A^n rho^(2 beta - 1)`.
    pub fn omega(&self, rho: f64) -> f64 {
        self.k.frequency(self.cfg.amplitude, rho)
    }

    pub fn eval_terms(&self, rho: f64, theta: f64, t: f64) -> TermValues {
        let th = theta - theta.round();
        let (s, c) = self.trig.eval(th * self.k.t0);
        let mut out = TermValues::default();
        for p in &self.pieces {
            let v = p.radial_factor(rho, t) * p.mono.eval(s, c);
            match p.family {
                Family::F1 => out.f1 += v,
                Family::F2 => out.f2 += v,
                Family::G1 => out.g1 += v,
                Family::G2 => out.g2 += v,
            }
        }
        out
    }
}

/// Periodic primitive `P(theta) = int_0^theta (m(s) - [m]) ds` of a
/// monomial, tabulated on a uniform knot grid and completed by
/// Gauss-Legendre on the partial panel.
#[derive(Debug, Clone)]
pub struct MonomialPrimitive {
    pub mono: Monomial,
    pub mean: f64,
    knots: Vec<f64>,
    gl: GaussLegendre,
    trig: Arc<GeneralizedTrig>,
}

const PRIMITIVE_PANELS: usize = 1024;

impl MonomialPrimitive {
    pub fn new(mono: Monomial, trig: Arc<GeneralizedTrig>) -> Self {
        let gl = GaussLegendre::new(10);
        let t0 = trig.period();
        let m = |th: f64| {
            let (s, c) = trig.eval(th * t0);
            mono.eval(s, c)
        };
        let h = 1.0 / PRIMITIVE_PANELS as f64;
        let mut raw = Vec::with_capacity(PRIMITIVE_PANELS + 1);
        raw.push(0.0);
        let mut acc = 0.0;
        for j in 0..PRIMITIVE_PANELS {
            acc += gl.integrate(j as f64 * h, (j + 1) as f64 * h, m);
            raw.push(acc);
        }
        let mean = acc;
        let knots = raw
            .iter()
            .enumerate()
            .map(|(j, v)| v - mean * j as f64 * h)
            .collect();
        Self {
            mono,
            mean,
            knots,
            gl,
            trig,
        }
    }

    pub fn integrand(&self, theta: f64) -> f64 {
        let th = theta - theta.round();
        let (s, c) = self.trig.eval(th * self.trig.period());
        self.mono.eval(s, c) - self.mean
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let u = theta.rem_euclid(1.0);
        let pos = u * PRIMITIVE_PANELS as f64;
        let j = (pos.floor() as usize).min(PRIMITIVE_PANELS - 1);
        let a = j as f64 / PRIMITIVE_PANELS as f64;
        let base = self.knots[j];
        if u == a {
            return base;
        }
        base + self.gl.integrate(a, u, |s| self.integrand(s))
    }
}
