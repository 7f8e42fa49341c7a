//! Generalized sine/cosine pair `(S, C)`: the solution of `S' = C`,
//! `C' = -S^(2n+1)` with `(S, C)(0) = (0, 1)`, and its minimal period `T0`.

use std::ops::ControlFlow;

use crate::dynamics::IntegratorConfig;
use crate::ode::{self, StepControl};
use crate::quadrature::{tanh_sinh_unit, GaussLegendre};
use crate::{Error, Result};

/// Number of table segments over one period.
pub const TABLE_SEGMENTS: usize = 4096;
/// Largest acceptable certified interpolation error.
pub const EVAL_ERR_LIMIT: f64 = 1e-10;
/// Largest acceptable `|(S, C)(T0) - (0, 1)|`.
pub const CLOSURE_LIMIT: f64 = 1e-9;
/// Tolerance ceiling for the table integration.
const TABLE_TOL: f64 = 1e-13;

/// Turning point `x_max = (n+1)^(1/(2n+2))`, where `C = 0`.
pub fn x_max(n: u32) -> f64 {
    let m = 2.0 * n as f64 + 2.0;
    (n as f64 + 1.0).powf(1.0 / m)
}

/// Minimal period `T0 = 4 x_max int_0^1 (1 - s^m)^(-1/2) ds`, `m = 2n + 2`.
///
/// The substitution `s = 1 - w^2` removes the endpoint singularity:
/// `1 - s^m = w^2 q(w)` with `q(w) = sum_{j<m} (1 - w^2)^j >= 1`, leaving the
/// smooth integral `2 int_0^1 q(w)^(-1/2) dw`, done by composite
/// Gauss-Legendre.
pub fn compute_period(n: u32) -> f64 {
    let m = 2 * n as usize + 2;
    let rule = GaussLegendre::new(20);
    let integral = rule.composite(0.0, 1.0, 16, |w| {
        let s = 1.0 - w * w;
        let mut q = 0.0;
        for _ in 0..m {
            q = q * s + 1.0;
        }
        1.0 / q.sqrt()
    });
    8.0 * x_max(n) * integral
}

/// Independent period evaluation: tanh-sinh quadrature applied directly to
/// the singular integrand.
pub fn compute_period_tanh_sinh(n: u32) -> f64 {
    let m = 2 * n as usize + 2;
    let integral = tanh_sinh_unit(1e-15, |s, one_minus_s| {
        let mut q = 0.0;
        for _ in 0..m {
            q = q * s + 1.0;
        }
        // 1 - s^m = (1 - s) q(s)
        1.0 / (one_minus_s * q).sqrt()
    });
    4.0 * x_max(n) * integral
}

/// Tabulated `(S, C)` over one period as a piecewise quintic Hermite
/// interpolant matching values and two derivatives at each knot.
#[derive(Debug, Clone)]
pub struct GeneralizedTrig {
    n: u32,
    t0: f64,
    h: f64,
    /// Per-segment monomial coefficients in the local variable `s in [0,1]`.
    poly: Vec<[[f64; 6]; 2]>,
    knots: Vec<(f64, f64)>,
    eval_err: f64,
    closure: f64,
    end_state: (f64, f64),
}

impl GeneralizedTrig {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.t0
    }

    /// Certified interpolation bound: largest midpoint discrepancy against the
    /// integrator's continuous extension, plus the closure defect.
    pub fn eval_err(&self) -> f64 {
        self.eval_err
    }

    pub fn closure(&self) -> f64 {
        self.closure
    }

    pub fn x_max(&self) -> f64 {
        x_max(self.n)
    }

    /// Knot values `(S, C)(k T0 / K)` for `k = 0..=K`.
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// First return time to `S = 0` from the integrated end state, by one
    /// Newton correction `T0 - S(T0) / C(T0)`.
    pub fn return_time(&self) -> f64 {
        self.t0 - self.end_state.0 / self.end_state.1
    }

    #[inline]
    fn locate(&self, t: f64) -> (usize, f64, bool) {
        let neg = t < 0.0;
        let a = t.abs();
        let mut u = a % self.t0;
        if u >= self.t0 {
            u = 0.0;
        }
        let x = u / self.h;
        let j = (x as usize).min(TABLE_SEGMENTS - 1);
        (j, x - j as f64, neg)
    }

    /// `(S(t), C(t))` for any real `t`.
    #[inline]
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (j, s, neg) = self.locate(t);
        let p = &self.poly[j];
        let sv = horner(&p[0], s);
        let cv = horner(&p[1], s);
        if neg {
            (-sv, cv)
        } else {
            (sv, cv)
        }
    }

    /// Derivative of the interpolant itself, `(dS/dt, dC/dt)`.
    pub fn eval_derivative(&self, t: f64) -> (f64, f64) {
        let (j, s, neg) = self.locate(t);
        let p = &self.poly[j];
        let ds = horner_deriv(&p[0], s) / self.h;
        let dc = horner_deriv(&p[1], s) / self.h;
        // d/dt [-S(-t)] = S'(-t); d/dt [C(-t)] = -C'(-t)
        if neg {
            (ds, -dc)
        } else {
            (ds, dc)
        }
    }

    /// Residual of the energy identity `S^(2n+2) + (n+1) C^2 = n+1`.
    pub fn energy_residual(&self, t: f64) -> f64 {
        let (s, c) = self.eval(t);
        let n1 = self.n as f64 + 1.0;
        s.powi(2 * self.n as i32 + 2) + n1 * c * c - n1
    }
}

#[inline]
fn horner(c: &[f64; 6], s: f64) -> f64 {
    ((((c[5] * s + c[4]) * s + c[3]) * s + c[2]) * s + c[1]) * s + c[0]
}

#[inline]
fn horner_deriv(c: &[f64; 6], s: f64) -> f64 {
    (((5.0 * c[5] * s + 4.0 * c[4]) * s + 3.0 * c[3]) * s + 2.0 * c[2]) * s + c[1]
}

/// Quintic Hermite interpolant on `[0, 1]` in monomial form from values,
/// first and second derivatives (already scaled by `h` and `h^2`).
fn quintic(f0: f64, d0: f64, e0: f64, f1: f64, d1: f64, e1: f64) -> [f64; 6] {
    let c0 = f0;
    let c1 = d0;
    let c2 = 0.5 * e0;
    // remaining cubic part from the end conditions
    let r0 = f1 - c0 - c1 - c2;
    let r1 = d1 - c1 - 2.0 * c2;
    let r2 = e1 - 2.0 * c2;
    let c3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2;
    let c4 = -15.0 * r0 + 7.0 * r1 - r2;
    let c5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2;
    [c0, c1, c2, c3, c4, c5]
}

/// Integrates `S' = C, C' = -S^(2n+1)` over one period and builds the table.
pub fn build_trig(n: u32, icfg: &IntegratorConfig) -> Result<GeneralizedTrig> {
    icfg.validate()?;
    let t0 = compute_period(n);
    let h = t0 / TABLE_SEGMENTS as f64;
    let p = 2 * n as i32 + 1;
    let sys = move |_t: f64, y: &[f64; 2]| [y[1], -y[0].powi(p)];
    let tol = icfg.rel_tol.min(TABLE_TOL);
    let mut ctl = StepControl::new(tol, icfg.abs_tol.min(TABLE_TOL));
    ctl.max_step = h;
    ctl.initial_step = Some(h);

    let mut knots = Vec::with_capacity(TABLE_SEGMENTS + 1);
    let mut mids = Vec::with_capacity(TABLE_SEGMENTS);
    let mut y = [0.0, 1.0];
    knots.push((0.0, 1.0));
    for k in 0..TABLE_SEGMENTS {
        let ta = k as f64 * h;
        let tb = if k + 1 == TABLE_SEGMENTS {
            t0
        } else {
            (k + 1) as f64 * h
        };
        let tm = 0.5 * (ta + tb);
        let mut mid = None;
        let out = ode::integrate(&sys, ta, y, tb, &ctl, |st| {
            if st.t0 <= tm && tm <= st.t1 {
                mid = Some(st.dense().eval(tm));
            }
            ControlFlow::Continue(())
        })?;
        y = out.y;
        knots.push((y[0], y[1]));
        mids.push(mid.expect("one accepted step covers the midpoint"));
    }

    let deriv = |s: f64, c: f64| {
        let s2n = s.powi(2 * n as i32);
        // (S', C') and (S'', C'')
        ((c, -s2n * s), (-s2n * s, -((2 * n + 1) as f64) * s2n * c))
    };
    let mut poly = Vec::with_capacity(TABLE_SEGMENTS);
    for k in 0..TABLE_SEGMENTS {
        let (s0, c0) = knots[k];
        let (s1, c1) = knots[k + 1];
        let ((ds0, dc0), (es0, ec0)) = deriv(s0, c0);
        let ((ds1, dc1), (es1, ec1)) = deriv(s1, c1);
        let h2 = h * h;
        poly.push([
            quintic(s0, h * ds0, h2 * es0, s1, h * ds1, h2 * es1),
            quintic(c0, h * dc0, h2 * ec0, c1, h * dc1, h2 * ec1),
        ]);
    }

    let end = knots[TABLE_SEGMENTS];
    let closure = (end.0.powi(2) + (end.1 - 1.0).powi(2)).sqrt();
    if closure > CLOSURE_LIMIT {
        return Err(Error::ClosureFailure { residual: closure });
    }
    let mut mid_err: f64 = 0.0;
    for (k, m) in mids.iter().enumerate() {
        let p = &poly[k];
        mid_err = mid_err
            .max((horner(&p[0], 0.5) - m[0]).abs())
            .max((horner(&p[1], 0.5) - m[1]).abs());
    }
    let eval_err = mid_err + closure;
    if eval_err > EVAL_ERR_LIMIT {
        return Err(Error::TableAccuracy {
            eval_err,
            limit: EVAL_ERR_LIMIT,
        });
    }
    Ok(GeneralizedTrig {
        n,
        t0,
        h,
        poly,
        knots,
        eval_err,
        closure,
        end_state: end,
    })
}
