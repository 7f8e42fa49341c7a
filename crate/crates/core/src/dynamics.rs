//! Vector fields of the oscillator in original and rescaled form, and the
//! adaptive flow map built on them.
//!
//! Rescaled form (amplitude `A`, `x -> A x`):
//!
//! ```text
//! x' = A^n y
//! y' = -A^n x^(2n+1) - sum_i A^(2i-n) a_i(t) x^(2i+1) - sum_i A^(2i+1) b_i(t) x^(2i+1) y
//! ```
//!
//! A rescaled solution `(x, y)` and an original one `(X, V)` correspond via
//! `X = A x`, `V = A^(n+1) y` at equal times.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::coefficients::{validate_spec, CoefficientSpec, Mode, PeriodicFunction};
use crate::ode::{self, DenseSegment, OdeSystem, Outcome, Step, StepControl};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub v: f64,
    pub t: f64,
}

impl State {
    pub fn new(x: f64, v: f64, t: f64) -> Self {
        Self { x, v, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(default = "unbounded")]
    pub max_step: f64,
    #[serde(default = "yes")]
    pub dense_output: bool,
    /// Max-norm of the state beyond which an orbit is declared escaped.
    #[serde(default = "default_escape")]
    pub escape_radius: f64,
}

fn unbounded() -> f64 {
    f64::INFINITY
}
fn yes() -> bool {
    true
}
fn default_escape() -> f64 {
    1e8
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::with_tol(1e-12)
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rel_tol: tol,
            abs_tol: tol,
            max_step: f64::INFINITY,
            dense_output: true,
            escape_radius: default_escape(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v <= 1e-4) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} outside (0, 1e-4]"
                )));
            }
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "max_step = {} must be positive",
                self.max_step
            )));
        }
        if !(self.escape_radius > 0.0) {
            return Err(Error::InvalidParameter(
                "escape_radius must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn step_control(&self) -> StepControl {
        let mut c = StepControl::new(self.rel_tol, self.abs_tol);
        c.max_step = self.max_step;
        c.escape_radius = Some(self.escape_radius);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub spec: CoefficientSpec,
    /// Rescale amplitude `A >= 1` (exactly 1 in original mode).
    pub amplitude: f64,
    pub rescaled: bool,
}

impl SystemConfig {
    /// Validates the spec and `A`; original mode forces `A = 1`.
    pub fn new(spec: CoefficientSpec, amplitude: f64, rescaled: bool) -> Result<Self> {
        let report = validate_spec(&spec);
        if !report.is_pass() {
            return Err(Error::InvalidSpec(report));
        }
        Self::unchecked(spec, amplitude, rescaled)
    }

    /// Skips coefficient validation (for deliberately broken specs), but
    /// still checks `A`.
    pub fn unchecked(spec: CoefficientSpec, amplitude: f64, rescaled: bool) -> Result<Self> {
        if !(amplitude >= 1.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "A = {amplitude} must be a finite value >= 1"
            )));
        }
        let amplitude = if rescaled { amplitude } else { 1.0 };
        Ok(Self {
            spec,
            amplitude,
            rescaled,
        })
    }

    pub fn original(spec: CoefficientSpec) -> Result<Self> {
        Self::new(spec, 1.0, false)
    }

    pub fn rescaled(spec: CoefficientSpec, amplitude: f64) -> Result<Self> {
        Self::new(spec, amplitude, true)
    }

    /// True when the damping family is empty or identically zero; only then
    /// is `(x, v) -> (x, -v)` a reversing symmetry.
    pub fn damping_free(&self) -> bool {
        self.spec.b.iter().all(PeriodicFunction::is_zero)
    }
}

enum CoeffEval {
    /// Cosine series evaluated by Clenshaw on a shared `cos(2 pi w)`.
    Cosine(Vec<f64>),
    General(PeriodicFunction),
}

struct Term {
    power: i32,
    scale: f64,
    coeff: CoeffEval,
}

/// Compiled vector field; implements [`OdeSystem`] for the integrator.
pub struct Field {
    n: u32,
    an: f64,
    rescaled: bool,
    a_terms: Vec<Term>,
    b_terms: Vec<Term>,
    any_cosine: bool,
}

impl Field {
    pub fn new(cfg: &SystemConfig) -> Self {
        let n = cfg.spec.n as i32;
        let a_amp = cfg.amplitude;
        let compile = |f: &PeriodicFunction| match f.mode() {
            Mode::FourierCosine => CoeffEval::Cosine(f.values().to_vec()),
            _ => CoeffEval::General(f.clone()),
        };
        let scale = |e: i32| if cfg.rescaled { a_amp.powi(e) } else { 1.0 };
        let a_terms: Vec<Term> = cfg
            .spec
            .a
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_zero())
            .map(|(i, f)| Term {
                power: 2 * i as i32 + 1,
                scale: scale(2 * i as i32 - n),
                coeff: compile(f),
            })
            .collect();
        let b_terms: Vec<Term> = cfg
            .spec
            .b
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_zero())
            .map(|(i, f)| Term {
                power: 2 * i as i32 + 1,
                scale: scale(2 * i as i32 + 1),
                coeff: compile(f),
            })
            .collect();
        let any_cosine = a_terms
            .iter()
            .chain(&b_terms)
            .any(|t| matches!(t.coeff, CoeffEval::Cosine(_)));
        Self {
            n: cfg.spec.n,
            an: scale(n),
            rescaled: cfg.rescaled,
            a_terms,
            b_terms,
            any_cosine,
        }
    }

    /// `A^n` in rescaled mode, 1 otherwise.
    pub fn a_pow_n(&self) -> f64 {
        self.an
    }

    #[inline]
    fn coeff_value(c: &CoeffEval, t: f64, cosx: f64) -> f64 {
        match c {
            CoeffEval::Cosine(v) => {
                if v.len() == 1 {
                    return v[0];
                }
                let mut b1 = 0.0;
                let mut b2 = 0.0;
                for &ck in v[1..].iter().rev() {
                    let b0 = ck + 2.0 * cosx * b1 - b2;
                    b2 = b1;
                    b1 = b0;
                }
                v[0] + cosx * b1 - b2
            }
            CoeffEval::General(f) => f.evaluate(t),
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, v: f64) -> (f64, f64) {
        let cosx = if self.any_cosine {
            let a = t.abs();
            let u = a - a.floor();
            let w = if u > 0.5 { 1.0 - u } else { u };
            (2.0 * PI * w).cos()
        } else {
            0.0
        };
        let x2 = x * x;
        let mut pert = 0.0;
        for term in &self.a_terms {
            pert += term.scale * Self::coeff_value(&term.coeff, t, cosx) * x.powi(term.power);
        }
        let mut damp = 0.0;
        for term in &self.b_terms {
            damp += term.scale * Self::coeff_value(&term.coeff, t, cosx) * x.powi(term.power);
        }
        let x2n1 = x2.powi(self.n as i32) * x;
        let dx = if self.rescaled { self.an * v } else { v };
        (dx, -self.an * x2n1 - pert - damp * v)
    }
}

impl OdeSystem<2> for Field {
    #[inline]
    fn rhs(&self, t: f64, y: &[f64; 2]) -> [f64; 2] {
        let (a, b) = self.eval(t, y[0], y[1]);
        [a, b]
    }
}

/// `(dx/dt, dv/dt)` at a state.
pub fn vector_field(cfg: &SystemConfig, s: State) -> (f64, f64) {
    Field::new(cfg).eval(s.t, s.x, s.v)
}

/// Dense trajectory: the concatenated continuous extensions of all steps.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub start: State,
    pub end: State,
    pub segments: Vec<DenseSegment<2>>,
    pub accepted: usize,
    pub rejected: usize,
}

impl Trajectory {
    /// State at time `t` inside the covered interval.
    pub fn eval(&self, t: f64) -> Option<State> {
        if self.segments.is_empty() {
            return (t == self.start.t).then_some(self.start);
        }
        let forward = self.end.t >= self.start.t;
        let idx = self
            .segments
            .partition_point(|s| if forward { s.t1() < t } else { s.t1() > t });
        let seg = self.segments.get(idx)?;
        if !seg.contains(t) {
            return None;
        }
        let y = seg.eval(t);
        Some(State::new(y[0], y[1], t))
    }

    /// `count + 1` equally spaced samples from start to end.
    pub fn sample_uniform(&self, count: usize) -> Vec<State> {
        let count = count.max(1);
        (0..=count)
            .map(|k| {
                let t = if k == count {
                    self.end.t
                } else {
                    self.start.t + (self.end.t - self.start.t) * k as f64 / count as f64
                };
                self.eval(t)
                    .unwrap_or(if k == count { self.end } else { self.start })
            })
            .collect()
    }
}

/// Knots of sampled coefficients strictly between `t0` and `t1`, ordered in
/// the direction of integration.
fn knots_between(spec: &CoefficientSpec, t0: f64, t1: f64) -> Vec<f64> {
    let spacings: Vec<f64> = spec
        .a
        .iter()
        .chain(&spec.b)
        .filter(|f| !f.is_zero())
        .filter_map(PeriodicFunction::knot_spacing)
        .collect();
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    let mut out = Vec::new();
    for h in spacings {
        let mut k = (lo / h).floor() as i64 + 1;
        loop {
            let t = k as f64 * h;
            if t >= hi {
                break;
            }
            if t > lo {
                out.push(t);
            }
            k += 1;
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
    if t1 < t0 {
        out.reverse();
    }
    out
}

/// Advances `(x, v)` from `t0` to `t1`, stopping at sampled-coefficient
/// knots. The observer sees every accepted step.
pub fn advance<O>(
    field: &Field,
    spec: &CoefficientSpec,
    ctl: &StepControl,
    t0: f64,
    y0: [f64; 2],
    t1: f64,
    mut observer: O,
) -> Result<Outcome<2>, ode::OdeError>
where
    O: FnMut(&Step<'_, 2, Field>) -> ControlFlow<()>,
{
    let mut stops = knots_between(spec, t0, t1);
    stops.push(t1);
    let mut t = t0;
    let mut y = y0;
    let mut total = Outcome {
        t,
        y,
        accepted: 0,
        rejected: 0,
        evaluations: 0,
        interrupted: false,
    };
    for stop in stops {
        let out = ode::integrate(field, t, y, stop, ctl, &mut observer)?;
        total.accepted += out.accepted;
        total.rejected += out.rejected;
        total.evaluations += out.evaluations;
        t = out.t;
        y = out.y;
        if out.interrupted {
            total.interrupted = true;
            break;
        }
    }
    total.t = t;
    total.y = y;
    Ok(total)
}

/// Integrates from `s0` to `t1` (either direction).
pub fn integrate(
    cfg: &SystemConfig,
    icfg: &IntegratorConfig,
    s0: State,
    t1: f64,
) -> Result<Trajectory> {
    icfg.validate()?;
    if !(s0.x.is_finite() && s0.v.is_finite() && s0.t.is_finite() && t1.is_finite()) {
        return Err(Error::InvalidParameter(
            "initial state and end time must be finite".into(),
        ));
    }
    let field = Field::new(cfg);
    let ctl = icfg.step_control();
    let mut segments = Vec::new();
    let out = advance(&field, &cfg.spec, &ctl, s0.t, [s0.x, s0.v], t1, |st| {
        if icfg.dense_output {
            segments.push(st.dense());
        }
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory {
        start: s0,
        end: State::new(out.y[0], out.y[1], out.t),
        segments,
        accepted: out.accepted,
        rejected: out.rejected,
    })
}

/// End state only, skipping dense output.
pub fn flow(cfg: &SystemConfig, icfg: &IntegratorConfig, s0: State, t1: f64) -> Result<State> {
    let icfg = IntegratorConfig {
        dense_output: false,
        ..*icfg
    };
    Ok(integrate(cfg, &icfg, s0, t1)?.end)
}

/// Residuals `|R Phi_{-t} R z0 - Phi_t z0|` of the reversing involutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversibilityResidual {
    /// `R2 (x, v) = (-x, v)`, reversing for every valid spec.
    pub position_flip: f64,
    /// `R1 (x, v) = (x, -v)`, reversing only when all `b_i` vanish.
    pub velocity_flip: Option<f64>,
}

impl ReversibilityResidual {
    pub fn max(&self) -> f64 {
        self.velocity_flip
            .map_or(self.position_flip, |r| r.max(self.position_flip))
    }
}

pub fn reversibility_residual(
    cfg: &SystemConfig,
    icfg: &IntegratorConfig,
    s0: State,
    t: f64,
) -> Result<ReversibilityResidual> {
    if s0.t != 0.0 {
        return Err(Error::InvalidParameter(
            "reversibility residual needs s0.t = 0".into(),
        ));
    }
    let fwd = flow(cfg, icfg, s0, t)?;
    let dist = |a: State, x: f64, v: f64| ((a.x - x).powi(2) + (a.v - v).powi(2)).sqrt();
    let b2 = flow(cfg, icfg, State::new(-s0.x, s0.v, 0.0), -t)?;
    let position_flip = dist(fwd, -b2.x, b2.v);
    let velocity_flip = if cfg.damping_free() {
        let b1 = flow(cfg, icfg, State::new(s0.x, -s0.v, 0.0), -t)?;
        Some(dist(fwd, b1.x, -b1.v))
    } else {
        None
    };
    Ok(ReversibilityResidual {
        position_flip,
        velocity_flip,
    })
}

/// Unperturbed energy `v^2/2 + x^(2n+2)/(2n+2)`.
pub fn unperturbed_energy(n: u32, x: f64, v: f64) -> f64 {
    let m = 2 * n as i32 + 2;
    0.5 * v * v + x.powi(m) / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{PeriodicFunction, Regularity};
    use crate::special;

    fn cos_coeff(amp: f64) -> PeriodicFunction {
        PeriodicFunction::fourier_cosine(vec![0.0, amp]).unwrap()
    }

    #[test]
    fn field_examples() {
        let cfg = SystemConfig::original(CoefficientSpec::unperturbed(1)).unwrap();
        assert_eq!(vector_field(&cfg, State::new(0.0, 1.0, 0.0)), (1.0, 0.0));
        assert_eq!(vector_field(&cfg, State::new(1.0, 0.0, 0.0)), (0.0, -1.0));

        let spec = CoefficientSpec::new(
            2,
            None,
            vec![
                PeriodicFunction::zero(),
                PeriodicFunction::fourier_cosine(vec![1.0]).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        let cfg = SystemConfig::rescaled(spec, 2.0).unwrap();
        for t in [0.0, 0.3, -1.7] {
            assert_eq!(vector_field(&cfg, State::new(1.0, 1.0, t)), (4.0, -5.0));
        }
    }

    /// Term-by-term hand expansion for the demo-like spec, as an
    /// independent evaluator.
    #[test]
    fn rescaled_field_matches_hand_expansion() {
        let spec = CoefficientSpec::new(
            2,
            Some(0),
            vec![cos_coeff(0.5), cos_coeff(-0.3)],
            vec![cos_coeff(0.1)],
        )
        .unwrap();
        let a = 3.0;
        let cfg = SystemConfig::rescaled(spec, a).unwrap();
        for &(x, y, t) in &[
            (0.3f64, -0.7f64, 0.11f64),
            (-1.2, 0.4, 0.77),
            (0.9, 1.1, -0.4),
        ] {
            let c = (2.0 * PI * t).cos();
            let dy = -9.0 * x.powi(5)
                - (1.0 / 9.0) * 0.5 * c * x
                - 1.0 * (-0.3) * c * x.powi(3)
                - 3.0 * 0.1 * c * x * y;
            let (fx, fy) = vector_field(&cfg, State::new(x, y, t));
            assert!((fx - 9.0 * y).abs() < 1e-14);
            assert!((fy - dy).abs() < 1e-13, "{fy} vs {dy}");
        }
    }

    #[test]
    fn harmonic_reference() {
        let cfg = SystemConfig::original(CoefficientSpec::unperturbed(0)).unwrap();
        let s = flow(
            &cfg,
            &IntegratorConfig::default(),
            State::new(0.0, 1.0, 0.0),
            10.0,
        )
        .unwrap();
        assert!((s.x - 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn returns_after_one_period() {
        let cfg = SystemConfig::original(CoefficientSpec::unperturbed(1)).unwrap();
        let t0 = special::compute_period(1);
        let s = flow(
            &cfg,
            &IntegratorConfig::default(),
            State::new(0.0, 1.0, 0.0),
            t0,
        )
        .unwrap();
        assert!(s.x.abs() < 1e-8 && (s.v - 1.0).abs() < 1e-8, "{s:?}");
    }

    #[test]
    fn energy_is_conserved_without_perturbation() {
        for n in [1u32, 2] {
            let cfg = SystemConfig::original(CoefficientSpec::unperturbed(n)).unwrap();
            let traj = integrate(
                &cfg,
                &IntegratorConfig::default(),
                State::new(0.8, -0.5, 0.0),
                100.0,
            )
            .unwrap();
            let h0 = unperturbed_energy(n, 0.8, -0.5);
            for s in traj.sample_uniform(5000) {
                let h = unperturbed_energy(n, s.x, s.v);
                assert!(
                    (h - h0).abs() <= 1e-9 * (1.0 + h0.abs()),
                    "n = {n}, t = {}",
                    s.t
                );
            }
        }
    }

    #[test]
    fn original_and_rescaled_flows_are_conjugate() {
        let spec = CoefficientSpec::new(
            2,
            Some(0),
            vec![cos_coeff(0.5), PeriodicFunction::zero()],
            vec![cos_coeff(0.1)],
        )
        .unwrap();
        let a = 4.0;
        let resc = SystemConfig::rescaled(spec.clone(), a).unwrap();
        let orig = SystemConfig::original(spec).unwrap();
        let icfg = IntegratorConfig::default();
        let (x0, y0) = (0.7, -0.2);
        let r = flow(&resc, &icfg, State::new(x0, y0, 0.0), 0.5).unwrap();
        let o = flow(&orig, &icfg, State::new(a * x0, a.powi(3) * y0, 0.0), 0.5).unwrap();
        assert!((o.x / a - r.x).abs() < 1e-9);
        assert!((o.v / a.powi(3) - r.v).abs() < 1e-9);
    }

    #[test]
    fn dense_output_is_queryable() {
        let cfg = SystemConfig::original(CoefficientSpec::unperturbed(0)).unwrap();
        let traj = integrate(
            &cfg,
            &IntegratorConfig::default(),
            State::new(0.0, 1.0, 0.0),
            -5.0,
        )
        .unwrap();
        for k in 0..50 {
            let t = -5.0 * k as f64 / 49.0;
            let s = traj.eval(t).unwrap();
            assert!((s.x - t.sin()).abs() < 1e-9);
        }
        assert!(traj.eval(1.0).is_none());
    }

    #[test]
    fn reversibility_examples() {
        let icfg = IntegratorConfig::default();
        let free = SystemConfig::original(CoefficientSpec::unperturbed(2)).unwrap();
        let r = reversibility_residual(&free, &icfg, State::new(0.4, 0.9, 0.0), 5.0).unwrap();
        assert!(r.max() <= 1e-9, "{r:?}");
        assert!(r.velocity_flip.is_some());

        let spec = CoefficientSpec::new(
            2,
            None,
            vec![cos_coeff(1.0), PeriodicFunction::zero()],
            vec![],
        )
        .unwrap();
        let cfg = SystemConfig::original(spec).unwrap();
        let r = reversibility_residual(&cfg, &icfg, State::new(0.4, 0.9, 0.0), 5.0).unwrap();
        assert!(r.max() <= 1e-7, "{r:?}");

        let damped = CoefficientSpec::new(
            2,
            Some(0),
            vec![cos_coeff(0.5), PeriodicFunction::zero()],
            vec![cos_coeff(0.1)],
        )
        .unwrap();
        let cfg = SystemConfig::original(damped).unwrap();
        let r = reversibility_residual(&cfg, &icfg, State::new(1.0, 0.5, 0.0), 5.0).unwrap();
        assert!(
            r.velocity_flip.is_none() && r.position_flip <= 50.0 * 1e-12 * 1e3,
            "{r:?}"
        );

        let odd = CoefficientSpec::unchecked(
            2,
            None,
            vec![
                PeriodicFunction::fourier_sine_unchecked(vec![0.0, 1.0]),
                PeriodicFunction::zero(),
            ],
            vec![],
        );
        assert!(SystemConfig::original(odd.clone()).is_err());
        let cfg = SystemConfig::unchecked(odd, 1.0, false).unwrap();
        let r = reversibility_residual(&cfg, &icfg, State::new(0.4, 0.9, 0.0), 5.0).unwrap();
        assert!(r.max() > 1e-3, "{r:?}");
    }

    #[test]
    fn sampled_coefficients_stop_at_knots() {
        let s =
            PeriodicFunction::sampled_linear(vec![1.0, -0.5, 0.2, 0.8], Regularity::L1).unwrap();
        let spec =
            CoefficientSpec::new(2, None, vec![s, PeriodicFunction::zero()], vec![]).unwrap();
        let knots = knots_between(&spec, -0.1, 0.5);
        assert_eq!(knots.len(), 3);
        assert!((knots[0]).abs() < 1e-15 && (knots[2] - 2.0 / 6.0).abs() < 1e-15);
        let cfg = SystemConfig::original(spec).unwrap();
        let r = reversibility_residual(
            &cfg,
            &IntegratorConfig::default(),
            State::new(0.5, 0.5, 0.0),
            3.0,
        )
        .unwrap();
        assert!(r.max() < 1e-9, "{r:?}");
    }

    #[test]
    fn escape_is_reported_with_time() {
        // from (4, 0) the speed reaches sqrt(128) > 5 on the way down
        let cfg = SystemConfig::original(CoefficientSpec::unperturbed(1)).unwrap();
        let icfg = IntegratorConfig {
            escape_radius: 5.0,
            ..Default::default()
        };
        match flow(&cfg, &icfg, State::new(4.0, 0.0, 0.0), 1.0) {
            Err(Error::Integration(ode::OdeError::Escaped { t })) => {
                assert!(t > 0.0 && t < 1.0, "{t}")
            }
            other => panic!("expected escape, got {other:?}"),
        }
    }
}
