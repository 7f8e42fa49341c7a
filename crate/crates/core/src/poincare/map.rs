use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actionangle::{AAConstants, AAPoint, ActionAngle};
use crate::coefficients::validate_spec;
use crate::dynamics::{advance, Field, IntegratorConfig, SystemConfig};
use crate::ode::OdeError;
use crate::special::GeneralizedTrig;
use crate::{Error, Result};

/// One application of an annulus map: the image and the unreduced angle
/// increment in turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapStep {
    pub point: AAPoint,
    pub lift: f64,
}

/// Maps of the annulus `rho > 0, theta in T^1` that report a lifted angle.
pub trait AnnulusMap {
    fn step(&self, p: AAPoint) -> Result<MapStep>;

    /// Description of a broken reversing symmetry, if the map has one.
    fn symmetry_violation(&self) -> Option<String> {
        None
    }
}

/// `theta -> theta + gamma`, `rho` fixed.
#[derive(Debug, Clone, Copy)]
pub struct RigidRotation {
    pub gamma: f64,
}

impl AnnulusMap for RigidRotation {
    fn step(&self, p: AAPoint) -> Result<MapStep> {
        Ok(MapStep {
            point: AAPoint::new(p.rho, p.theta + self.gamma),
            lift: self.gamma,
        })
    }
}

/// Exact time-1 map of the unperturbed rescaled system:
/// `theta -> theta + d A^n rho^(2 beta - 1)`.
#[derive(Debug, Clone, Copy)]
pub struct UnperturbedTwist {
    pub k: AAConstants,
    pub amplitude: f64,
}

impl AnnulusMap for UnperturbedTwist {
    fn step(&self, p: AAPoint) -> Result<MapStep> {
        let w = self.k.frequency(self.amplitude, p.rho);
        Ok(MapStep {
            point: AAPoint::new(p.rho, p.theta + w),
            lift: w,
        })
    }
}

/// Time-1 map of the rescaled system read in the chart `psi0`.
pub struct PoincareMap {
    cfg: SystemConfig,
    chart: ActionAngle,
    icfg: IntegratorConfig,
    field: Field,
    base_time: f64,
}

impl PoincareMap {
    /// Refuses specs that fail validation and configs in original mode.
    pub fn new(
        cfg: SystemConfig,
        trig: Arc<GeneralizedTrig>,
        icfg: IntegratorConfig,
    ) -> Result<Self> {
        let report = validate_spec(&cfg.spec);
        if !report.is_pass() {
            return Err(Error::InvalidSpec(report));
        }
        Self::unchecked(cfg, trig, icfg)
    }

    /// Skips spec validation; used to probe deliberately broken symmetry.
    pub fn unchecked(
        cfg: SystemConfig,
        trig: Arc<GeneralizedTrig>,
        icfg: IntegratorConfig,
    ) -> Result<Self> {
        icfg.validate()?;
        if !cfg.rescaled {
            return Err(Error::InvalidParameter(
                "the time-1 map is built on the rescaled system".into(),
            ));
        }
        if trig.n() != cfg.spec.n {
            return Err(Error::InvalidParameter(format!(
                "trig table is for n = {}, spec has n = {}",
                trig.n(),
                cfg.spec.n
            )));
        }
        let field = Field::new(&cfg);
        Ok(Self {
            cfg,
            chart: ActionAngle::new(trig),
            icfg,
            field,
            base_time: 0.0,
        })
    }

    /// Moves the section to `t = t_b` (0 and 1/2 are both symmetry points).
    pub fn with_base_time(mut self, t_b: f64) -> Self {
        self.base_time = t_b;
        self
    }

    pub fn base_time(&self) -> f64 {
        self.base_time
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn chart(&self) -> &ActionAngle {
        &self.chart
    }

    pub fn constants(&self) -> &AAConstants {
        self.chart.constants()
    }

    pub fn amplitude(&self) -> f64 {
        self.cfg.amplitude
    }

    pub fn integrator(&self) -> &IntegratorConfig {
        &self.icfg
    }

    /// Flows `(x, y)` over one unit of time from the section.
    /// Returns the end state and the polar angle swept, in radians.
    pub fn flow_cartesian(&self, x: f64, y: f64) -> Result<([f64; 2], f64)> {
        let rho = self.chart.radius(x, y).max(self.chart.rho_min());
        // a quarter oscillation per step at most keeps the polar angle unwrap safe
        let period = 1.0 / self.constants().frequency(self.cfg.amplitude, rho);
        let mut ctl = self.icfg.step_control();
        ctl.max_step = ctl.max_step.min(0.25 * period);
        let mut prev = x.atan2(y);
        let mut swept = 0.0;
        let out = advance(
            &self.field,
            &self.cfg.spec,
            &ctl,
            self.base_time,
            [x, y],
            self.base_time + 1.0,
            |st| {
                let a = st.y1[0].atan2(st.y1[1]);
                let mut d = a - prev;
                if d > PI {
                    d -= 2.0 * PI;
                } else if d < -PI {
                    d += 2.0 * PI;
                }
                swept += d;
                prev = a;
                ControlFlow::Continue(())
            },
        )?;
        Ok((out.y, swept))
    }
}

impl AnnulusMap for PoincareMap {
    fn step(&self, p: AAPoint) -> Result<MapStep> {
        let (x, y) = self.chart.from_action_angle(p);
        let (end, swept) = self.flow_cartesian(x, y).map_err(|e| match e {
            // report escape times relative to the section
            Error::Integration(OdeError::Escaped { t }) => Error::Integration(OdeError::Escaped {
                t: t - self.base_time,
            }),
            e => e,
        })?;
        let q = self.chart.to_action_angle(end[0], end[1])?;
        // polar angle and chart angle share the cut at x = 0, y > 0, so the
        // swept turns pin down the integer part of the lift
        let dtheta = q.theta - p.theta;
        let k = (swept / (2.0 * PI) - dtheta).round();
        Ok(MapStep {
            point: q,
            lift: k + dtheta,
        })
    }

    fn symmetry_violation(&self) -> Option<String> {
        let report = validate_spec(&self.cfg.spec);
        (!report.is_pass()).then(|| report.to_string())
    }
}

/// One application of the time-1 map.
pub fn time_one_map(map: &PoincareMap, p: AAPoint) -> Result<MapStep> {
    map.step(p)
}

/// Applies `R (rho, theta) = (rho, -theta)`, the chart form of
/// `(x, y) -> (-x, y)`.
pub fn reflect(p: AAPoint) -> AAPoint {
    AAPoint::new(p.rho, -p.theta)
}

/// Reversing involutions of the time-1 map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Involution {
    /// `theta -> -theta`; reversing for every valid spec.
    Angle,
    /// `theta -> 1/2 - theta`, i.e. `(x, y) -> (x, -y)`; reversing only
    /// when all damping coefficients vanish.
    Velocity,
}

impl Involution {
    pub fn apply(&self, p: AAPoint) -> AAPoint {
        match self {
            Involution::Angle => reflect(p),
            Involution::Velocity => AAPoint::new(p.rho, 0.5 - p.theta),
        }
    }
}

/// Distance `|R P R P(z) - z|` in the chart, with the angle measured on
/// the circle.
pub fn reversibility_defect<M: AnnulusMap>(map: &M, z: AAPoint, r: Involution) -> Result<f64> {
    let a = map.step(z)?.point;
    let b = map.step(r.apply(a))?.point;
    let w = r.apply(b);
    let dth = (w.theta - z.theta + 0.5).rem_euclid(1.0) - 0.5;
    Ok((w.rho - z.rho).hypot(dth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientSpec, PeriodicFunction};
    use crate::special::build_trig;

    fn trig() -> Arc<GeneralizedTrig> {
        Arc::new(build_trig(2, &IntegratorConfig::default()).unwrap())
    }

    fn spec(b: f64) -> CoefficientSpec {
        CoefficientSpec::new(
            2,
            Some(0),
            vec![
                PeriodicFunction::fourier_cosine(vec![0.0, 0.5]).unwrap(),
                PeriodicFunction::fourier_cosine(vec![0.0]).unwrap(),
            ],
            vec![PeriodicFunction::fourier_cosine(vec![0.0, b]).unwrap()],
        )
        .unwrap()
    }

    fn map(spec: CoefficientSpec, a: f64) -> PoincareMap {
        PoincareMap::new(
            SystemConfig::rescaled(spec, a).unwrap(),
            trig(),
            IntegratorConfig::with_tol(1e-13),
        )
        .unwrap()
    }

    #[test]
    fn unperturbed_map_is_the_twist() {
        let m = map(CoefficientSpec::unperturbed(2), 4.0);
        let twist = UnperturbedTwist {
            k: *m.constants(),
            amplitude: 4.0,
        };
        for &(r, th) in &[(2.0, 0.0), (5.0, 0.3), (9.0, 0.77)] {
            let p = AAPoint::new(r, th);
            let a = m.step(p).unwrap();
            let b = twist.step(p).unwrap();
            assert!((a.lift - b.lift).abs() < 1e-9 && (a.point.rho - r).abs() < 1e-9);
        }
    }

    #[test]
    fn reversible_under_angle_flip() {
        let m = map(spec(0.1), 4.0);
        for &(r, th) in &[(3.0, 0.1), (7.0, 0.6)] {
            assert!(
                reversibility_defect(&m, AAPoint::new(r, th), Involution::Angle).unwrap() < 1e-9
            );
        }
        let half = map(spec(0.1), 4.0).with_base_time(0.5);
        assert!(
            reversibility_defect(&half, AAPoint::new(4.0, 0.2), Involution::Angle).unwrap() < 1e-9
        );
    }

    #[test]
    fn velocity_flip_needs_zero_damping() {
        let z = AAPoint::new(5.0, 0.15);
        let undamped = map(spec(0.0), 4.0);
        assert!(reversibility_defect(&undamped, z, Involution::Velocity).unwrap() < 1e-9);
        let damped = map(spec(0.1), 4.0);
        assert!(reversibility_defect(&damped, z, Involution::Velocity).unwrap() > 1e-6);
    }

    #[test]
    fn odd_coefficients_are_flagged() {
        let odd = CoefficientSpec::unchecked(
            2,
            Some(0),
            vec![
                PeriodicFunction::fourier_sine_unchecked(vec![0.5]),
                PeriodicFunction::zero(),
            ],
            vec![PeriodicFunction::zero()],
        );
        let cfg = SystemConfig::unchecked(odd, 4.0, true).unwrap();
        assert!(matches!(
            PoincareMap::new(cfg.clone(), trig(), IntegratorConfig::default()),
            Err(Error::InvalidSpec(_))
        ));
        let m = PoincareMap::unchecked(cfg, trig(), IntegratorConfig::default()).unwrap();
        assert!(m.symmetry_violation().is_some());
    }

    #[test]
    fn original_mode_is_refused() {
        let cfg = SystemConfig::original(spec(0.1)).unwrap();
        assert!(PoincareMap::new(cfg, trig(), IntegratorConfig::default()).is_err());
    }
}
