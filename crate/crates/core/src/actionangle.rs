//! The chart `psi0: (rho, theta) -> (x, y)`,
//! `x = (c rho)^alpha S(theta T0)`, `y = (c rho)^beta C(theta T0)`, its inverse
//! and the constant block `(alpha, beta, c, d)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::special::GeneralizedTrig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AAConstants {
    pub n: u32,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub d: f64,
    pub t0: f64,
}

impl AAConstants {
    pub fn new(n: u32, t0: f64) -> Self {
        let alpha = 1.0 / (n as f64 + 2.0);
        let beta = 1.0 - alpha;
        let c = 1.0 / (beta * t0);
        let d = beta * c.powf(2.0 * beta);
        let k = Self {
            n,
            alpha,
            beta,
            c,
            d,
            t0,
        };
        let lhs = (2.0 * n as f64 + 2.0) * alpha;
        let rhs = 2.0 * beta;
        assert!(
            (lhs - rhs).abs() <= 2.0 * f64::EPSILON * rhs,
            "exponent identity (2n+2) alpha = 2 beta broken: {lhs} vs {rhs}"
        );
        k
    }

    /// Twist exponent `2 beta - 1 = n / (n + 2)`.
    pub fn twist_exponent(&self) -> f64 {
        2.0 * self.beta - 1.0
    }

    /// Unperturbed angular frequency `d A^n rho^(2 beta - 1)`.
    pub fn frequency(&self, amplitude: f64, rho: f64) -> f64 {
        self.d * amplitude.powi(self.n as i32) * rho.powf(self.twist_exponent())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AAPoint {
    pub rho: f64,
    /// Angle on the unit circle, reduced to `[0, 1)`.
    pub theta: f64,
}

impl AAPoint {
    pub fn new(rho: f64, theta: f64) -> Self {
        Self {
            rho,
            theta: reduce_unit(theta),
        }
    }
}

/// Reduces to `[0, 1)`.
pub fn reduce_unit(theta: f64) -> f64 {
    let r = theta - theta.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Default radius below which the chart is refused.
pub const DEFAULT_RHO_MIN: f64 = 1e-6;

/// Chart built on a shared generalized-trig table.
#[derive(Debug, Clone)]
pub struct ActionAngle {
    k: AAConstants,
    trig: Arc<GeneralizedTrig>,
    rho_min: f64,
    /// Polar angle `atan2(S, C)` at each table knot, unwrapped on `[0, 2 pi]`.
    knot_angles: Vec<f64>,
}

impl ActionAngle {
    pub fn new(trig: Arc<GeneralizedTrig>) -> Self {
        let k = AAConstants::new(trig.n(), trig.period());
        let mut knot_angles = Vec::with_capacity(trig.knots().len());
        for &(s, c) in trig.knots() {
            let mut a = s.atan2(c);
            if a < 0.0 {
                a += 2.0 * PI;
            }
            knot_angles.push(a);
        }
        // the closing knot sits at 2 pi, not 0
        if let Some(last) = knot_angles.last_mut() {
            if *last < PI {
                *last += 2.0 * PI;
            }
        }
        Self {
            k,
            trig,
            rho_min: DEFAULT_RHO_MIN,
            knot_angles,
        }
    }

    pub fn with_rho_min(mut self, rho_min: f64) -> Self {
        self.rho_min = rho_min;
        self
    }

    pub fn constants(&self) -> &AAConstants {
        &self.k
    }

    pub fn trig(&self) -> &Arc<GeneralizedTrig> {
        &self.trig
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    /// `(x, y) = psi0(rho, theta)`.
    #[inline]
    pub fn from_action_angle(&self, p: AAPoint) -> (f64, f64) {
        // symmetric reduction keeps theta -> -theta exact through the odd table lookup
        let th = p.theta - p.theta.round();
        let (s, c) = self.trig.eval(th * self.k.t0);
        let cr = self.k.c * p.rho;
        (cr.powf(self.k.alpha) * s, cr.powf(self.k.beta) * c)
    }

    /// `rho` of a point, from the energy identity.
    #[inline]
    pub fn radius(&self, x: f64, y: f64) -> f64 {
        let n1 = self.k.n as f64 + 1.0;
        let e = y * y + x.powi(2 * self.k.n as i32 + 2) / n1;
        e.powf((self.k.n as f64 + 2.0) / (2.0 * n1)) / self.k.c
    }

    /// Inverse chart. The phase is bracketed on the knot table by polar angle
    /// (monotone along the convex level curve) and polished by Newton steps.
    pub fn to_action_angle(&self, x: f64, y: f64) -> Result<AAPoint> {
        let rho = self.radius(x, y);
        if !(rho >= self.rho_min) {
            return Err(Error::ChartSingular {
                rho,
                rho_min: self.rho_min,
            });
        }
        let cr = self.k.c * rho;
        let s = x / cr.powf(self.k.alpha);
        let c = y / cr.powf(self.k.beta);
        let tau = self.phase(s, c);
        Ok(AAPoint::new(rho, tau / self.k.t0))
    }

    /// Time `tau in [0, T0)` with `(S, C)(tau)` closest to the unit-level
    /// point `(s, c)`.
    fn phase(&self, s: f64, c: f64) -> f64 {
        let mut target = s.atan2(c);
        if target < 0.0 {
            target += 2.0 * PI;
        }
        let segs = self.knot_angles.len() - 1;
        let h = self.k.t0 / segs as f64;
        let j = self
            .knot_angles
            .partition_point(|&a| a <= target)
            .clamp(1, segs)
            - 1;
        let (a0, a1) = (self.knot_angles[j], self.knot_angles[j + 1]);
        let frac = if a1 > a0 {
            ((target - a0) / (a1 - a0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let mut tau = (j as f64 + frac) * h;
        let n = self.k.n as i32;
        for _ in 0..8 {
            let (ss, cc) = self.trig.eval(tau);
            let mut diff = ss.atan2(cc) - target;
            if diff > PI {
                diff -= 2.0 * PI;
            } else if diff < -PI {
                diff += 2.0 * PI;
            }
            // d/dtau atan2(S, C) = (C S' - S C') / (S^2 + C^2) = (C^2 + S^(2n+2)) / (S^2 + C^2)
            let rate = (cc * cc + ss.powi(2 * n + 2)) / (ss * ss + cc * cc);
            let step = diff / rate;
            tau -= step;
            if step.abs() <= 1e-15 * self.k.t0 {
                break;
            }
        }
        tau.rem_euclid(self.k.t0)
    }

    /// `|det d(x, y)/d(rho, theta)|` by central differences with step `1e-5`.
    pub fn jacobian_check(&self, p: AAPoint) -> f64 {
        let h = 1e-5;
        let at = |rho: f64, theta: f64| self.from_action_angle(AAPoint { rho, theta });
        let (xr1, yr1) = at(p.rho + h, p.theta);
        let (xr0, yr0) = at(p.rho - h, p.theta);
        let (xt1, yt1) = at(p.rho, p.theta + h);
        let (xt0, yt0) = at(p.rho, p.theta - h);
        let xr = (xr1 - xr0) / (2.0 * h);
        let yr = (yr1 - yr0) / (2.0 * h);
        let xt = (xt1 - xt0) / (2.0 * h);
        let yt = (yt1 - yt0) / (2.0 * h);
        (xr * yt - xt * yr).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::IntegratorConfig;
    use crate::special::build_trig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chart(n: u32) -> ActionAngle {
        ActionAngle::new(Arc::new(
            build_trig(n, &IntegratorConfig::default()).unwrap(),
        ))
    }

    #[test]
    fn constants_satisfy_identities() {
        for n in 0..8 {
            let t0 = crate::special::compute_period(n);
            let k = AAConstants::new(n, t0);
            assert!((k.alpha + k.beta - 1.0).abs() < 1e-15);
            assert!(k.c > 0.0 && k.d > 0.0);
        }
    }

    #[test]
    fn anchors() {
        for n in [1, 2] {
            let aa = chart(n);
            let k = *aa.constants();
            let (x, y) = aa.from_action_angle(AAPoint::new(1.0 / k.c, 0.0));
            assert_eq!((x, y), (0.0, 1.0));
            let (x, y) = aa.from_action_angle(AAPoint::new(1.0 / k.c, 0.25));
            assert!((x - crate::special::x_max(n)).abs() < 1e-9 && y.abs() < 1e-9);

            let p = aa.to_action_angle(0.0, 1.0).unwrap();
            assert!((p.rho - 1.0 / k.c).abs() < 1e-12 && p.theta.abs() < 1e-12);
            let p = aa.to_action_angle(0.0, -1.0).unwrap();
            assert!((p.rho - 1.0 / k.c).abs() < 1e-12 && (p.theta - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn angle_reflection_flips_x() {
        let aa = chart(2);
        let (x, y) = aa.from_action_angle(AAPoint::new(3.0, 0.17));
        let (xm, ym) = aa.from_action_angle(AAPoint {
            rho: 3.0,
            theta: -0.17,
        });
        assert_eq!((xm, ym), (-x, y));
        let p = aa.to_action_angle(x, y).unwrap();
        let q = aa.to_action_angle(-x, y).unwrap();
        assert!((q.rho - p.rho).abs() < 1e-12);
        assert!((reduce_unit(-p.theta) - q.theta).abs() < 1e-8);
    }

    #[test]
    fn roundtrip_and_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3] {
            let aa = chart(n);
            for _ in 0..100 {
                let p = AAPoint::new(rng.gen_range(0.5..20.0), rng.gen_range(0.0..1.0));
                let (x, y) = aa.from_action_angle(p);
                let q = aa.to_action_angle(x, y).unwrap();
                let dtheta = (q.theta - p.theta + 0.5).rem_euclid(1.0) - 0.5;
                assert!(
                    (q.rho - p.rho).abs() <= 1e-8 * p.rho && dtheta.abs() <= 1e-8,
                    "{p:?} -> {q:?}"
                );
                assert!((aa.jacobian_check(p) - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn origin_is_refused() {
        let aa = chart(1);
        assert!(matches!(
            aa.to_action_angle(0.0, 0.0),
            Err(Error::ChartSingular { .. })
        ));
    }
}
