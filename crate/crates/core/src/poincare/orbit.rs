use serde::{Deserialize, Serialize};

use super::map::AnnulusMap;
use crate::actionangle::AAPoint;
use crate::ode::OdeError;
use crate::Error;

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new(start: f64) -> Self {
        Self {
            sum: start,
            comp: 0.0,
        }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Action used to measure drift along an orbit. The identity reads raw
/// `rho`; a normal-form chain supplies a coordinate in which the fast
/// oscillation of `rho` is averaged out.
pub trait ActionGauge {
    fn action(&self, p: AAPoint) -> f64;
}

/// Raw `rho`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawAction;

impl ActionGauge for RawAction {
    fn action(&self, p: AAPoint) -> f64 {
        p.rho
    }
}

impl<F: Fn(AAPoint) -> f64> ActionGauge for F {
    fn action(&self, p: AAPoint) -> f64 {
        self(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    /// Left the integrator's escape radius during iterate `iterate`
    /// (1-based) at time `time` after the start.
    Escaped {
        iterate: usize,
        time: f64,
    },
    /// Gauge drift passed the early-stop threshold.
    DriftExceeded {
        iterate: usize,
    },
    /// Any other numerical failure.
    Failed {
        iterate: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub initial: AAPoint,
    /// `(rho, lifted theta)` for iterates `0..=iterates`.
    pub points: Vec<(f64, f64)>,
    pub iterates: usize,
    /// `max_k |rho_k - rho_0|`.
    pub raw_drift: f64,
    /// `max_k |mu_k - mu_0|` in the gauge action.
    #[serde(with = "crate::report::nonfinite")]
    pub sup_drift: f64,
    pub raw_range: (f64, f64),
    pub action_range: (f64, f64),
    pub termination: Termination,
}

impl OrbitRecord {
    pub fn escaped(&self) -> bool {
        matches!(self.termination, Termination::Escaped { .. })
    }

    /// Lift increments `theta_{k+1} - theta_k` in turns.
    pub fn increments(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1].1 - w[0].1).collect()
    }
}

/// Iterates `map` up to `n` times from `p0`, stopping early on escape,
/// failure or (when `stop_drift` is set) once the gauge drift exceeds it.
pub fn iterate_with<M: AnnulusMap, G: ActionGauge>(
    map: &M,
    gauge: &G,
    p0: AAPoint,
    n: usize,
    stop_drift: Option<f64>,
) -> OrbitRecord {
    let mu0 = gauge.action(p0);
    let mut rec = OrbitRecord {
        initial: p0,
        points: Vec::with_capacity(n + 1),
        iterates: 0,
        raw_drift: 0.0,
        sup_drift: 0.0,
        raw_range: (p0.rho, p0.rho),
        action_range: (mu0, mu0),
        termination: Termination::Completed,
    };
    rec.points.push((p0.rho, p0.theta));
    let mut lift = NeumaierSum::new(p0.theta);
    let mut p = p0;
    for k in 1..=n {
        let s = match map.step(p) {
            Ok(s) => s,
            Err(Error::Integration(OdeError::Escaped { t })) => {
                rec.termination = Termination::Escaped {
                    iterate: k,
                    time: (k - 1) as f64 + t,
                };
                break;
            }
            Err(e) => {
                rec.termination = Termination::Failed {
                    iterate: k,
                    reason: e.to_string(),
                };
                break;
            }
        };
        p = s.point;
        lift.add(s.lift);
        rec.points.push((p.rho, lift.value()));
        rec.iterates = k;
        let mu = gauge.action(p);
        rec.raw_drift = rec.raw_drift.max((p.rho - p0.rho).abs());
        let d = (mu - mu0).abs();
        rec.sup_drift = if d.is_nan() {
            f64::INFINITY
        } else {
            rec.sup_drift.max(d)
        };
        rec.raw_range = (rec.raw_range.0.min(p.rho), rec.raw_range.1.max(p.rho));
        if mu.is_finite() {
            rec.action_range = (rec.action_range.0.min(mu), rec.action_range.1.max(mu));
        }
        if stop_drift.is_some_and(|d| rec.sup_drift > d) {
            rec.termination = Termination::DriftExceeded { iterate: k };
            break;
        }
    }
    rec
}

/// `n` iterates measured in raw `rho`.
pub fn iterate<M: AnnulusMap>(map: &M, p0: AAPoint, n: usize) -> OrbitRecord {
    iterate_with(map, &RawAction, p0, n, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poincare::{MapStep, RigidRotation};
    use crate::Result;

    struct Creep(f64);

    impl AnnulusMap for Creep {
        fn step(&self, p: AAPoint) -> Result<MapStep> {
            Ok(MapStep {
                point: AAPoint::new(p.rho + self.0, p.theta + 0.25),
                lift: 0.25,
            })
        }
    }

    #[test]
    fn compensated_sum() {
        let mut s = NeumaierSum::new(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn lift_accumulates_without_reduction() {
        let orbit = iterate(&RigidRotation { gamma: 0.7 }, AAPoint::new(2.0, 0.1), 100);
        assert_eq!(orbit.iterates, 100);
        assert!((orbit.points[100].1 - (0.1 + 70.0)).abs() < 1e-12);
        assert_eq!(orbit.raw_drift, 0.0);
    }

    #[test]
    fn drift_stop_and_nan_gauge() {
        let orbit = iterate_with(
            &Creep(1e-3),
            &RawAction,
            AAPoint::new(2.0, 0.0),
            100,
            Some(0.01),
        );
        assert_eq!(
            orbit.termination,
            Termination::DriftExceeded { iterate: 11 }
        );
        let nan_past = |p: AAPoint| if p.rho > 2.0025 { f64::NAN } else { p.rho };
        let orbit = iterate_with(
            &Creep(1e-3),
            &nan_past,
            AAPoint::new(2.0, 0.0),
            100,
            Some(0.01),
        );
        assert_eq!(orbit.termination, Termination::DriftExceeded { iterate: 3 });
        assert!(orbit.sup_drift.is_infinite());
    }
}
