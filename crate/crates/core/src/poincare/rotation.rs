use serde::{Deserialize, Serialize};

use super::orbit::OrbitRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationMethod {
    BirkhoffWeighted,
    LinearFit,
}

/// Mean lift per iterate, in turns (not reduced mod 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    pub omega: f64,
    pub error_bound: f64,
    pub method: RotationMethod,
}

impl RotationEstimate {
    /// Fractional part in `[0, 1)`.
    pub fn omega_mod1(&self) -> f64 {
        self.omega.rem_euclid(1.0)
    }

    /// In radians per iterate, the unit of the Diophantine check.
    pub fn omega_radians(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.omega
    }
}

pub const MIN_POINTS: usize = 100;

/// Above this Birkhoff tail difference the linear fit is also tried.
const BIRKHOFF_TRUST: f64 = 1e-6;

fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

/// `sum w(k/N) x_k / sum w(k/N)` with the exponential bump.
pub fn weighted_birkhoff(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let w = bump((k as f64 + 0.5) / n);
        num += w * x;
        den += w;
    }
    num / den
}

/// Least-squares slope of the lift against the iterate index, with the
/// standard error of the slope.
fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mean_k = (n - 1.0) / 2.0;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (k, p) in points.iter().enumerate() {
        let dk = k as f64 - mean_k;
        sxy += dk * (p.1 - mean_y);
        sxx += dk * dk;
    }
    let slope = sxy / sxx;
    let ss: f64 = points
        .iter()
        .enumerate()
        .map(|(k, p)| (p.1 - mean_y - slope * (k as f64 - mean_k)).powi(2))
        .sum();
    let se = (ss / (n - 2.0) / sxx).sqrt();
    (slope, se)
}

/// Rotation number of an orbit from its lift increments. The error bound is
/// the difference between the full estimate and the estimate on the first
/// half, plus a rounding floor.
pub fn rotation_number(orbit: &OrbitRecord) -> Result<RotationEstimate> {
    if orbit.escaped() {
        return Err(Error::UndefinedRotation("orbit escaped".into()));
    }
    if orbit.points.len() < MIN_POINTS {
        return Err(Error::UndefinedRotation(format!(
            "{} points, at least {MIN_POINTS} needed",
            orbit.points.len()
        )));
    }
    let inc = orbit.increments();
    let full = weighted_birkhoff(&inc);
    let half = weighted_birkhoff(&inc[..inc.len() / 2]);
    let floor = 8.0 * f64::EPSILON * full.abs().max(1.0);
    let wb = RotationEstimate {
        omega: full,
        error_bound: (full - half).abs() + floor,
        method: RotationMethod::BirkhoffWeighted,
    };
    if wb.error_bound <= BIRKHOFF_TRUST {
        return Ok(wb);
    }
    let (slope, se) = linear_fit(&orbit.points);
    let lf = RotationEstimate {
        omega: slope,
        error_bound: se + floor,
        method: RotationMethod::LinearFit,
    };
    Ok(if lf.error_bound < wb.error_bound {
        lf
    } else {
        wb
    })
}
