use std::cell::Cell;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::diophantine::{diophantine_check, DiophantineClass, DiophantineVerdict};
use super::map::{AnnulusMap, MapStep};
use super::orbit::{iterate_with, ActionGauge, RawAction, Termination};
use super::rotation::{rotation_number, RotationEstimate};
use crate::actionangle::{AAConstants, AAPoint};
use crate::{Error, Result};

/// Smallest orbit length accepted by [`classify_curve`].
pub const MIN_CLASSIFY_ITERATES: usize = 1000;
pub const DEFAULT_DRIFT_TOL: f64 = 1e-3;
pub const DEFAULT_ITERATES: usize = 10_000;

/// Default Diophantine class for curve screening: `K = 1e-3 d A^n`,
/// `eps = 1`, `q_max = 1000`.
pub fn default_class(k: &AAConstants, amplitude: f64) -> DiophantineClass {
    DiophantineClass {
        k: 1e-3 * k.d * amplitude.powi(k.n as i32),
        epsilon: 1.0,
        q_max: 1000,
        m: 1,
    }
}

type Correction = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Twist coordinate `lambda = rho^(2 beta - 1)`, optionally shifted by
/// `A^(-n) * corr(rho)` where `corr` is the time average of a normal-form
/// drift term.
#[derive(Clone)]
pub struct LambdaCoord {
    exponent: f64,
    scale: f64,
    correction: Option<Correction>,
}

impl std::fmt::Debug for LambdaCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LambdaCoord")
            .field("exponent", &self.exponent)
            .field("corrected", &self.correction.is_some())
            .finish()
    }
}

impl LambdaCoord {
    pub fn new(k: &AAConstants) -> Self {
        Self {
            exponent: k.twist_exponent(),
            scale: 0.0,
            correction: None,
        }
    }

    pub fn with_correction(k: &AAConstants, amplitude: f64, corr: Correction) -> Self {
        Self {
            exponent: k.twist_exponent(),
            scale: amplitude.powi(-(k.n as i32)),
            correction: Some(corr),
        }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn is_corrected(&self) -> bool {
        self.correction.is_some()
    }

    pub fn to_lambda(&self, rho: f64) -> f64 {
        let base = rho.powf(self.exponent);
        match &self.correction {
            Some(c) => base + self.scale * c(rho),
            None => base,
        }
    }

    /// Inverse of [`to_lambda`](Self::to_lambda); Newton on the corrected
    /// form, starting from the closed-form inverse.
    pub fn to_rho(&self, lambda: f64) -> f64 {
        let mut rho = lambda.max(0.0).powf(1.0 / self.exponent);
        if self.correction.is_none() {
            return rho;
        }
        for _ in 0..50 {
            let r = self.to_lambda(rho) - lambda;
            let h = 1e-6 * rho.max(1e-3);
            let slope = (self.to_lambda(rho + h) - self.to_lambda(rho - h)) / (2.0 * h);
            let step = r / slope;
            rho -= step;
            if step.abs() <= 1e-15 * rho {
                break;
            }
        }
        rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveStatus {
    InvariantCandidate,
    Drifting,
    Escaped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveClassification {
    pub initial: AAPoint,
    pub status: CurveStatus,
    pub rotation: Option<RotationEstimate>,
    pub diophantine: Option<DiophantineVerdict>,
    pub iterates: usize,
    /// Gauge drift `max |mu_k - mu_0|`.
    #[serde(with = "crate::report::nonfinite")]
    pub sup_drift: f64,
    pub raw_drift: f64,
    pub raw_range: (f64, f64),
    pub action_range: (f64, f64),
    /// `drift_tol - sup_drift`; negative once the orbit drifts.
    #[serde(with = "crate::report::nonfinite")]
    pub confinement_gap: f64,
    pub termination: Termination,
}

impl CurveClassification {
    /// Candidate whose rotation number also passes the Diophantine check.
    pub fn confirmed(&self) -> bool {
        self.status == CurveStatus::InvariantCandidate && self.diophantine.is_some_and(|d| d.pass)
    }
}

/// Iterates from `p0`, stopping as soon as the gauge drift exceeds
/// `drift_tol`, then estimates the rotation number and screens it.
pub fn classify_curve<M: AnnulusMap, G: ActionGauge>(
    map: &M,
    gauge: &G,
    p0: AAPoint,
    n: usize,
    dc: &DiophantineClass,
    drift_tol: f64,
) -> Result<CurveClassification> {
    if n < MIN_CLASSIFY_ITERATES {
        return Err(Error::InvalidParameter(format!(
            "N = {n} below {MIN_CLASSIFY_ITERATES}"
        )));
    }
    dc.validate()?;
    let orbit = iterate_with(map, gauge, p0, n, Some(drift_tol));
    let status = match orbit.termination {
        Termination::Completed => CurveStatus::InvariantCandidate,
        Termination::DriftExceeded { .. } => CurveStatus::Drifting,
        Termination::Escaped { .. } | Termination::Failed { .. } => CurveStatus::Escaped,
    };
    let rotation = if status == CurveStatus::Escaped {
        None
    } else {
        rotation_number(&orbit).ok()
    };
    let diophantine = match rotation {
        Some(r) => Some(diophantine_check(r.omega_radians(), dc)?),
        None => None,
    };
    Ok(CurveClassification {
        initial: p0,
        status,
        rotation,
        diophantine,
        iterates: orbit.iterates,
        sup_drift: orbit.sup_drift,
        raw_drift: orbit.raw_drift,
        raw_range: orbit.raw_range,
        action_range: orbit.action_range,
        confinement_gap: drift_tol - orbit.sup_drift,
        termination: orbit.termination,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfinementReport {
    /// Set when the map's coefficients break the reversing symmetry; the
    /// confinement mechanism then has no footing.
    pub symmetry_violation: Option<String>,
    /// `[min rho of inner curve, max rho of outer curve]`.
    pub band: (f64, f64),
    pub observed: (f64, f64),
    /// Largest excursion beyond the band (0 when inside).
    pub excess: f64,
    pub tol: f64,
    pub iterates: usize,
    pub termination: Termination,
    pub confined: bool,
}

/// Iterates `p_mid` and checks that raw `rho` stays within the band spanned
/// by two nested curves, up to `tol`.
pub fn confinement_check<M: AnnulusMap>(
    map: &M,
    inner: &CurveClassification,
    outer: &CurveClassification,
    p_mid: AAPoint,
    n: usize,
    tol: f64,
) -> Result<ConfinementReport> {
    if !(inner.raw_range.1 < outer.raw_range.0) {
        return Err(Error::InvalidParameter(format!(
            "curves overlap in rho: inner {:?}, outer {:?}",
            inner.raw_range, outer.raw_range
        )));
    }
    let symmetry_violation = map.symmetry_violation();
    let band = (inner.raw_range.0, outer.raw_range.1);
    let orbit = iterate_with(map, &RawAction, p_mid, n, None);
    let excess = (band.0 - orbit.raw_range.0)
        .max(orbit.raw_range.1 - band.1)
        .max(0.0);
    let confined = orbit.termination == Termination::Completed && excess <= tol;
    Ok(ConfinementReport {
        symmetry_violation,
        band,
        observed: orbit.raw_range,
        excess,
        tol,
        iterates: orbit.iterates,
        termination: orbit.termination,
        confined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtlasSettings {
    pub lambda_range: (f64, f64),
    pub samples: usize,
    pub iterates: usize,
    pub drift_tol: f64,
    pub class: DiophantineClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasRow {
    pub rho0: f64,
    pub lambda0: f64,
    pub curve: CurveClassification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atlas {
    pub settings: AtlasSettings,
    pub rows: Vec<AtlasRow>,
    /// False when a deadline cut the scan short.
    pub complete: bool,
    pub elapsed_seconds: f64,
}

impl Atlas {
    pub fn candidates(&self) -> impl Iterator<Item = &AtlasRow> {
        self.rows
            .iter()
            .filter(|r| r.curve.status == CurveStatus::InvariantCandidate)
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &AtlasRow> {
        self.rows.iter().filter(|r| r.curve.confirmed())
    }
}

/// Map that refuses to step once `deadline` has passed.
struct Bounded<'a, M> {
    map: &'a M,
    deadline: Option<Instant>,
    expired: Cell<bool>,
}

impl<M: AnnulusMap> AnnulusMap for Bounded<'_, M> {
    fn step(&self, p: AAPoint) -> Result<MapStep> {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.expired.set(true);
            return Err(Error::InvalidParameter("deadline passed".into()));
        }
        self.map.step(p)
    }

    fn symmetry_violation(&self) -> Option<String> {
        self.map.symmetry_violation()
    }
}

/// Classifies `samples` curves started on the symmetry line `theta = 0`,
/// equally spaced in `lambda` (endpoints included). Once `deadline` passes
/// the scan stops, dropping the radius in progress.
pub fn poincare_atlas<M: AnnulusMap, G: ActionGauge>(
    map: &M,
    gauge: &G,
    coord: &LambdaCoord,
    settings: &AtlasSettings,
    deadline: Option<Instant>,
) -> Result<Atlas> {
    let (lo, hi) = settings.lambda_range;
    if !(lo > 0.0 && hi > lo) || settings.samples == 0 {
        return Err(Error::InvalidParameter(format!(
            "lambda range ({lo}, {hi}) with {} samples",
            settings.samples
        )));
    }
    let start = Instant::now();
    let mut rows = Vec::with_capacity(settings.samples);
    let bounded = Bounded {
        map,
        deadline,
        expired: Cell::new(false),
    };
    for j in 0..settings.samples {
        let lambda0 = if settings.samples == 1 {
            lo
        } else {
            lo + (hi - lo) * j as f64 / (settings.samples - 1) as f64
        };
        let rho0 = coord.to_rho(lambda0);
        let curve = classify_curve(
            &bounded,
            gauge,
            AAPoint::new(rho0, 0.0),
            settings.iterates,
            &settings.class,
            settings.drift_tol,
        )?;
        if bounded.expired.get() {
            break;
        }
        rows.push(AtlasRow {
            rho0,
            lambda0,
            curve,
        });
    }
    Ok(Atlas {
        settings: *settings,
        rows,
        complete: !bounded.expired.get(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Deviations `(xi, eta)` of one map step from the unperturbed twist in
/// `lambda = rho^(2 beta - 1)`:
/// `lambda_1 = lambda_0 + xi`, `lift = d A^n (lambda_0 + eta)`.
pub fn twist_deviation<M: AnnulusMap>(
    map: &M,
    k: &AAConstants,
    amplitude: f64,
    p: AAPoint,
) -> Result<(f64, f64)> {
    let e = k.twist_exponent();
    let l0 = p.rho.powf(e);
    let s = map.step(p)?;
    let xi = s.point.rho.powf(e) - l0;
    let eta = s.lift / (k.d * amplitude.powi(k.n as i32)) - l0;
    Ok((xi, eta))
}

/// `(sup |xi|, sup |eta|)` over a `n_lambda x n_theta` grid on
/// `[lo, hi] x T^1`.
pub fn twist_deviation_sup<M: AnnulusMap>(
    map: &M,
    k: &AAConstants,
    amplitude: f64,
    lambda_range: (f64, f64),
    n_lambda: usize,
    n_theta: usize,
) -> Result<(f64, f64)> {
    let (lo, hi) = lambda_range;
    let mut sup = (0.0f64, 0.0f64);
    for i in 0..n_lambda {
        let lam = if n_lambda == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n_lambda - 1) as f64
        };
        let rho = lam.powf(1.0 / k.twist_exponent());
        for j in 0..n_theta {
            let (xi, eta) = twist_deviation(
                map,
                k,
                amplitude,
                AAPoint::new(rho, j as f64 / n_theta as f64),
            )?;
            sup = (sup.0.max(xi.abs()), sup.1.max(eta.abs()));
        }
    }
    Ok(sup)
}
