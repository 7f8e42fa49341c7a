//! Boundedness sweeps over initial conditions and amplitudes, and the
//! quasi-periodicity probe for orbits started on invariant curves.

use std::ops::ControlFlow;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actionangle::AAPoint;
use crate::coefficients::CoefficientSpec;
use crate::dynamics::{advance, flow, Field, IntegratorConfig, State, SystemConfig};
use crate::normalform::{
    compose_chain, AnnulusDomain, ChainOptions, GridResolution, PerturbationTerms,
};
use crate::ode::OdeError;
use crate::poincare::{
    confinement_check, poincare_atlas, Atlas, AtlasSettings, ConfinementReport, CurveStatus,
    LambdaCoord, PoincareMap, RawAction, DEFAULT_ITERATES,
};
use crate::{Error, Result};

/// Interior dense-output samples per accepted step for the running sup.
const DENSE_SAMPLES: usize = 4;

/// Uniform `count` points on `[lo, hi]` (the midpoint when `count == 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.5 * (self.lo + self.hi)];
        }
        (0..self.count)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub seed: u64,
    /// Displacement bound as a fraction of the grid spacing.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Where the spec was read from, kept for provenance.
    #[serde(default)]
    pub spec_source: Option<PathBuf>,
    pub spec: CoefficientSpec,
    /// Each amplitude runs the rescaled system; `A = 1` is the equation
    /// itself.
    pub amplitudes: Vec<f64>,
    pub x: Axis,
    pub v: Axis,
    #[serde(default)]
    pub jitter: Option<Jitter>,
    pub horizon: f64,
    /// Intermediate times `0 < t < horizon` at which the running sup is
    /// also recorded.
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon {} must be positive",
                self.horizon
            )));
        }
        if self.x.count == 0 || self.v.count == 0 || self.amplitudes.is_empty() {
            return Err(Error::InvalidParameter(
                "empty initial-condition grid or amplitude list".into(),
            ));
        }
        if let Some(&c) = self
            .checkpoints
            .iter()
            .find(|&&c| !(c > 0.0 && c < self.horizon))
        {
            return Err(Error::InvalidParameter(format!(
                "checkpoint {c} outside (0, {})",
                self.horizon
            )));
        }
        if let Some(j) = self.jitter {
            if !(0.0..0.5).contains(&j.fraction) {
                return Err(Error::InvalidParameter(format!(
                    "jitter fraction {} outside [0, 0.5)",
                    j.fraction
                )));
            }
        }
        self.integrator.validate()
    }

    /// Initial conditions in row-major `(x, v)` order, jittered when asked.
    pub fn initial_conditions(&self) -> Vec<(f64, f64)> {
        let (xs, vs) = (self.x.points(), self.v.points());
        let spacing = |a: &Axis| {
            if a.count > 1 {
                (a.hi - a.lo) / (a.count - 1) as f64
            } else {
                0.0
            }
        };
        let (hx, hv) = (spacing(&self.x), spacing(&self.v));
        let mut rng = self
            .jitter
            .map(|j| (ChaCha8Rng::seed_from_u64(j.seed), j.fraction));
        let mut out = Vec::with_capacity(xs.len() * vs.len());
        for &x in &xs {
            for &v in &vs {
                let (dx, dv) = match &mut rng {
                    Some((r, f)) => (
                        r.gen_range(-1.0..=1.0) * *f * hx,
                        r.gen_range(-1.0..=1.0) * *f * hv,
                    ),
                    None => (0.0, 0.0),
                };
                out.push((x + dx, v + dv));
            }
        }
        out
    }
}

/// One direction of one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    /// `sup (|x| + |v|)` over the integrated interval (up to escape).
    pub sup: f64,
    /// Running sup at each configured checkpoint.
    pub checkpoint_sups: Vec<f64>,
    pub escaped: bool,
    pub escape_time: Option<f64>,
    /// State at `+-horizon` when the leg completed.
    pub end: Option<State>,
    pub failure: Option<String>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSweep {
    pub amplitude: f64,
    pub x0: f64,
    pub v0: f64,
    /// `|x0| + |v0|`.
    pub initial_magnitude: f64,
    pub forward: Leg,
    pub backward: Leg,
}

impl OrbitSweep {
    pub fn ratio(&self) -> f64 {
        self.forward.sup.max(self.backward.sup) / self.initial_magnitude
    }

    fn checkpoint_ratio(&self, i: usize) -> f64 {
        self.forward.checkpoint_sups[i].max(self.backward.checkpoint_sups[i])
            / self.initial_magnitude
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSummary {
    pub amplitude: f64,
    pub orbits: usize,
    pub escapes: usize,
    pub failures: usize,
    /// Max sup ratio over `[-horizon, horizon]`.
    pub max_ratio: f64,
    /// Max sup ratio over `[-c, c]` for each checkpoint `c`.
    pub checkpoint_max_ratios: Vec<f64>,
    /// Largest endpoint distance between the backward leg from `(x, v)` and
    /// the mirrored forward leg from `(-x, v)`; `None` when no initial
    /// condition has a mirror partner.
    pub mirror_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub horizon: f64,
    pub checkpoints: Vec<f64>,
    pub orbits: Vec<OrbitSweep>,
    pub summaries: Vec<AmplitudeSummary>,
}

impl SweepReport {
    pub fn escapes(&self) -> usize {
        self.summaries.iter().map(|s| s.escapes).sum()
    }

    pub fn max_ratio(&self) -> f64 {
        self.summaries
            .iter()
            .map(|s| s.max_ratio)
            .fold(0.0, f64::max)
    }
}

fn run_leg(
    cfg: &SystemConfig,
    field: &Field,
    icfg: &IntegratorConfig,
    s0: State,
    t1: f64,
    checkpoints: &[f64],
) -> Leg {
    let ctl = icfg.step_control();
    let dir = t1.signum();
    // checkpoints in the direction of travel
    let marks: Vec<f64> = checkpoints.iter().map(|c| dir * c).collect();
    let mut cp = vec![f64::NAN; marks.len()];
    let mut sup = s0.x.abs() + s0.v.abs();
    let norm = |y: [f64; 2]| y[0].abs() + y[1].abs();
    let mut steps = 0;
    let result = advance(field, &cfg.spec, &ctl, s0.t, [s0.x, s0.v], t1, |st| {
        steps += 1;
        let seg = st.dense();
        for (i, &m) in marks.iter().enumerate() {
            if cp[i].is_nan() && seg.contains(m) {
                // running sup up to the checkpoint, including the partial step
                let mut s = sup;
                for j in 1..=DENSE_SAMPLES {
                    let t = st.t0 + (m - st.t0) * j as f64 / DENSE_SAMPLES as f64;
                    s = s.max(norm(seg.eval(t)));
                }
                cp[i] = s;
            }
        }
        for j in 1..DENSE_SAMPLES {
            sup = sup.max(norm(
                seg.eval(st.t0 + st.h() * j as f64 / DENSE_SAMPLES as f64),
            ));
        }
        sup = sup.max(norm(st.y1));
        ControlFlow::Continue(())
    });
    let mut leg = Leg {
        sup,
        checkpoint_sups: Vec::new(),
        escaped: false,
        escape_time: None,
        end: None,
        failure: None,
        steps,
    };
    match result {
        Ok(out) => leg.end = Some(State::new(out.y[0], out.y[1], out.t)),
        Err(OdeError::Escaped { t }) => {
            leg.escaped = true;
            leg.escape_time = Some(t);
        }
        Err(e) => leg.failure = Some(e.to_string()),
    }
    // checkpoints never reached carry the sup at termination
    leg.checkpoint_sups = cp
        .into_iter()
        .map(|c| if c.is_nan() { sup } else { c })
        .collect();
    leg
}

/// Integrates every initial condition over `[0, T]` and `[-T, 0]` for each
/// amplitude. Orbits run in parallel; the result does not depend on the
/// thread count.
pub fn boundedness_sweep(sc: &SweepConfig) -> Result<SweepReport> {
    sc.validate()?;
    let ics = sc.initial_conditions();
    let mut orbits = Vec::new();
    let mut summaries = Vec::new();
    for &a in &sc.amplitudes {
        let cfg = SystemConfig::rescaled(sc.spec.clone(), a)?;
        let field = Field::new(&cfg);
        let batch: Vec<OrbitSweep> = ics
            .par_iter()
            .map(|&(x0, v0)| {
                let s0 = State::new(x0, v0, 0.0);
                OrbitSweep {
                    amplitude: a,
                    x0,
                    v0,
                    initial_magnitude: x0.abs() + v0.abs(),
                    forward: run_leg(
                        &cfg,
                        &field,
                        &sc.integrator,
                        s0,
                        sc.horizon,
                        &sc.checkpoints,
                    ),
                    backward: run_leg(
                        &cfg,
                        &field,
                        &sc.integrator,
                        s0,
                        -sc.horizon,
                        &sc.checkpoints,
                    ),
                }
            })
            .collect();
        summaries.push(summarize(a, &batch, sc.checkpoints.len()));
        orbits.extend(batch);
    }
    Ok(SweepReport {
        horizon: sc.horizon,
        checkpoints: sc.checkpoints.clone(),
        orbits,
        summaries,
    })
}

fn summarize(a: f64, batch: &[OrbitSweep], n_cp: usize) -> AmplitudeSummary {
    let escapes = batch
        .iter()
        .filter(|o| o.forward.escaped || o.backward.escaped)
        .count();
    let failures = batch
        .iter()
        .filter(|o| o.forward.failure.is_some() || o.backward.failure.is_some())
        .count();
    let max_ratio = batch.iter().map(OrbitSweep::ratio).fold(0.0, f64::max);
    let checkpoint_max_ratios = (0..n_cp)
        .map(|i| {
            batch
                .iter()
                .map(|o| o.checkpoint_ratio(i))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut mirror_defect: Option<f64> = None;
    for o in batch {
        let Some(partner) = batch.iter().find(|p| p.x0 == -o.x0 && p.v0 == o.v0) else {
            continue;
        };
        if let (Some(b), Some(f)) = (o.backward.end, partner.forward.end) {
            let d = (b.x + f.x).hypot(b.v - f.v);
            mirror_defect = Some(mirror_defect.map_or(d, |m| m.max(d)));
        }
    }
    AmplitudeSummary {
        amplitude: a,
        orbits: batch.len(),
        escapes,
        failures,
        max_ratio,
        checkpoint_max_ratios,
        mirror_defect,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPeriodicityReport {
    pub start: State,
    /// `(x, v)` at integer times `0, 1, ..., max(counts)`.
    pub samples: Vec<(f64, f64)>,
    pub counts: Vec<usize>,
    /// Largest distance between angularly consecutive samples among the
    /// first `counts[i]` iterates.
    pub max_gaps: Vec<f64>,
}

/// Largest gap between consecutive points after sorting by polar angle
/// about the origin, cyclically.
pub fn max_angular_gap(points: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, (f64, f64))> =
        points.iter().map(|&(x, v)| (x.atan2(v), (x, v))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gap = 0.0f64;
    for i in 0..pts.len() {
        let (a, b) = (pts[i].1, pts[(i + 1) % pts.len()].1);
        gap = gap.max((a.0 - b.0).hypot(a.1 - b.1));
    }
    gap
}

/// Samples the orbit of `s0` at integer times and measures how densely the
/// samples cover their closed curve as the sample count grows.
pub fn quasi_periodicity_probe(
    cfg: &SystemConfig,
    icfg: &IntegratorConfig,
    s0: State,
    counts: &[usize],
) -> Result<QuasiPeriodicityReport> {
    let n = counts.iter().copied().max().unwrap_or(0);
    if n < 2 || counts.iter().any(|&c| c < 2) {
        return Err(Error::InvalidParameter(
            "sample counts must be at least 2".into(),
        ));
    }
    let mut samples = Vec::with_capacity(n);
    let mut s = s0;
    samples.push((s.x, s.v));
    for _ in 1..n {
        s = flow(cfg, icfg, s, s.t + 1.0)?;
        samples.push((s.x, s.v));
    }
    let max_gaps = counts
        .iter()
        .map(|&c| max_angular_gap(&samples[..c]))
        .collect();
    Ok(QuasiPeriodicityReport {
        start: s0,
        samples,
        counts: counts.to_vec(),
        max_gaps,
    })
}

/// Settings of the invariant-curve atlas at one amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtlasExperiment {
    pub settings: AtlasSettings,
    /// Radial averaging steps composed into the drift gauge; 0 measures
    /// drift in raw `rho`.
    pub gauge_radial_steps: usize,
    pub resolution: GridResolution,
    pub confinement_iterates: usize,
    pub confinement_tol: f64,
}

impl AtlasExperiment {
    pub fn new(settings: AtlasSettings) -> Self {
        Self {
            settings,
            gauge_radial_steps: 2,
            resolution: GridResolution::default(),
            confinement_iterates: DEFAULT_ITERATES,
            confinement_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasOutcome {
    pub atlas: Atlas,
    /// Radial interval of the normal-form chain behind the gauge.
    pub gauge_domain: Option<(f64, f64)>,
    /// Indices into `atlas.rows` of the curves bracketing the midpoint.
    pub pair: Option<(usize, usize)>,
    pub confinement: Option<ConfinementReport>,
}

impl AtlasOutcome {
    pub fn candidates(&self) -> usize {
        self.atlas.candidates().count()
    }

    pub fn confirmed(&self) -> usize {
        self.atlas.confirmed().count()
    }
}

/// Normal-form chain domain for a `rho` interval: wide enough for the
/// orbit oscillation and the per-step shrink.
fn gauge_domain(rho_lo: f64, rho_hi: f64) -> Result<AnnulusDomain> {
    AnnulusDomain::new(0.875 * rho_lo, 1.11 * rho_hi)
}

/// Scans the atlas with a normal-form drift gauge, then iterates a
/// midpoint between the first two adjacent invariant candidates with disjoint
/// `rho` ranges. The confinement run is skipped when the scan is cut short
/// by `deadline` or no such pair exists.
pub fn run_atlas_experiment(
    map: &PoincareMap,
    exp: &AtlasExperiment,
    deadline: Option<Instant>,
) -> Result<AtlasOutcome> {
    let k = *map.constants();
    let coord = LambdaCoord::new(&k);
    let (lo, hi) = exp.settings.lambda_range;
    let (atlas, gauge_domain) = if exp.gauge_radial_steps == 0 {
        (
            poincare_atlas(map, &RawAction, &coord, &exp.settings, deadline)?,
            None,
        )
    } else {
        let pt = PerturbationTerms::new(map.config().clone(), map.chart().trig().clone())?;
        let opts = ChainOptions {
            domain: gauge_domain(coord.to_rho(lo), coord.to_rho(hi))?,
            resolution: exp.resolution,
        };
        let chain = Arc::new(compose_chain(&pt, exp.gauge_radial_steps, 0, &opts)?);
        let atlas = poincare_atlas(map, &chain.gauge(), &coord, &exp.settings, deadline)?;
        (atlas, Some(chain.domain()))
    };
    let mut out = AtlasOutcome {
        atlas,
        gauge_domain,
        pair: None,
        confinement: None,
    };
    if !out.atlas.complete {
        return Ok(out);
    }
    let candidates: Vec<usize> = (0..out.atlas.rows.len())
        .filter(|&i| out.atlas.rows[i].curve.status == CurveStatus::InvariantCandidate)
        .collect();
    out.pair = candidates
        .windows(2)
        .map(|w| (w[0], w[1]))
        .find(|&(i, j)| out.atlas.rows[i].curve.raw_range.1 < out.atlas.rows[j].curve.raw_range.0);
    if let Some((i, j)) = out.pair {
        let (inner, outer) = (&out.atlas.rows[i], &out.atlas.rows[j]);
        let mid = AAPoint::new(0.5 * (inner.rho0 + outer.rho0), 0.0);
        out.confinement = Some(confinement_check(
            map,
            &inner.curve,
            &outer.curve,
            mid,
            exp.confinement_iterates,
            exp.confinement_tol,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::PeriodicFunction;
    use crate::dynamics::unperturbed_energy;

    fn sweep(spec: CoefficientSpec, horizon: f64) -> SweepConfig {
        SweepConfig {
            spec_source: None,
            spec,
            amplitudes: vec![1.0],
            x: Axis {
                lo: -1.0,
                hi: 1.0,
                count: 2,
            },
            v: Axis {
                lo: 0.5,
                hi: 1.0,
                count: 2,
            },
            jitter: None,
            horizon,
            checkpoints: vec![horizon / 2.0],
            integrator: IntegratorConfig::with_tol(1e-11),
            output: None,
        }
    }

    #[test]
    fn unperturbed_sup_is_the_energy_level_bound() {
        let n = 1;
        let report = boundedness_sweep(&sweep(CoefficientSpec::unperturbed(n), 50.0)).unwrap();
        for o in &report.orbits {
            // sup of |x| + |v| on the level set v^2/2 + x^4/4 = E
            let e = unperturbed_energy(n, o.x0, o.v0);
            let level = |x: f64| x.abs() + (2.0 * (e - x.powi(4) / 4.0)).max(0.0).sqrt();
            let xm = (4.0 * e).powf(0.25);
            let exact = (0..=20000)
                .map(|i| level(xm * i as f64 / 20000.0))
                .fold(0.0, f64::max);
            assert!(
                (o.forward.sup - exact).abs() < 1e-4 * exact,
                "{} vs {exact}",
                o.forward.sup
            );
            assert!((o.backward.sup - exact).abs() < 1e-4 * exact);
        }
        assert_eq!(report.escapes(), 0);
    }

    #[test]
    fn backward_mirrors_forward() {
        let spec = CoefficientSpec::new(
            2,
            Some(0),
            vec![
                PeriodicFunction::fourier_cosine(vec![0.0, 0.5]).unwrap(),
                PeriodicFunction::fourier_cosine(vec![0.0]).unwrap(),
            ],
            vec![PeriodicFunction::fourier_cosine(vec![0.0, 0.1]).unwrap()],
        )
        .unwrap();
        let report = boundedness_sweep(&sweep(spec, 20.0)).unwrap();
        let s = &report.summaries[0];
        assert!(s.mirror_defect.unwrap() < 1e-7, "{:?}", s.mirror_defect);
        assert!(s.checkpoint_max_ratios[0] <= s.max_ratio);
    }

    #[test]
    fn deterministic_jitter() {
        let mut sc = sweep(CoefficientSpec::unperturbed(1), 1.0);
        sc.jitter = Some(Jitter {
            seed: 3,
            fraction: 0.1,
        });
        let a = sc.initial_conditions();
        assert_eq!(a, sc.initial_conditions());
        assert!(a
            .iter()
            .zip(sweep(CoefficientSpec::unperturbed(1), 1.0).initial_conditions())
            .any(|(p, q)| p != &q));
        sc.horizon = -1.0;
        assert!(boundedness_sweep(&sc).is_err());
    }

    #[test]
    fn circle_samples_fill_in() {
        let pts: Vec<(f64, f64)> = (0..400)
            .map(|k| {
                (
                    (k as f64 * 0.618_033_988_75 * std::f64::consts::TAU).sin(),
                    (k as f64 * 0.618_033_988_75 * std::f64::consts::TAU).cos(),
                )
            })
            .collect();
        assert!(max_angular_gap(&pts[..400]) < max_angular_gap(&pts[..40]));
        assert!(max_angular_gap(&pts) < 0.05);
    }
}
