use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{Field2, Field3, GridResolution, TensorGrid};
use super::step::{
    build_angular_step, build_radial_step, grid_step, GridGenerator, StepKind, TransformStep,
};
use super::terms::{AnnulusDomain, PerturbationTerms, TermValues};
use crate::actionangle::{AAConstants, AAPoint};
use crate::poincare::ActionGauge;
use crate::{Error, Result};

/// Margin applied to the measured `sup |V|` when shrinking the annulus.
const SHRINK_SAFETY: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub domain: AnnulusDomain,
    pub resolution: GridResolution,
}

/// Radial interval before and after one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub kind: StepKind,
    pub before: (f64, f64),
    pub after: (f64, f64),
    /// `A * (shrink on each side)`, the measured constant of the nesting.
    pub scaled_margin: f64,
}

/// `(f1, f2, g1, g2)` of the system in the coordinates of the previous
/// step, evaluated at a grid line.
trait Source {
    fn at(&self, rho: f64, theta: f64, t: f64) -> (TermValues, f64);
}

struct Analytic<'a>(&'a PerturbationTerms);

impl Source for Analytic<'_> {
    fn at(&self, rho: f64, theta: f64, t: f64) -> (TermValues, f64) {
        (self.0.eval_terms(rho, theta, t), 0.0)
    }
}

#[derive(Clone)]
struct State {
    grid: Arc<TensorGrid>,
    f1: Field3,
    f2: Field3,
    g1: Field3,
    g2: Field3,
    h: Field2,
}

impl Source for State {
    fn at(&self, rho: f64, theta: f64, t: f64) -> (TermValues, f64) {
        let w = self.grid.weights(rho, theta, t);
        (
            TermValues {
                f1: self.f1.apply(&w),
                f2: self.f2.apply(&w),
                g1: self.g1.apply(&w),
                g2: self.g2.apply(&w),
            },
            self.h.eval(rho, t),
        )
    }
}

/// Terms after a radial step at new coordinates `(mu, theta, t)`, given the
/// old system `src` and the denominator `D = Omega + h`.
fn radial_update(
    src: &dyn Source,
    step: &TransformStep,
    omega: &dyn Fn(f64) -> f64,
    mu: f64,
    theta: f64,
    t: f64,
) -> (TermValues, f64) {
    let (rho, _) = step.inverse(mu, theta, t);
    let [v_rho, v_theta, v_t] = step.gradient(rho, theta, t);
    let (old, h_rho) = src.at(rho, theta, t);
    let (_, h_mu) = src.at(mu, theta, t);
    (
        TermValues {
            f1: v_rho * old.f1 + v_theta * old.g1,
            f2: old.f2 + v_rho * old.f2 + v_theta * old.g2 + v_t,
            g1: old.g1 + (omega(rho) + h_rho) - (omega(mu) + h_mu),
            g2: old.g2,
        },
        h_mu,
    )
}

/// Terms after an angular step at `(rho, phi, t)`.
fn angular_update(
    src: &dyn Source,
    step: &TransformStep,
    rho: f64,
    phi: f64,
    t: f64,
) -> (TermValues, f64) {
    let (_, theta) = step.inverse(rho, phi, t);
    let [v_rho, v_theta, v_t] = step.gradient(rho, theta, t);
    let (old, h) = src.at(rho, theta, t);
    let avg = step.averaged_term(rho, t).unwrap_or(0.0);
    (
        TermValues {
            f1: old.f1,
            f2: old.f2,
            g1: old.g1 * v_theta,
            g2: (old.f1 + old.f2) * v_rho + old.g2 * (1.0 + v_theta) + v_t,
        },
        h + avg,
    )
}

fn resample(grid: &Arc<TensorGrid>, f: impl Fn(f64, f64, f64) -> (TermValues, f64)) -> State {
    let r = grid.res;
    let mut st = State {
        grid: grid.clone(),
        f1: grid.zeros(),
        f2: grid.zeros(),
        g1: grid.zeros(),
        g2: grid.zeros(),
        h: grid.zeros2(),
    };
    for i in 0..r.n_rho {
        let rho = grid.rho_nodes()[i];
        for j in 0..r.n_theta {
            for k in 0..r.n_t {
                let (v, h) = f(rho, grid.theta(j), grid.t(k));
                let idx = grid.index(i, j, k);
                st.f1.data[idx] = v.f1;
                st.f2.data[idx] = v.f2;
                st.g1.data[idx] = v.g1;
                st.g2.data[idx] = v.g2;
                if j == 0 {
                    st.h.data[i * r.n_t + k] = h;
                }
            }
        }
    }
    st
}

fn denominator(st: &State, k: &AAConstants, amplitude: f64) -> Field3 {
    let hb = st.h.broadcast();
    let g = &st.grid;
    let om = g.sample(|rho, _, _| k.frequency(amplitude, rho));
    om.map2(&hb, |a, b| a + b)
}

fn grid_radial(st: &State, k: &AAConstants, amplitude: f64) -> Result<TransformStep> {
    let d = denominator(st, k, amplitude);
    let mean = st.f1.theta_mean().broadcast();
    let v = st.f1.theta_primitive().map2(&d, |p, d| -p / d);
    let v_theta = st.f1.map2(&mean, |f, m| f - m).map2(&d, |f, d| -f / d);
    let gen = GridGenerator {
        v_rho: v.d_rho(),
        v_t: v.d_t(),
        v,
        v_theta,
    };
    grid_step(StepKind::Radial, amplitude, gen, None)
}

fn grid_angular(st: &State, k: &AAConstants, amplitude: f64) -> Result<TransformStep> {
    let d = denominator(st, k, amplitude);
    let avg = st.g1.theta_mean();
    let v = st.g1.theta_primitive().map2(&d, |p, d| -p / d);
    let v_theta = st
        .g1
        .map2(&avg.broadcast(), |g, m| g - m)
        .map2(&d, |g, d| -g / d);
    let gen = GridGenerator {
        v_rho: v.d_rho(),
        v_t: v.d_t(),
        v,
        v_theta,
    };
    grid_step(StepKind::Angular, amplitude, gen, Some(avg))
}

/// The system after all steps:
/// `rho' = F(rho, theta, t)`,
/// `theta' = d A^n rho^(2 beta - 1) + H(rho, t) + G(rho, theta, t)`.
pub struct ComposedSystem {
    pub steps: Vec<TransformStep>,
    pub domains: Vec<DomainRecord>,
    pub amplitude: f64,
    pub k: AAConstants,
    /// `sup |g1|` of the untransformed system on the initial grid.
    pub initial_g1_sup: f64,
    state: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSymmetry {
    /// `max |F(rho, -theta, -t) + F(rho, theta, t)|`.
    pub f: f64,
    /// `max |G(rho, -theta, -t) - G(rho, theta, t)|`.
    pub g: f64,
    /// `max |H(rho, -t) - H(rho, t)|`.
    pub h: f64,
}

impl ComposedSystem {
    pub fn domain(&self) -> (f64, f64) {
        (self.state.grid.lo, self.state.grid.hi)
    }

    pub fn f(&self, rho: f64, theta: f64, t: f64) -> f64 {
        let w = self.state.grid.weights(rho, theta, t);
        self.state.f1.apply(&w) + self.state.f2.apply(&w)
    }

    pub fn h(&self, rho: f64, t: f64) -> f64 {
        self.state.h.eval(rho, t)
    }

    pub fn g(&self, rho: f64, theta: f64, t: f64) -> f64 {
        let w = self.state.grid.weights(rho, theta, t);
        self.state.g1.apply(&w) + self.state.g2.apply(&w)
    }

    /// Final `(f1, f2, g1, g2)` split.
    pub fn terms(&self, rho: f64, theta: f64, t: f64) -> TermValues {
        self.state.at(rho, theta, t).0
    }

    pub fn sup_f(&self) -> f64 {
        self.state.f1.map2(&self.state.f2, |a, b| a + b).sup()
    }

    pub fn sup_g(&self) -> f64 {
        self.state.g1.map2(&self.state.g2, |a, b| a + b).sup()
    }

    pub fn sup_h(&self) -> f64 {
        self.state.h.sup()
    }

    /// `int_0^1 H(rho, t) dt`.
    pub fn h_mean(&self, rho: f64) -> f64 {
        self.state.h.t_mean(rho)
    }

    /// Reflection defects, read off the grid nodes, where the mirror of a
    /// node is again a node.
    pub fn symmetry(&self) -> ChainSymmetry {
        let st = &self.state;
        let r = st.grid.res;
        let mut out = ChainSymmetry {
            f: 0.0,
            g: 0.0,
            h: 0.0,
        };
        for i in 0..r.n_rho {
            for j in 0..r.n_theta {
                let jm = (r.n_theta - j) % r.n_theta;
                for k in 0..r.n_t {
                    let km = (r.n_t - k) % r.n_t;
                    let f = |a: usize, b: usize| st.f1.at(i, a, b) + st.f2.at(i, a, b);
                    let g = |a: usize, b: usize| st.g1.at(i, a, b) + st.g2.at(i, a, b);
                    out.f = out.f.max((f(jm, km) + f(j, k)).abs());
                    out.g = out.g.max((g(jm, km) - g(j, k)).abs());
                    if j == 0 {
                        out.h = out.h.max((st.h.at(i, km) - st.h.at(i, k)).abs());
                    }
                }
            }
        }
        out
    }

    /// Action after all radial steps at `t = 0`; `NaN` outside the
    /// domains of the grid-built steps.
    pub fn normal_action(&self, rho: f64, theta: f64) -> f64 {
        let mut mu = rho;
        for (n, s) in self.steps.iter().enumerate() {
            if s.kind != StepKind::Radial {
                continue;
            }
            if n > 0 && !(mu >= s.domain.0 && mu <= s.domain.1) {
                return f64::NAN;
            }
            mu = s.forward(mu, theta, 0.0).0;
        }
        mu
    }

    /// Action gauge for orbit drift measurements.
    pub fn gauge(self: &Arc<Self>) -> ChainGauge {
        ChainGauge(self.clone())
    }
}

#[derive(Clone)]
pub struct ChainGauge(Arc<ComposedSystem>);

impl ActionGauge for ChainGauge {
    fn action(&self, p: AAPoint) -> f64 {
        self.0.normal_action(p.rho, p.theta)
    }
}

/// Runs `n_radial` radial averaging steps followed by `n_angular` angular
/// ones. The first step is built from the factorized terms, later ones
/// spectrally from the resampled system. Each radial step shrinks the
/// annulus by the measured `sup |V|` on both sides.
pub fn compose_chain(
    pt: &PerturbationTerms,
    n_radial: usize,
    n_angular: usize,
    opts: &ChainOptions,
) -> Result<ComposedSystem> {
    let amplitude = pt.amplitude();
    let k = pt.k;
    let omega = |rho: f64| k.frequency(amplitude, rho);
    let mut grid = TensorGrid::new(opts.domain.inner, opts.domain.outer, opts.resolution);
    let analytic = Analytic(pt);
    let mut state = resample(&grid, |r, th, t| analytic.at(r, th, t));
    let initial_g1_sup = state.g1.sup();
    let mut steps = Vec::new();
    let mut domains = Vec::new();
    let mut fresh = true;
    for _ in 0..n_radial {
        let step = if fresh {
            build_radial_step(
                pt,
                &AnnulusDomain {
                    inner: grid.lo,
                    outer: grid.hi,
                },
            )?
        } else {
            grid_radial(&state, &k, amplitude)?
        };
        let shrink = SHRINK_SAFETY * step.sup_v;
        let (lo, hi) = (grid.lo + shrink, grid.hi - shrink);
        if !(lo < hi) {
            return Err(Error::DomainExhausted {
                steps: steps.len() + 1,
                lo,
                hi,
            });
        }
        domains.push(DomainRecord {
            kind: StepKind::Radial,
            before: (grid.lo, grid.hi),
            after: (lo, hi),
            scaled_margin: amplitude * shrink,
        });
        let next = TensorGrid::new(lo, hi, opts.resolution);
        state = if fresh {
            resample(&next, |m, th, t| {
                radial_update(&analytic, &step, &omega, m, th, t)
            })
        } else {
            let old = state.clone();
            resample(&next, |m, th, t| {
                radial_update(&old, &step, &omega, m, th, t)
            })
        };
        grid = next;
        steps.push(step);
        fresh = false;
    }
    for _ in 0..n_angular {
        let step = if fresh {
            build_angular_step(
                pt,
                &AnnulusDomain {
                    inner: grid.lo,
                    outer: grid.hi,
                },
                None,
            )?
        } else {
            grid_angular(&state, &k, amplitude)?
        };
        domains.push(DomainRecord {
            kind: StepKind::Angular,
            before: (grid.lo, grid.hi),
            after: (grid.lo, grid.hi),
            scaled_margin: 0.0,
        });
        state = if fresh {
            resample(&grid, |r, ph, t| angular_update(&analytic, &step, r, ph, t))
        } else {
            let old = state.clone();
            resample(&grid, |r, ph, t| angular_update(&old, &step, r, ph, t))
        };
        steps.push(step);
        fresh = false;
    }
    Ok(ComposedSystem {
        steps,
        domains,
        amplitude,
        k,
        initial_g1_sup,
        state,
    })
}

/// `f1` after one radial step, at the new coordinates `(mu, theta, t)`.
pub fn f1_after_radial(
    pt: &PerturbationTerms,
    step: &TransformStep,
    mu: f64,
    theta: f64,
    t: f64,
) -> f64 {
    let k = pt.k;
    let a = pt.amplitude();
    radial_update(&Analytic(pt), step, &|r| k.frequency(a, r), mu, theta, t)
        .0
        .f1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientSpec, PeriodicFunction};
    use crate::dynamics::{IntegratorConfig, SystemConfig};
    use crate::special::build_trig;

    fn terms(spec: CoefficientSpec, a: f64) -> PerturbationTerms {
        let trig = Arc::new(build_trig(spec.n, &IntegratorConfig::default()).unwrap());
        PerturbationTerms::new(SystemConfig::rescaled(spec, a).unwrap(), trig).unwrap()
    }

    fn demo() -> CoefficientSpec {
        CoefficientSpec::new(
            2,
            Some(0),
            vec![
                PeriodicFunction::fourier_cosine(vec![0.0, 0.5]).unwrap(),
                PeriodicFunction::fourier_cosine(vec![0.0]).unwrap(),
            ],
            vec![PeriodicFunction::fourier_cosine(vec![0.0, 0.1]).unwrap()],
        )
        .unwrap()
    }

    fn opts(n_rho: usize, n_theta: usize, n_t: usize) -> ChainOptions {
        ChainOptions {
            domain: AnnulusDomain::new(3.5, 10.0).unwrap(),
            resolution: GridResolution {
                n_rho,
                n_theta,
                n_t,
            },
        }
    }

    #[test]
    fn unperturbed_chain_is_identity() {
        let pt = terms(CoefficientSpec::unperturbed(2), 64.0);
        let ch = compose_chain(&pt, 2, 1, &opts(8, 16, 4)).unwrap();
        assert_eq!((ch.sup_f(), ch.sup_g(), ch.sup_h()), (0.0, 0.0, 0.0));
        assert_eq!(ch.domain(), (3.5, 10.0));
        assert_eq!(ch.normal_action(5.0, 0.3), 5.0);
    }

    #[test]
    fn single_step_matches_direct_build() {
        let pt = terms(demo(), 64.0);
        let ch = compose_chain(&pt, 1, 0, &opts(24, 64, 16)).unwrap();
        let direct = build_radial_step(&pt, &opts(4, 4, 4).domain).unwrap();
        assert_eq!(ch.steps[0].v(6.0, 0.3, 0.2), direct.v(6.0, 0.3, 0.2));
        let rec = ch.domains[0];
        assert!((rec.after.0 - rec.before.0 - SHRINK_SAFETY * direct.sup_v).abs() < 1e-15);
        // f1 on the grid against the pointwise update
        for &(m, th, t) in &[(5.0, 0.21, 0.125), (8.0, 0.6, 0.5)] {
            let exact = f1_after_radial(&pt, &direct, m, th, t);
            assert!(
                (ch.terms(m, th, t).f1 - exact).abs() < 1e-6 * ch.sup_f(),
                "{m} {th} {t}"
            );
        }
    }

    #[test]
    fn chain_keeps_parities_and_shrinks_g() {
        let pt = terms(demo(), 64.0);
        let ch = compose_chain(&pt, 1, 2, &opts(16, 64, 16)).unwrap();
        let s = ch.symmetry();
        assert!(s.f < 1e-10 && s.g < 1e-10 && s.h < 1e-10, "{s:?}");
        assert!(ch.sup_g() < ch.initial_g1_sup / 10.0);
        assert!(ch.h_mean(6.0).is_finite());
    }

    #[test]
    fn gauge_is_nan_outside_grid_steps() {
        let pt = terms(demo(), 64.0);
        let ch = Arc::new(compose_chain(&pt, 2, 0, &opts(12, 32, 8)).unwrap());
        assert!(ch.normal_action(3.4, 0.0).is_nan());
        let g = ch.gauge();
        let mu = g.action(AAPoint::new(6.0, 0.1));
        assert!((mu - 6.0).abs() < 0.1);
    }
}
