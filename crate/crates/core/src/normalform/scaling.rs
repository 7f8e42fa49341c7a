use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::chain::f1_after_radial;
use super::step::build_radial_step;
use super::terms::{AnnulusDomain, PerturbationTerms};
use crate::coefficients::CoefficientSpec;
use crate::dynamics::{IntegratorConfig, SystemConfig};
use crate::poincare::{twist_deviation_sup, PoincareMap};
use crate::special::GeneralizedTrig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingTerm {
    V1,
    F1,
    F2,
    G1,
    G2,
    /// `f1` after one radial averaging step.
    F1Averaged,
    Xi,
    Eta,
}

impl ScalingTerm {
    /// Expected exponent `Gamma` in `sup = O(A^Gamma)`.
    pub fn expected_exponent(&self, n: u32) -> f64 {
        let n = n as f64;
        match self {
            ScalingTerm::V1
            | ScalingTerm::F2
            | ScalingTerm::G2
            | ScalingTerm::Xi
            | ScalingTerm::Eta => -1.0,
            ScalingTerm::F1 | ScalingTerm::G1 => n - 1.0,
            ScalingTerm::F1Averaged => n - 2.0,
        }
    }
}

impl std::str::FromStr for ScalingTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "v1" => ScalingTerm::V1,
            "f1" => ScalingTerm::F1,
            "f2" => ScalingTerm::F2,
            "g1" => ScalingTerm::G1,
            "g2" => ScalingTerm::G2,
            "f1-averaged" => ScalingTerm::F1Averaged,
            "xi" => ScalingTerm::Xi,
            "eta" => ScalingTerm::Eta,
            other => return Err(Error::InvalidParameter(format!("unknown term '{other}'"))),
        })
    }
}

/// Sample counts of the sup-norm grid. For `Xi`/`Eta` only `n_rho` (as
/// `lambda` samples) and `n_theta` are used; the map runs from `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingGrid {
    pub n_rho: usize,
    pub n_theta: usize,
    pub n_t: usize,
}

impl Default for ScalingGrid {
    fn default() -> Self {
        Self {
            n_rho: 16,
            n_theta: 64,
            n_t: 16,
        }
    }
}

impl ScalingGrid {
    /// Grid for `Xi`/`Eta`. The phase advance `d A^n lambda` sweeps many
    /// turns across the band, so the sup needs dense `lambda` sampling more
    /// than dense `theta` sampling.
    pub fn twist() -> Self {
        Self {
            n_rho: 32,
            n_theta: 8,
            n_t: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScalingReport {
    pub term: ScalingTerm,
    pub gamma_expected: f64,
    pub a_values: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub fitted_slope: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
}

impl OrderScalingReport {
    pub fn within(&self, tol: f64) -> bool {
        (self.fitted_slope - self.gamma_expected).abs() <= tol
    }
}

/// Least-squares slope and RMS residual of `ln y` against `ln x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (slope, (ss / n).sqrt())
}

/// What `order_scaling` needs to rebuild the system at each `A`.
pub struct ScalingFamily {
    pub spec: CoefficientSpec,
    pub trig: Arc<GeneralizedTrig>,
    /// Integrator for the `Xi`/`Eta` time-1 maps.
    pub icfg: IntegratorConfig,
    /// `lambda` interval for `Xi`/`Eta`.
    pub lambda_range: (f64, f64),
}

fn grid_sup(dom: &AnnulusDomain, g: &ScalingGrid, mut f: impl FnMut(f64, f64, f64) -> f64) -> f64 {
    let mut sup = 0.0f64;
    for i in 0..g.n_rho {
        let rho = dom.inner + (dom.outer - dom.inner) * i as f64 / (g.n_rho - 1).max(1) as f64;
        for j in 0..g.n_theta {
            let th = (j as f64 + 0.5) / g.n_theta as f64;
            for k in 0..g.n_t {
                sup = sup.max(f(rho, th, k as f64 / g.n_t as f64).abs());
            }
        }
    }
    sup
}

fn check_a_values(a_values: &[f64]) -> Result<()> {
    if a_values.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "{} values of A, at least 4 needed",
            a_values.len()
        )));
    }
    if a_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "A values must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Sup-norm of `term` over `domain x T^1 x T^1` for each `A`, and the
/// fitted log-log slope.
pub fn order_scaling(
    family: &ScalingFamily,
    term: ScalingTerm,
    domain: &AnnulusDomain,
    a_values: &[f64],
    grid: &ScalingGrid,
) -> Result<OrderScalingReport> {
    check_a_values(a_values)?;
    let mut sups = Vec::with_capacity(a_values.len());
    for &a in a_values {
        let cfg = SystemConfig::rescaled(family.spec.clone(), a)?;
        let sup = match term {
            ScalingTerm::Xi | ScalingTerm::Eta => {
                let map = PoincareMap::new(cfg, family.trig.clone(), family.icfg)?;
                let k = *map.constants();
                let (xi, eta) = twist_deviation_sup(
                    &map,
                    &k,
                    a,
                    family.lambda_range,
                    grid.n_rho,
                    grid.n_theta,
                )?;
                if term == ScalingTerm::Xi {
                    xi
                } else {
                    eta
                }
            }
            _ => {
                let pt = PerturbationTerms::new(cfg, family.trig.clone())?;
                match term {
                    ScalingTerm::F1 => {
                        grid_sup(domain, grid, |r, th, t| pt.eval_terms(r, th, t).f1)
                    }
                    ScalingTerm::F2 => {
                        grid_sup(domain, grid, |r, th, t| pt.eval_terms(r, th, t).f2)
                    }
                    ScalingTerm::G1 => {
                        grid_sup(domain, grid, |r, th, t| pt.eval_terms(r, th, t).g1)
                    }
                    ScalingTerm::G2 => {
                        grid_sup(domain, grid, |r, th, t| pt.eval_terms(r, th, t).g2)
                    }
                    ScalingTerm::V1 => {
                        let step = build_radial_step(&pt, domain)?;
                        grid_sup(domain, grid, |r, th, t| step.v(r, th, t))
                    }
                    ScalingTerm::F1Averaged => {
                        let step = build_radial_step(&pt, domain)?;
                        // new coordinates covered by the image of the annulus
                        let shrink = 1.1 * step.sup_v;
                        let inner =
                            AnnulusDomain::new(domain.inner + shrink, domain.outer - shrink)?;
                        grid_sup(&inner, grid, |m, th, t| {
                            f1_after_radial(&pt, &step, m, th, t)
                        })
                    }
                    ScalingTerm::Xi | ScalingTerm::Eta => unreachable!(),
                }
            }
        };
        if !(sup > 0.0 && sup.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sup of {term:?} is {sup} at A = {a}; the term vanishes for this spec"
            )));
        }
        sups.push(sup);
    }
    let (slope, residual) = loglog_fit(a_values, &sups);
    Ok(OrderScalingReport {
        term,
        gamma_expected: term.expected_exponent(family.spec.n),
        a_values: a_values.to_vec(),
        sup_norms: sups,
        fitted_slope: slope,
        residual,
    })
}

/// `Xi` and `Eta` together from one set of time-1 map evaluations per `A`.
pub fn twist_scaling(
    family: &ScalingFamily,
    a_values: &[f64],
    grid: &ScalingGrid,
) -> Result<[OrderScalingReport; 2]> {
    check_a_values(a_values)?;
    let (mut xs, mut es) = (Vec::new(), Vec::new());
    for &a in a_values {
        let cfg = SystemConfig::rescaled(family.spec.clone(), a)?;
        let map = PoincareMap::new(cfg, family.trig.clone(), family.icfg)?;
        let k = *map.constants();
        let (xi, eta) =
            twist_deviation_sup(&map, &k, a, family.lambda_range, grid.n_rho, grid.n_theta)?;
        xs.push(xi);
        es.push(eta);
    }
    let report = |term: ScalingTerm, sups: Vec<f64>| {
        let (slope, residual) = loglog_fit(a_values, &sups);
        OrderScalingReport {
            term,
            gamma_expected: term.expected_exponent(family.spec.n),
            a_values: a_values.to_vec(),
            sup_norms: sups,
            fitted_slope: slope,
            residual,
        }
    };
    Ok([report(ScalingTerm::Xi, xs), report(ScalingTerm::Eta, es)])
}
