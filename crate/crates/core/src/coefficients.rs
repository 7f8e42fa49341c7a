//! Even, 1-periodic coefficient functions and the structural data `(n, l)`.
//!
//! Evenness is structural: every evaluation folds `|t|` onto `[0, 1/2]`
//! before touching the representation, so `f(-t)` and `f(t)` go through
//! bit-identical arithmetic.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularity {
    C1,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `c0 + sum_k c_k cos(2 pi k t)`.
    FourierCosine,
    /// Piecewise-linear interpolation of samples on a uniform grid of
    /// `[0, 1/2]`, mirrored to `[1/2, 1]`.
    SampledLinear,
    /// `sum_k s_k sin(2 pi k t)`: an odd coefficient that breaks reversibility.
    /// Parses, but validation rejects it.
    FourierSine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PeriodicFunctionDoc", into = "PeriodicFunctionDoc")]
pub struct PeriodicFunction {
    mode: Mode,
    values: Vec<f64>,
    regularity: Regularity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PeriodicFunctionDoc {
    mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regularity: Option<Regularity>,
}

impl TryFrom<PeriodicFunctionDoc> for PeriodicFunction {
    type Error = String;

    fn try_from(doc: PeriodicFunctionDoc) -> std::result::Result<Self, String> {
        match doc.mode {
            Mode::FourierCosine | Mode::FourierSine => {
                if doc.samples.is_some() {
                    return Err("fourier modes take `coeffs`, not `samples`".into());
                }
                if doc.regularity == Some(Regularity::L1) {
                    return Err("fourier modes are always C1".into());
                }
                let coeffs = doc.coeffs.ok_or("missing `coeffs`")?;
                check_values(&coeffs, 1)?;
                Ok(PeriodicFunction {
                    mode: doc.mode,
                    values: coeffs,
                    regularity: Regularity::C1,
                })
            }
            Mode::SampledLinear => {
                if doc.coeffs.is_some() {
                    return Err("sampled-linear mode takes `samples`, not `coeffs`".into());
                }
                let samples = doc.samples.ok_or("missing `samples`")?;
                check_values(&samples, 2)?;
                Ok(PeriodicFunction {
                    mode: Mode::SampledLinear,
                    values: samples,
                    regularity: doc.regularity.unwrap_or(Regularity::C1),
                })
            }
        }
    }
}

impl From<PeriodicFunction> for PeriodicFunctionDoc {
    fn from(f: PeriodicFunction) -> Self {
        let (coeffs, samples) = match f.mode {
            Mode::SampledLinear => (None, Some(f.values)),
            _ => (Some(f.values), None),
        };
        PeriodicFunctionDoc {
            mode: f.mode,
            coeffs,
            samples,
            regularity: Some(f.regularity),
        }
    }
}

fn check_values(v: &[f64], min_len: usize) -> std::result::Result<(), String> {
    if v.len() < min_len {
        return Err(format!("need at least {min_len} values, got {}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(())
}

/// Folds `|t|` onto `[0, 1/2]`. Returns the folded point and whether the
/// reflection `u -> 1 - u` was applied.
#[inline]
fn fold(t: f64) -> (f64, bool) {
    let a = t.abs();
    let u = a - a.floor();
    if u > 0.5 {
        (1.0 - u, true)
    } else {
        (u, false)
    }
}

impl PeriodicFunction {
    pub fn fourier_cosine(coeffs: Vec<f64>) -> Result<Self> {
        PeriodicFunctionDoc {
            mode: Mode::FourierCosine,
            coeffs: Some(coeffs),
            samples: None,
            regularity: None,
        }
        .try_into()
        .map_err(Error::InvalidParameter)
    }

    pub fn sampled_linear(samples: Vec<f64>, regularity: Regularity) -> Result<Self> {
        PeriodicFunctionDoc {
            mode: Mode::SampledLinear,
            coeffs: None,
            samples: Some(samples),
            regularity: Some(regularity),
        }
        .try_into()
        .map_err(Error::InvalidParameter)
    }

    /// Odd sine series. Exists to exercise symmetry-violation detection.
    pub fn fourier_sine_unchecked(coeffs: Vec<f64>) -> Self {
        PeriodicFunction {
            mode: Mode::FourierSine,
            values: coeffs,
            regularity: Regularity::C1,
        }
    }

    pub fn zero() -> Self {
        PeriodicFunction {
            mode: Mode::FourierCosine,
            values: vec![0.0],
            regularity: Regularity::C1,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Returns a copy multiplied by `s` (same mode and tag).
    pub fn scaled(&self, s: f64) -> Self {
        PeriodicFunction {
            mode: self.mode,
            values: self.values.iter().map(|v| v * s).collect(),
            regularity: self.regularity,
        }
    }

    /// Spacing of the sampled grid in `t`, if any. Integrators stop at these
    /// knots because the slope jumps there.
    pub fn knot_spacing(&self) -> Option<f64> {
        match self.mode {
            Mode::SampledLinear => Some(0.5 / (self.values.len() - 1) as f64),
            _ => None,
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        match self.mode {
            Mode::FourierCosine => {
                let (w, _) = fold(t);
                cosine_series(&self.values, w)
            }
            Mode::SampledLinear => {
                let (w, _) = fold(t);
                let m = self.values.len() - 1;
                let x = w * 2.0 * m as f64;
                let j = (x.floor() as usize).min(m - 1);
                let s = x - j as f64;
                self.values[j] + s * (self.values[j + 1] - self.values[j])
            }
            Mode::FourierSine => {
                let (w, flip) = fold(t);
                let v = sine_series(&self.values, w);
                let v = if flip { -v } else { v };
                if t < 0.0 {
                    -v
                } else {
                    v
                }
            }
        }
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        let sign = if t < 0.0 { -1.0 } else { 1.0 };
        let (w, flip) = fold(t);
        let fsign = if flip { -sign } else { sign };
        match self.mode {
            Mode::FourierCosine => {
                let mut acc = 0.0;
                let (mut s_prev, mut s_cur) = (0.0, (2.0 * PI * w).sin());
                let c1 = (2.0 * PI * w).cos();
                for (k, &ck) in self.values.iter().enumerate().skip(1) {
                    // s_cur = sin(2 pi k w)
                    acc -= 2.0 * PI * k as f64 * ck * s_cur;
                    let next = 2.0 * c1 * s_cur - s_prev;
                    s_prev = s_cur;
                    s_cur = next;
                }
                Ok(fsign * acc)
            }
            Mode::SampledLinear => {
                if self.regularity == Regularity::L1 {
                    return Err(Error::RegularityViolation);
                }
                let m = self.values.len() - 1;
                let h = 0.5 / m as f64;
                let slope = |j: usize| (self.values[j + 1] - self.values[j]) / h;
                let x = w * 2.0 * m as f64;
                let j = x.floor();
                let d = if x == j {
                    // knot: mean of the one-sided slopes, using the mirror image
                    // beyond either end of [0, 1/2]
                    let j = j as usize;
                    let right = if j < m { slope(j) } else { -slope(m - 1) };
                    let left = if j > 0 { slope(j - 1) } else { -slope(0) };
                    0.5 * (left + right)
                } else {
                    slope((j as usize).min(m - 1))
                };
                Ok(fsign * d)
            }
            Mode::FourierSine => {
                let c1 = (2.0 * PI * w).cos();
                let (mut c_prev, mut c_cur) = (1.0, c1);
                let mut acc = 0.0;
                for (k, &sk) in self.values.iter().enumerate().skip(1) {
                    acc += 2.0 * PI * k as f64 * sk * c_cur;
                    let next = 2.0 * c1 * c_cur - c_prev;
                    c_prev = c_cur;
                    c_cur = next;
                }
                // derivative of an odd function is even
                Ok(acc)
            }
        }
    }
}

/// `sum_k c_k cos(2 pi k w)` by the Chebyshev recurrence on `cos(2 pi w)`.
#[inline]
fn cosine_series(c: &[f64], w: f64) -> f64 {
    if c.len() == 1 {
        return c[0];
    }
    let x = (2.0 * PI * w).cos();
    // Clenshaw
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c[1..].iter().rev() {
        let b0 = ck + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + x * b1 - b2
}

#[inline]
fn sine_series(s: &[f64], w: f64) -> f64 {
    let th = 2.0 * PI * w;
    s.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &v)| v * (k as f64 * th).sin())
        .sum()
}

/// Equation data. `a` holds `a_0..a_{n-1}`; `b` holds `b_0..b_l` when
/// damping is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<i64>,
    #[serde(default)]
    pub a: Vec<PeriodicFunction>,
    #[serde(default)]
    pub b: Vec<PeriodicFunction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    ACount { expected: usize, found: usize },
    BCount { expected: usize, found: usize },
    DampingBound { l: i64, max: i64 },
    DampingNeedsN2 { n: u32 },
    Regularity { family: char, index: usize },
    Parity { family: char, index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ACount { expected, found } => {
                write!(f, "expected {expected} a-coefficients, found {found}")
            }
            Violation::BCount { expected, found } => {
                write!(f, "expected {expected} b-coefficients, found {found}")
            }
            Violation::DampingBound { l, max } => write!(
                f,
                "l = {l} outside 0..={max} (l must satisfy 0 <= l <= floor(n/2) - 1)"
            ),
            Violation::DampingNeedsN2 { n } => write!(f, "damping terms need n >= 2 (n = {n})"),
            Violation::Regularity { family, index } => {
                write!(
                    f,
                    "{family}[{index}] is tagged L1 but this index requires C1"
                )
            }
            Violation::Parity { family, index } => write!(f, "{family}[{index}] is not even in t"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            return write!(f, "pass");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl CoefficientSpec {
    /// Builds and validates a spec.
    pub fn new(
        n: u32,
        l: Option<i64>,
        a: Vec<PeriodicFunction>,
        b: Vec<PeriodicFunction>,
    ) -> Result<Self> {
        let spec = Self { n, l, a, b };
        let report = validate_spec(&spec);
        if report.is_pass() {
            Ok(spec)
        } else {
            Err(Error::InvalidSpec(report))
        }
    }

    /// Builds a spec without validation (for symmetry-breaking experiments).
    pub fn unchecked(
        n: u32,
        l: Option<i64>,
        a: Vec<PeriodicFunction>,
        b: Vec<PeriodicFunction>,
    ) -> Self {
        Self { n, l, a, b }
    }

    /// Unperturbed equation `x'' + x^(2n+1) = 0`.
    pub fn unperturbed(n: u32) -> Self {
        Self {
            n,
            l: None,
            a: vec![PeriodicFunction::zero(); n as usize],
            b: Vec::new(),
        }
    }

    /// Parses JSON text (no validation; see [`validate_spec`]).
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// First a-index that must be C1: `floor((n-1)/2) + 1`.
    pub fn split_index(&self) -> usize {
        split_index(self.n)
    }

    /// Same spec with every coefficient multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            l: self.l,
            a: self.a.iter().map(|f| f.scaled(s)).collect(),
            b: self.b.iter().map(|f| f.scaled(s)).collect(),
        }
    }

    pub fn is_unperturbed(&self) -> bool {
        self.a.iter().chain(&self.b).all(PeriodicFunction::is_zero)
    }

    /// Smallest knot spacing among sampled coefficients.
    pub fn knot_spacing(&self) -> Option<f64> {
        self.a
            .iter()
            .chain(&self.b)
            .filter(|f| !f.is_zero())
            .filter_map(PeriodicFunction::knot_spacing)
            .reduce(f64::min)
    }

    /// Canonical JSON (sorted keys, every optional field explicit).
    pub fn canonical_json(&self) -> serde_json::Value {
        // serde_json's default map is ordered by key
        serde_json::to_value(self).expect("coefficient spec is always serializable")
    }
}

pub(crate) fn split_index(n: u32) -> usize {
    if n == 0 {
        0
    } else {
        ((n as usize) - 1) / 2 + 1
    }
}

/// Checks the hypotheses on `(n, l, a, b)`. Every failure is collected, not
/// just the first; the damping bound is `0 <= l <= floor(n/2) - 1`.
pub fn validate_spec(spec: &CoefficientSpec) -> ValidationReport {
    let mut v = Vec::new();
    let n = spec.n as usize;
    if spec.a.len() != n {
        v.push(Violation::ACount {
            expected: n,
            found: spec.a.len(),
        });
    }
    match spec.l {
        None => {
            if !spec.b.is_empty() {
                v.push(Violation::BCount {
                    expected: 0,
                    found: spec.b.len(),
                });
            }
        }
        Some(l) => {
            if spec.n < 2 {
                v.push(Violation::DampingNeedsN2 { n: spec.n });
            } else {
                let max = (spec.n / 2) as i64 - 1;
                if l < 0 || l > max {
                    v.push(Violation::DampingBound { l, max });
                }
            }
            let expected = if l >= 0 { l as usize + 1 } else { 0 };
            if spec.b.len() != expected {
                v.push(Violation::BCount {
                    expected,
                    found: spec.b.len(),
                });
            }
        }
    }
    let split = spec.split_index();
    for (i, f) in spec.a.iter().enumerate() {
        if i >= split && f.regularity() == Regularity::L1 {
            v.push(Violation::Regularity {
                family: 'a',
                index: i,
            });
        }
        if f.mode() == Mode::FourierSine && !f.is_zero() {
            v.push(Violation::Parity {
                family: 'a',
                index: i,
            });
        }
    }
    for (i, f) in spec.b.iter().enumerate() {
        if f.regularity() == Regularity::L1 {
            v.push(Violation::Regularity {
                family: 'b',
                index: i,
            });
        }
        if f.mode() == Mode::FourierSine && !f.is_zero() {
            v.push(Violation::Parity {
                family: 'b',
                index: i,
            });
        }
    }
    ValidationReport { violations: v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cos1() -> PeriodicFunction {
        PeriodicFunction::fourier_cosine(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(cos1().evaluate(0.0), 1.0);
        assert!(cos1().evaluate(0.25).abs() < 1e-15);
        let s = PeriodicFunction::sampled_linear(vec![1.0, 0.0], Regularity::C1).unwrap();
        assert_eq!(s.evaluate(0.25), 0.5);
        assert_eq!(s.evaluate(0.75), 0.5);
        assert_eq!(s.evaluate(1.0), 1.0);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(cos1().derivative(0.0).unwrap(), 0.0);
        assert!((cos1().derivative(0.25).unwrap() + 2.0 * PI).abs() < 1e-13);
        let f = PeriodicFunction::fourier_cosine(vec![0.0, 0.0, 3.0]).unwrap();
        assert!((f.derivative(0.125).unwrap() + 12.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn l1_sampled_derivative_is_refused() {
        let s = PeriodicFunction::sampled_linear(vec![5.0, 0.0, 1.0], Regularity::L1).unwrap();
        assert!(matches!(s.derivative(0.1), Err(Error::RegularityViolation)));
    }

    #[test]
    fn sampled_derivative_is_odd_and_vanishes_at_symmetry_points() {
        let s =
            PeriodicFunction::sampled_linear(vec![1.0, 0.3, -0.2, 0.4], Regularity::C1).unwrap();
        assert_eq!(s.derivative(0.0).unwrap(), 0.0);
        assert_eq!(s.derivative(0.5).unwrap(), 0.0);
        for &t in &[0.05, 0.2, 1.0 / 6.0, 0.4, 0.7, 1.3] {
            assert_eq!(s.derivative(-t).unwrap(), -s.derivative(t).unwrap());
        }
        // inside the first segment the slope is (0.3 - 1) / (1/6)
        assert!((s.derivative(0.05).unwrap() + 4.2).abs() < 1e-12);
    }

    #[test]
    fn derivative_converges_at_second_order() {
        let f = PeriodicFunction::fourier_cosine(vec![0.2, 0.5, -0.3, 0.1]).unwrap();
        let t = 0.137;
        let exact = f.derivative(t).unwrap();
        let err = |h: f64| ((f.evaluate(t + h) - f.evaluate(t - h)) / (2.0 * h) - exact).abs();
        let order = (err(1e-3) / err(5e-4)).log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn validation_examples() {
        let c1 = || PeriodicFunction::fourier_cosine(vec![0.0, 0.5]).unwrap();
        let ok = CoefficientSpec::unchecked(2, Some(0), vec![c1(), c1()], vec![c1()]);
        assert!(validate_spec(&ok).is_pass());

        let bad_l = CoefficientSpec::unchecked(2, Some(1), vec![c1(), c1()], vec![c1(), c1()]);
        let r = validate_spec(&bad_l);
        assert_eq!(r.violations, vec![Violation::DampingBound { l: 1, max: 0 }]);

        let l1 = PeriodicFunction::sampled_linear(vec![1.0, 2.0], Regularity::L1).unwrap();
        let bad_reg = CoefficientSpec::unchecked(3, None, vec![c1(), c1(), l1.clone()], vec![]);
        assert_eq!(
            validate_spec(&bad_reg).violations,
            vec![Violation::Regularity {
                family: 'a',
                index: 2
            }]
        );
        let fine_reg = CoefficientSpec::unchecked(3, None, vec![c1(), l1, c1()], vec![]);
        assert!(validate_spec(&fine_reg).is_pass());
    }

    #[test]
    fn odd_coefficient_fails_parity() {
        let spec = CoefficientSpec::unchecked(
            2,
            None,
            vec![
                PeriodicFunction::fourier_sine_unchecked(vec![0.0, 1.0]),
                PeriodicFunction::zero(),
            ],
            vec![],
        );
        assert_eq!(
            validate_spec(&spec).violations,
            vec![Violation::Parity {
                family: 'a',
                index: 0
            }]
        );
    }

    #[test]
    fn json_roundtrip_and_rejections() {
        let text = r#"{"n":2,"l":0,"a":[{"mode":"fourier-cosine","coeffs":[0,0.5]},
            {"mode":"sampled-linear","samples":[1,0,2],"regularity":"L1"}],
            "b":[{"mode":"fourier-cosine","coeffs":[0,0.1]}]}"#;
        let spec = CoefficientSpec::from_json(text).unwrap();
        assert_eq!(spec.a[1].regularity(), Regularity::L1);
        let again: CoefficientSpec = serde_json::from_value(spec.canonical_json()).unwrap();
        assert_eq!(again, spec);
        assert!(CoefficientSpec::from_json(
            r#"{"n":1,"a":[{"mode":"fourier-cosine","coeffs":[1],"regularity":"L1"}]}"#
        )
        .is_err());
        assert!(CoefficientSpec::from_json(
            r#"{"n":1,"a":[{"mode":"sampled-linear","samples":[1]}]}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn evenness_is_bit_exact(t in -50.0f64..50.0, c in proptest::collection::vec(-2.0f64..2.0, 1..6)) {
            let f = PeriodicFunction::fourier_cosine(c).unwrap();
            prop_assert_eq!(f.evaluate(-t).to_bits(), f.evaluate(t).to_bits());
            let s = PeriodicFunction::sampled_linear(vec![0.3, -1.0, 2.0, 0.5], Regularity::L1).unwrap();
            prop_assert_eq!(s.evaluate(-t).to_bits(), s.evaluate(t).to_bits());
        }

        #[test]
        fn unit_period(t in -20.0f64..20.0) {
            let f = PeriodicFunction::fourier_cosine(vec![0.1, 0.7, -0.4]).unwrap();
            let (a, b) = (f.evaluate(t + 1.0), f.evaluate(t));
            prop_assert!((a - b).abs() <= 64.0 * f64::EPSILON * (1.0 + t.abs()));
        }
    }
}
