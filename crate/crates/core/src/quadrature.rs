//! Quadrature rules shared by the period computation and the averaging
//! generators.

use std::f64::consts::{FRAC_PI_2, PI};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]` with this single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let hi = if p + 1 == panels { b } else { lo + h };
            acc += self.integrate(lo, hi, &mut f);
        }
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive Gauss-Legendre quadrature: each panel is compared against its
/// two halves and bisected until they agree to `tol` (absolute).
pub fn adaptive_gauss<F: FnMut(f64) -> f64>(a: f64, b: f64, tol: f64, mut f: F) -> f64 {
    thread_local! {
        static RULE: GaussLegendre = GaussLegendre::new(10);
    }
    RULE.with(|rule| {
        let whole = rule.integrate(a, b, &mut f);
        adaptive_rec(rule, a, b, whole, tol, 40, &mut f)
    })
}

fn adaptive_rec<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    f: &mut F,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, &mut *f);
    let right = rule.integrate(mid, b, &mut *f);
    let both = left + right;
    if depth == 0 || (both - whole).abs() <= tol {
        return both;
    }
    adaptive_rec(rule, a, mid, left, 0.5 * tol, depth - 1, f)
        + adaptive_rec(rule, mid, b, right, 0.5 * tol, depth - 1, f)
}

/// Double-exponential (tanh-sinh) quadrature on `[0, 1]` for integrands with
/// endpoint singularities. The integrand receives both `u` and the complement
/// `1 - u`, the latter computed without cancellation near `u = 1`.
pub fn tanh_sinh_unit<F: FnMut(f64, f64) -> f64>(tol: f64, mut f: F) -> f64 {
    // u = (1 + tanh(pi/2 sinh s)) / 2, so 1 - u = 1 / (1 + exp(pi sinh s)).
    let node = |s: f64| -> (f64, f64, f64) {
        let q = FRAC_PI_2 * s.sinh();
        let e = (2.0 * q).exp();
        // u = e/(1+e), 1-u = 1/(1+e); computed symmetrically to keep accuracy
        let (u, v) = if q >= 0.0 {
            let ei = (-2.0 * q).exp();
            (1.0 / (1.0 + ei), ei / (1.0 + ei))
        } else {
            (e / (1.0 + e), 1.0 / (1.0 + e))
        };
        let w = 0.5 * FRAC_PI_2 * s.cosh() / (q.cosh() * q.cosh());
        (u, v, w)
    };
    let mut h = 0.5;
    let s_max = 4.5;
    let mut total = {
        let (u, v, w) = node(0.0);
        w * f(u, v)
    };
    let mut k = 1;
    loop {
        let s = k as f64 * h;
        if s > s_max {
            break;
        }
        for &ss in &[s, -s] {
            let (u, v, w) = node(ss);
            if u > 0.0 && v > 0.0 {
                total += w * f(u, v);
            }
        }
        k += 1;
    }
    let mut estimate = total * h;
    for _level in 0..12 {
        h *= 0.5;
        let mut k = 1;
        let mut add = 0.0;
        loop {
            let s = k as f64 * h;
            if s > s_max {
                break;
            }
            for &ss in &[s, -s] {
                let (u, v, w) = node(ss);
                if u > 0.0 && v > 0.0 {
                    add += w * f(u, v);
                }
            }
            k += 2;
        }
        total += add;
        let next = total * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= tol * estimate.abs().max(1.0) * 1e-2 {
            break;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(8);
        // exact up to degree 15
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(15) - 3.0 * x.powi(4) + 1.0);
        let exact = (2f64.powi(16) - 1.0) / 16.0 - 3.0 * (32.0 + 1.0) / 5.0 + 3.0;
        assert!((v - exact).abs() < 1e-10 * exact.abs(), "{v} vs {exact}");
        let wsum: f64 = rule.weights.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_oscillatory_integrand() {
        let v = adaptive_gauss(0.0, 10.0, 1e-13, |x| (3.0 * x).sin());
        let exact = (1.0 - (30.0f64).cos()) / 3.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_integrates_endpoint_singularity() {
        // int_0^1 (1-u)^{-1/2} du = 2
        let v = tanh_sinh_unit(1e-14, |_u, c| c.powf(-0.5));
        assert!((v - 2.0).abs() < 1e-12, "{v}");
        // int_0^1 u^{-1/2} du = 2
        let v = tanh_sinh_unit(1e-14, |u, _c| u.powf(-0.5));
        assert!((v - 2.0).abs() < 1e-12, "{v}");
    }
}
