//! Tensor grids on `[lo, hi] x T^1 x T^1`: Chebyshev-Lobatto in `rho`,
//! uniform in `theta` and `t`, with the spectral operations the averaging
//! chain needs.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridResolution {
    pub n_rho: usize,
    pub n_theta: usize,
    pub n_t: usize,
}

impl Default for GridResolution {
    fn default() -> Self {
        Self {
            n_rho: 32,
            n_theta: 128,
            n_t: 32,
        }
    }
}

pub struct TensorGrid {
    pub lo: f64,
    pub hi: f64,
    pub res: GridResolution,
    rho: Vec<f64>,
    bary: Vec<f64>,
    /// Chebyshev differentiation matrix in `rho`, row-major.
    diff: Vec<f64>,
    fft_theta: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    fft_t: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
}

impl std::fmt::Debug for TensorGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TensorGrid")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("res", &self.res)
            .finish()
    }
}

/// Interpolation weights of one point; `None` marks an exact node hit.
pub struct Weights {
    rho: Result<Vec<f64>, usize>,
    theta: Result<Vec<f64>, usize>,
    t: Result<Vec<f64>, usize>,
}

fn node_hit(x: f64, n: usize) -> Option<usize> {
    let s = x * n as f64;
    let r = s.round();
    ((s - r).abs() <= 1e-12).then(|| (r as i64).rem_euclid(n as i64) as usize)
}

/// Periodic interpolation kernel on `n` (even) uniform nodes of `[0, 1)`.
fn trig_weights(x: f64, n: usize) -> Result<Vec<f64>, usize> {
    if let Some(j) = node_hit(x, n) {
        return Err(j);
    }
    let nf = n as f64;
    // sin(n pi x) from the offset to the nearest node keeps full relative
    // accuracy close to a node
    let j0 = (x * nf).round();
    let delta = x - j0 / nf;
    let s0 = (nf * PI * delta).sin();
    let s = if (j0 as i64) % 2 == 0 { s0 } else { -s0 };
    Ok((0..n)
        .map(|j| {
            let u = x - j as f64 / nf;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * s / (nf * (PI * u).tan())
        })
        .collect())
}

impl TensorGrid {
    pub fn new(lo: f64, hi: f64, res: GridResolution) -> Arc<Self> {
        assert!(
            res.n_rho >= 2 && res.n_theta.is_multiple_of(2) && res.n_t.is_multiple_of(2) && hi > lo
        );
        let m = res.n_rho - 1;
        let xs: Vec<f64> = (0..=m).map(|i| (PI * i as f64 / m as f64).cos()).collect();
        // x = 1 maps to lo
        let rho: Vec<f64> = xs
            .iter()
            .map(|x| lo + (hi - lo) * (1.0 - x) / 2.0)
            .collect();
        let bary: Vec<f64> = (0..=m)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                if i == 0 || i == m {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let np = m + 1;
        let cw = |i: usize| if i == 0 || i == m { 2.0 } else { 1.0 };
        let mut diff = vec![0.0; np * np];
        for i in 0..np {
            let mut row = 0.0;
            for j in 0..np {
                if i != j {
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    let d = cw(i) / cw(j) * sign / (xs[i] - xs[j]);
                    diff[i * np + j] = d;
                    row += d;
                }
            }
            diff[i * np + i] = -row;
        }
        // d/drho = -2/(hi - lo) d/dx
        let scale = -2.0 / (hi - lo);
        diff.iter_mut().for_each(|d| *d *= scale);
        let mut planner = FftPlanner::new();
        let fft_theta = (
            planner.plan_fft_forward(res.n_theta),
            planner.plan_fft_inverse(res.n_theta),
        );
        let fft_t = (
            planner.plan_fft_forward(res.n_t),
            planner.plan_fft_inverse(res.n_t),
        );
        Arc::new(Self {
            lo,
            hi,
            res,
            rho,
            bary,
            diff,
            fft_theta,
            fft_t,
        })
    }

    pub fn rho_nodes(&self) -> &[f64] {
        &self.rho
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 / self.res.n_theta as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 / self.res.n_t as f64
    }

    pub fn len(&self) -> usize {
        self.res.n_rho * self.res.n_theta * self.res.n_t
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.res.n_theta + j) * self.res.n_t + k
    }

    fn rho_weights(&self, rho: f64) -> Result<Vec<f64>, usize> {
        let mut w = Vec::with_capacity(self.rho.len());
        let mut sum = 0.0;
        for (i, (&r, &b)) in self.rho.iter().zip(&self.bary).enumerate() {
            let d = rho - r;
            if d == 0.0 {
                return Err(i);
            }
            let v = b / d;
            w.push(v);
            sum += v;
        }
        w.iter_mut().for_each(|v| *v /= sum);
        Ok(w)
    }

    pub fn weights(&self, rho: f64, theta: f64, t: f64) -> Weights {
        Weights {
            rho: self.rho_weights(rho),
            theta: trig_weights(theta.rem_euclid(1.0), self.res.n_theta),
            t: trig_weights(t.rem_euclid(1.0), self.res.n_t),
        }
    }

    /// Grid of values `f(rho_i, theta_j, t_k)`.
    pub fn sample<F: FnMut(f64, f64, f64) -> f64>(self: &Arc<Self>, mut f: F) -> Field3 {
        let mut data = Vec::with_capacity(self.len());
        for i in 0..self.res.n_rho {
            for j in 0..self.res.n_theta {
                for k in 0..self.res.n_t {
                    data.push(f(self.rho[i], self.theta(j), self.t(k)));
                }
            }
        }
        Field3 {
            grid: self.clone(),
            data,
        }
    }

    pub fn zeros(self: &Arc<Self>) -> Field3 {
        Field3 {
            grid: self.clone(),
            data: vec![0.0; self.len()],
        }
    }

    pub fn zeros2(self: &Arc<Self>) -> Field2 {
        Field2 {
            grid: self.clone(),
            data: vec![0.0; self.res.n_rho * self.res.n_t],
        }
    }
}

/// Values on a [`TensorGrid`].
#[derive(Clone)]
pub struct Field3 {
    pub grid: Arc<TensorGrid>,
    pub data: Vec<f64>,
}

/// Values on the `(rho, t)` face of a [`TensorGrid`].
#[derive(Clone)]
pub struct Field2 {
    pub grid: Arc<TensorGrid>,
    pub data: Vec<f64>,
}

fn contract(w: &Result<Vec<f64>, usize>, n: usize, mut at: impl FnMut(usize) -> f64) -> f64 {
    match w {
        Err(j) => at(*j),
        Ok(w) => {
            let mut s = 0.0;
            for (j, &wj) in w.iter().enumerate().take(n) {
                s += wj * at(j);
            }
            s
        }
    }
}

impl Field3 {
    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    pub fn sup(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn apply(&self, w: &Weights) -> f64 {
        let r = self.grid.res;
        contract(&w.rho, r.n_rho, |i| {
            contract(&w.theta, r.n_theta, |j| {
                contract(&w.t, r.n_t, |k| self.at(i, j, k))
            })
        })
    }

    pub fn eval(&self, rho: f64, theta: f64, t: f64) -> f64 {
        self.apply(&self.grid.weights(rho, theta, t))
    }

    pub fn map2(&self, other: &Field3, f: impl Fn(f64, f64) -> f64) -> Field3 {
        Field3 {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn d_rho(&self) -> Field3 {
        let g = &self.grid;
        let r = g.res;
        let np = r.n_rho;
        let mut out = g.zeros();
        for j in 0..r.n_theta {
            for k in 0..r.n_t {
                for i in 0..np {
                    let mut s = 0.0;
                    for m in 0..np {
                        s += g.diff[i * np + m] * self.at(m, j, k);
                    }
                    out.data[g.index(i, j, k)] = s;
                }
            }
        }
        out
    }

    fn map_theta_lines(&self, op: impl Fn(&mut [Complex<f64>])) -> Field3 {
        let g = &self.grid;
        let r = g.res;
        let mut out = g.zeros();
        let mut buf = vec![Complex::new(0.0, 0.0); r.n_theta];
        for i in 0..r.n_rho {
            for k in 0..r.n_t {
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = Complex::new(self.at(i, j, k), 0.0);
                }
                g.fft_theta.0.process(&mut buf);
                op(&mut buf);
                g.fft_theta.1.process(&mut buf);
                for (j, b) in buf.iter().enumerate() {
                    out.data[g.index(i, j, k)] = b.re / r.n_theta as f64;
                }
            }
        }
        out
    }

    /// `int_0^theta (f - [f]) ds`, spectrally.
    pub fn theta_primitive(&self) -> Field3 {
        let n = self.grid.res.n_theta;
        let mut p = self.map_theta_lines(|c| spectral_primitive(c, n));
        let r = self.grid.res;
        for i in 0..r.n_rho {
            for k in 0..r.n_t {
                let base = p.at(i, 0, k);
                for j in 0..n {
                    let idx = p.grid.index(i, j, k);
                    p.data[idx] -= base;
                }
            }
        }
        p
    }

    pub fn d_t(&self) -> Field3 {
        let g = &self.grid;
        let r = g.res;
        let mut out = g.zeros();
        let mut buf = vec![Complex::new(0.0, 0.0); r.n_t];
        for i in 0..r.n_rho {
            for j in 0..r.n_theta {
                let base = g.index(i, j, 0);
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = Complex::new(self.data[base + k], 0.0);
                }
                g.fft_t.0.process(&mut buf);
                spectral_derivative(&mut buf, r.n_t);
                g.fft_t.1.process(&mut buf);
                for (k, b) in buf.iter().enumerate() {
                    out.data[base + k] = b.re / r.n_t as f64;
                }
            }
        }
        out
    }

    /// Mean over `theta`.
    pub fn theta_mean(&self) -> Field2 {
        let g = &self.grid;
        let r = g.res;
        let mut out = g.zeros2();
        for i in 0..r.n_rho {
            for k in 0..r.n_t {
                let s: f64 = (0..r.n_theta).map(|j| self.at(i, j, k)).sum();
                out.data[i * r.n_t + k] = s / r.n_theta as f64;
            }
        }
        out
    }
}

impl Field2 {
    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.grid.res.n_t + k]
    }

    pub fn sup(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, rho: f64, t: f64) -> f64 {
        let g = &self.grid;
        let wr = g.rho_weights(rho);
        let wt = trig_weights(t.rem_euclid(1.0), g.res.n_t);
        contract(&wr, g.res.n_rho, |i| {
            contract(&wt, g.res.n_t, |k| self.at(i, k))
        })
    }

    /// Mean over `t` at one `rho`.
    pub fn t_mean(&self, rho: f64) -> f64 {
        let g = &self.grid;
        let wr = g.rho_weights(rho);
        contract(&wr, g.res.n_rho, |i| {
            (0..g.res.n_t).map(|k| self.at(i, k)).sum::<f64>() / g.res.n_t as f64
        })
    }

    /// Broadcast along `theta`.
    pub fn broadcast(&self) -> Field3 {
        let g = &self.grid;
        let mut out = g.zeros();
        for i in 0..g.res.n_rho {
            for j in 0..g.res.n_theta {
                for k in 0..g.res.n_t {
                    out.data[g.index(i, j, k)] = self.at(i, k);
                }
            }
        }
        out
    }
}

fn wavenumber(m: usize, n: usize) -> Option<f64> {
    if m == 0 || 2 * m == n {
        None
    } else if m < n / 2 {
        Some(m as f64)
    } else {
        Some(m as f64 - n as f64)
    }
}

fn spectral_derivative(c: &mut [Complex<f64>], n: usize) {
    for (m, v) in c.iter_mut().enumerate() {
        *v = match wavenumber(m, n) {
            Some(q) => *v * Complex::new(0.0, 2.0 * PI * q),
            None => Complex::new(0.0, 0.0),
        };
    }
}

fn spectral_primitive(c: &mut [Complex<f64>], n: usize) {
    for (m, v) in c.iter_mut().enumerate() {
        *v = match wavenumber(m, n) {
            Some(q) => *v / Complex::new(0.0, 2.0 * PI * q),
            None => Complex::new(0.0, 0.0),
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<TensorGrid> {
        TensorGrid::new(
            2.0,
            5.0,
            GridResolution {
                n_rho: 16,
                n_theta: 32,
                n_t: 16,
            },
        )
    }

    fn smooth(r: f64, th: f64, t: f64) -> f64 {
        r.powf(1.5) * (2.0 * PI * th).sin() * (1.0 + 0.3 * (2.0 * PI * t).cos())
            + r * (4.0 * PI * th).cos()
    }

    #[test]
    fn interpolation_is_spectral() {
        let g = grid();
        let f = g.sample(smooth);
        for &(r, th, t) in &[(2.3, 0.17, 0.41), (4.9, 0.77, 0.05), (3.0, 0.5, 0.25)] {
            assert!((f.eval(r, th, t) - smooth(r, th, t)).abs() < 1e-11);
        }
    }

    #[test]
    fn derivatives_and_primitive() {
        let g = grid();
        let f = g.sample(smooth);
        let (r, th, t) = (3.3, 0.31, 0.62);
        let h = 1e-5;
        let fd_r = (smooth(r + h, th, t) - smooth(r - h, th, t)) / (2.0 * h);
        assert!((f.d_rho().eval(r, th, t) - fd_r).abs() < 1e-8);
        let fd_t = (smooth(r, th, t + h) - smooth(r, th, t - h)) / (2.0 * h);
        assert!((f.d_t().eval(r, th, t) - fd_t).abs() < 1e-7);
        // primitive of the zero-mean part, pinned at theta = 0
        let exact = |th: f64| {
            r.powf(1.5) * (1.0 + 0.3 * (2.0 * PI * t).cos()) * (1.0 - (2.0 * PI * th).cos())
                / (2.0 * PI)
                + r * (4.0 * PI * th).sin() / (4.0 * PI)
        };
        assert!((f.theta_primitive().eval(r, th, t) - exact(th)).abs() < 1e-11);
        assert!(f.theta_mean().sup() < 1e-12);
    }
}
