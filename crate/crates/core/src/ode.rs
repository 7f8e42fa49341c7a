//! Explicit Runge-Kutta integrator of Dormand-Prince type, order 8 with an
//! embedded 5(3) error estimator and a 7th order continuous extension
//! (Hairer, Norsett & Wanner, "Solving ODEs I", DOP853).
//!
//! States are fixed-size arrays so that the right-hand side can be
//! monomorphised and stays on the stack.

use std::ops::ControlFlow;

use thiserror::Error;

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step magnitude; `f64::INFINITY` leaves it to the controller.
    pub max_step: f64,
    /// Initial step magnitude; `None` selects it automatically.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Optional escape radius on the max-norm of the state.
    pub escape_radius: Option<f64>,
}

impl StepControl {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 50_000_000,
            escape_radius: None,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("state left the escape radius at t = {t}")]
    Escaped { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
}

impl OdeError {
    /// Time at which the integration stopped.
    pub fn time(&self) -> f64 {
        match *self {
            OdeError::StepUnderflow { t, .. }
            | OdeError::NonFinite { t }
            | OdeError::Escaped { t }
            | OdeError::TooManySteps { t, .. } => t,
        }
    }
}

/// Summary of a finished integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// True if the observer asked to stop before reaching the end time.
    pub interrupted: bool,
}

/// An accepted step, handed to observers. Holds everything needed to build
/// the continuous extension on demand.
pub struct Step<'a, const N: usize, S: OdeSystem<N>> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    sys: &'a S,
    k: &'a [[f64; N]; 12],
    f1: &'a [f64; N],
}

impl<const N: usize, S: OdeSystem<N>> Step<'_, N, S> {
    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Builds the 7th-order dense output for this step (three extra
    /// right-hand-side evaluations).
    pub fn dense(&self) -> DenseSegment<N> {
        dense_segment(
            self.sys,
            self.t0,
            self.h(),
            &self.y0,
            &self.y1,
            self.k,
            self.f1,
        )
    }
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 8],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.h >= 0.0 {
            (self.t0, self.t0 + self.h)
        } else {
            (self.t0 + self.h, self.t0)
        };
        t >= lo && t <= hi
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c[0][i]
                + s * (c[1][i]
                    + s1 * (c[2][i]
                        + s * (c[3][i]
                            + s1 * (c[4][i] + s * (c[5][i] + s1 * (c[6][i] + s * c[7][i]))))));
        }
        out
    }
}

/// Integrates from `(t0, y0)` to `t1` (either direction). The observer sees
/// every accepted step and may stop the integration early.
pub fn integrate<const N: usize, S, O>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    ctl: &StepControl,
    mut observer: O,
) -> Result<Outcome<N>, OdeError>
where
    S: OdeSystem<N>,
    O: FnMut(&Step<'_, N, S>) -> ControlFlow<()>,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut out = Outcome {
        t,
        y,
        accepted: 0,
        rejected: 0,
        evaluations: 0,
        interrupted: false,
    };
    if span == 0.0 {
        return Ok(out);
    }
    check_state(t, &y, ctl)?;
    let mut f0 = sys.rhs(t, &y);
    out.evaluations += 1;
    if !finite(&f0) {
        return Err(OdeError::NonFinite { t });
    }
    let mut h = match ctl.initial_step {
        Some(h) => h.min(span),
        None => {
            let h = initial_step(sys, t, &y, &f0, dir, ctl);
            out.evaluations += 1;
            h
        }
    }
    .min(ctl.max_step)
    .min(span);
    let mut k = [[0.0; N]; 12];
    let mut reject = false;
    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 4.0 * f64::EPSILON * t.abs().max(t1.abs()) {
            // rounding leftover from the previous step
            t = t1;
            break;
        }
        if out.accepted + out.rejected >= ctl.max_steps {
            return Err(OdeError::TooManySteps {
                t,
                max_steps: ctl.max_steps,
            });
        }
        let mut last = false;
        if h >= remaining * (1.0 - 1e-10) {
            h = remaining;
            last = true;
        }
        if h <= 10.0 * f64::EPSILON * t.abs().max(1e-300) {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let hs = h * dir;
        let (y_new, err) = dop853_step(sys, t, &y, &f0, hs, ctl, &mut k);
        out.evaluations += 11;
        if !err.is_finite() || !finite(&y_new) {
            // treat as a very large error; shrink and retry
            h *= 0.1;
            out.rejected += 1;
            reject = true;
            if h <= 10.0 * f64::EPSILON * t.abs().max(1e-300) {
                return Err(OdeError::NonFinite { t });
            }
            continue;
        }
        let fac11 = err.powf(1.0 / 8.0);
        if err <= 1.0 {
            let t_new = if last { t1 } else { t + hs };
            let f_new = sys.rhs(t_new, &y_new);
            out.evaluations += 1;
            if !finite(&f_new) {
                return Err(OdeError::NonFinite { t: t_new });
            }
            let step = Step {
                t0: t,
                t1: t_new,
                y0: y,
                y1: y_new,
                sys,
                k: &k,
                f1: &f_new,
            };
            let flow = observer(&step);
            out.accepted += 1;
            t = t_new;
            y = y_new;
            f0 = f_new;
            check_state(t, &y, ctl)?;
            if flow.is_break() {
                out.interrupted = true;
                break;
            }
            let mut fac = (fac11 / 0.9).clamp(1.0 / 6.0, 1.0 / 0.333);
            if reject {
                fac = fac.max(1.0);
            }
            h = (h / fac).min(ctl.max_step);
            reject = false;
            if last {
                break;
            }
        } else {
            out.rejected += 1;
            reject = true;
            h /= (fac11 / 0.9).min(1.0 / 0.333);
        }
    }
    out.t = t;
    out.y = y;
    Ok(out)
}

/// Integrates and records the dense output of every step.
pub fn integrate_dense<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    ctl: &StepControl,
) -> Result<(Outcome<N>, Vec<DenseSegment<N>>), OdeError> {
    let mut segs = Vec::new();
    let out = integrate(sys, t0, y0, t1, ctl, |s| {
        segs.push(s.dense());
        ControlFlow::Continue(())
    })?;
    Ok((out, segs))
}

fn finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn check_state<const N: usize>(t: f64, y: &[f64; N], ctl: &StepControl) -> Result<(), OdeError> {
    if !finite(y) {
        return Err(OdeError::NonFinite { t });
    }
    if let Some(r) = ctl.escape_radius {
        if y.iter().any(|v| v.abs() > r) {
            return Err(OdeError::Escaped { t });
        }
    }
    Ok(())
}

fn initial_step<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    ctl: &StepControl,
) -> f64 {
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..N {
        let sk = ctl.atol + ctl.rtol * y[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(ctl.max_step);
    let mut y1 = [0.0; N];
    for i in 0..N {
        y1[i] = y[i] + dir * h * f0[i];
    }
    let f1 = sys.rhs(t + dir * h, &y1);
    let mut der2 = 0.0;
    for i in 0..N {
        let sk = ctl.atol + ctl.rtol * y[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    (100.0 * h).min(h1).min(ctl.max_step)
}

/// One DOP853 step. Fills stages k[0..12] (k[0] = f(t, y)) and returns the
/// 8th order solution with its scaled error norm.
fn dop853_step<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    h: f64,
    ctl: &StepControl,
    k: &mut [[f64; N]; 12],
) -> ([f64; N], f64) {
    use coeffs::*;
    k[0] = *f0;
    let mut yt = [0.0; N];
    macro_rules! stage {
        ($dst:expr, $c:expr, [$(($j:expr, $a:expr)),*]) => {{
            for i in 0..N {
                yt[i] = y[i] + h * (0.0 $(+ $a * k[$j][i])*);
            }
            k[$dst] = sys.rhs(t + $c * h, &yt);
        }};
    }
    stage!(1, C2, [(0, A21)]);
    stage!(2, C3, [(0, A31), (1, A32)]);
    stage!(3, C4, [(0, A41), (2, A43)]);
    stage!(4, C5, [(0, A51), (2, A53), (3, A54)]);
    stage!(5, C6, [(0, A61), (3, A64), (4, A65)]);
    stage!(6, C7, [(0, A71), (3, A74), (4, A75), (5, A76)]);
    stage!(7, C8, [(0, A81), (3, A84), (4, A85), (5, A86), (6, A87)]);
    stage!(
        8,
        C9,
        [(0, A91), (3, A94), (4, A95), (5, A96), (6, A97), (7, A98)]
    );
    stage!(
        9,
        C10,
        [
            (0, A101),
            (3, A104),
            (4, A105),
            (5, A106),
            (6, A107),
            (7, A108),
            (8, A109)
        ]
    );
    stage!(
        10,
        C11,
        [
            (0, A111),
            (3, A114),
            (4, A115),
            (5, A116),
            (6, A117),
            (7, A118),
            (8, A119),
            (9, A1110)
        ]
    );
    stage!(
        11,
        1.0,
        [
            (0, A121),
            (3, A124),
            (4, A125),
            (5, A126),
            (6, A127),
            (7, A128),
            (8, A129),
            (9, A1210),
            (10, A1211)
        ]
    );
    let mut y_new = [0.0; N];
    let mut err = 0.0;
    let mut err2 = 0.0;
    for i in 0..N {
        let inc = B1 * k[0][i]
            + B6 * k[5][i]
            + B7 * k[6][i]
            + B8 * k[7][i]
            + B9 * k[8][i]
            + B10 * k[9][i]
            + B11 * k[10][i]
            + B12 * k[11][i];
        y_new[i] = y[i] + h * inc;
        let e5 = inc - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
        let e3 = ER1 * k[0][i]
            + ER6 * k[5][i]
            + ER7 * k[6][i]
            + ER8 * k[7][i]
            + ER9 * k[8][i]
            + ER10 * k[9][i]
            + ER11 * k[10][i]
            + ER12 * k[11][i];
        let sk = ctl.atol + ctl.rtol * y[i].abs().max(y_new[i].abs());
        err += (e3 / sk).powi(2);
        err2 += (e5 / sk).powi(2);
    }
    let mut deno = err + 0.01 * err2;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let e = h.abs() * err * (1.0 / (N as f64 * deno)).sqrt();
    (y_new, e)
}

fn dense_segment<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t: f64,
    h: f64,
    y: &[f64; N],
    y_new: &[f64; N],
    k: &[[f64; N]; 12],
    f_new: &[f64; N],
) -> DenseSegment<N> {
    use coeffs::*;
    let mut c = [[0.0; N]; 8];
    let mut yt = [0.0; N];
    for i in 0..N {
        let ydiff = y_new[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        c[0][i] = y[i];
        c[1][i] = ydiff;
        c[2][i] = bspl;
        c[3][i] = ydiff - h * f_new[i] - bspl;
        c[4][i] = D41 * k[0][i]
            + D46 * k[5][i]
            + D47 * k[6][i]
            + D48 * k[7][i]
            + D49 * k[8][i]
            + D410 * k[9][i]
            + D411 * k[10][i]
            + D412 * k[11][i];
        c[5][i] = D51 * k[0][i]
            + D56 * k[5][i]
            + D57 * k[6][i]
            + D58 * k[7][i]
            + D59 * k[8][i]
            + D510 * k[9][i]
            + D511 * k[10][i]
            + D512 * k[11][i];
        c[6][i] = D61 * k[0][i]
            + D66 * k[5][i]
            + D67 * k[6][i]
            + D68 * k[7][i]
            + D69 * k[8][i]
            + D610 * k[9][i]
            + D611 * k[10][i]
            + D612 * k[11][i];
        c[7][i] = D71 * k[0][i]
            + D76 * k[5][i]
            + D77 * k[6][i]
            + D78 * k[7][i]
            + D79 * k[8][i]
            + D710 * k[9][i]
            + D711 * k[10][i]
            + D712 * k[11][i];
    }
    for i in 0..N {
        yt[i] = y[i]
            + h * (A141 * k[0][i]
                + A147 * k[6][i]
                + A148 * k[7][i]
                + A149 * k[8][i]
                + A1410 * k[9][i]
                + A1411 * k[10][i]
                + A1412 * k[11][i]
                + A1413 * f_new[i]);
    }
    let k14 = sys.rhs(t + C14 * h, &yt);
    for i in 0..N {
        yt[i] = y[i]
            + h * (A151 * k[0][i]
                + A156 * k[5][i]
                + A157 * k[6][i]
                + A158 * k[7][i]
                + A1511 * k[10][i]
                + A1512 * k[11][i]
                + A1513 * f_new[i]
                + A1514 * k14[i]);
    }
    let k15 = sys.rhs(t + C15 * h, &yt);
    for i in 0..N {
        yt[i] = y[i]
            + h * (A161 * k[0][i]
                + A166 * k[5][i]
                + A167 * k[6][i]
                + A168 * k[7][i]
                + A169 * k[8][i]
                + A1613 * f_new[i]
                + A1614 * k14[i]
                + A1615 * k15[i]);
    }
    let k16 = sys.rhs(t + C16 * h, &yt);
    for i in 0..N {
        c[4][i] = h * (c[4][i] + D413 * f_new[i] + D414 * k14[i] + D415 * k15[i] + D416 * k16[i]);
        c[5][i] = h * (c[5][i] + D513 * f_new[i] + D514 * k14[i] + D515 * k15[i] + D516 * k16[i]);
        c[6][i] = h * (c[6][i] + D613 * f_new[i] + D614 * k14[i] + D615 * k15[i] + D616 * k16[i]);
        c[7][i] = h * (c[7][i] + D713 * f_new[i] + D714 * k14[i] + D715 * k15[i] + D716 * k16[i]);
    }
    DenseSegment { t0: t, h, cont: c }
}

#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
mod coeffs {
    pub const C2: f64 = 0.526001519587677318785587544488e-01;
    pub const C3: f64 = 0.789002279381515978178381316732e-01;
    pub const C4: f64 = 0.118350341907227396726757197510e+00;
    pub const C5: f64 = 0.281649658092772603273242802490e+00;
    pub const C6: f64 = 0.333333333333333333333333333333e+00;
    pub const C7: f64 = 0.25e+00;
    pub const C8: f64 = 0.307692307692307692307692307692e+00;
    pub const C9: f64 = 0.651282051282051282051282051282e+00;
    pub const C10: f64 = 0.6e+00;
    pub const C11: f64 = 0.857142857142857142857142857142e+00;
    pub const C14: f64 = 0.1e+00;
    pub const C15: f64 = 0.2e+00;
    pub const C16: f64 = 0.777777777777777777777777777778e+00;
    pub const B1: f64 = 5.42937341165687622380535766363e-2;
    pub const B6: f64 = 4.45031289275240888144113950566e0;
    pub const B7: f64 = 1.89151789931450038304281599044e0;
    pub const B8: f64 = -5.8012039600105847814672114227e0;
    pub const B9: f64 = 3.1116436695781989440891606237e-1;
    pub const B10: f64 = -1.52160949662516078556178806805e-1;
    pub const B11: f64 = 2.01365400804030348374776537501e-1;
    pub const B12: f64 = 4.47106157277725905176885569043e-2;
    pub const BHH1: f64 = 0.244094488188976377952755905512e+00;
    pub const BHH2: f64 = 0.733846688281611857341361741547e+00;
    pub const BHH3: f64 = 0.220588235294117647058823529412e-01;
    pub const ER1: f64 = 0.1312004499419488073250102996e-01;
    pub const ER6: f64 = -0.1225156446376204440720569753e+01;
    pub const ER7: f64 = -0.4957589496572501915214079952e+00;
    pub const ER8: f64 = 0.1664377182454986536961530415e+01;
    pub const ER9: f64 = -0.3503288487499736816886487290e+00;
    pub const ER10: f64 = 0.3341791187130174790297318841e+00;
    pub const ER11: f64 = 0.8192320648511571246570742613e-01;
    pub const ER12: f64 = -0.2235530786388629525884427845e-01;
    pub const A21: f64 = 5.26001519587677318785587544488e-2;
    pub const A31: f64 = 1.97250569845378994544595329183e-2;
    pub const A32: f64 = 5.91751709536136983633785987549e-2;
    pub const A41: f64 = 2.95875854768068491816892993775e-2;
    pub const A43: f64 = 8.87627564304205475450678981324e-2;
    pub const A51: f64 = 2.41365134159266685502369798665e-1;
    pub const A53: f64 = -8.84549479328286085344864962717e-1;
    pub const A54: f64 = 9.24834003261792003115737966543e-1;
    pub const A61: f64 = 3.7037037037037037037037037037e-2;
    pub const A64: f64 = 1.70828608729473871279604482173e-1;
    pub const A65: f64 = 1.25467687566822425016691814123e-1;
    pub const A71: f64 = 3.7109375e-2;
    pub const A74: f64 = 1.70252211019544039314978060272e-1;
    pub const A75: f64 = 6.02165389804559606850219397283e-2;
    pub const A76: f64 = -1.7578125e-2;
    pub const A81: f64 = 3.70920001185047927108779319836e-2;
    pub const A84: f64 = 1.70383925712239993810214054705e-1;
    pub const A85: f64 = 1.07262030446373284651809199168e-1;
    pub const A86: f64 = -1.53194377486244017527936158236e-2;
    pub const A87: f64 = 8.27378916381402288758473766002e-3;
    pub const A91: f64 = 6.24110958716075717114429577812e-1;
    pub const A94: f64 = -3.36089262944694129406857109825e0;
    pub const A95: f64 = -8.68219346841726006818189891453e-1;
    pub const A96: f64 = 2.75920996994467083049415600797e1;
    pub const A97: f64 = 2.01540675504778934086186788979e1;
    pub const A98: f64 = -4.34898841810699588477366255144e1;
    pub const A101: f64 = 4.77662536438264365890433908527e-1;
    pub const A104: f64 = -2.48811461997166764192642586468e0;
    pub const A105: f64 = -5.90290826836842996371446475743e-1;
    pub const A106: f64 = 2.12300514481811942347288949897e1;
    pub const A107: f64 = 1.52792336328824235832596922938e1;
    pub const A108: f64 = -3.32882109689848629194453265587e1;
    pub const A109: f64 = -2.03312017085086261358222928593e-2;
    pub const A111: f64 = -9.3714243008598732571704021658e-1;
    pub const A114: f64 = 5.18637242884406370830023853209e0;
    pub const A115: f64 = 1.09143734899672957818500254654e0;
    pub const A116: f64 = -8.14978701074692612513997267357e0;
    pub const A117: f64 = -1.85200656599969598641566180701e1;
    pub const A118: f64 = 2.27394870993505042818970056734e1;
    pub const A119: f64 = 2.49360555267965238987089396762e0;
    pub const A1110: f64 = -3.0467644718982195003823669022e0;
    pub const A121: f64 = 2.27331014751653820792359768449e0;
    pub const A124: f64 = -1.05344954667372501984066689879e1;
    pub const A125: f64 = -2.00087205822486249909675718444e0;
    pub const A126: f64 = -1.79589318631187989172765950534e1;
    pub const A127: f64 = 2.79488845294199600508499808837e1;
    pub const A128: f64 = -2.85899827713502369474065508674e0;
    pub const A129: f64 = -8.87285693353062954433549289258e0;
    pub const A1210: f64 = 1.23605671757943030647266201528e1;
    pub const A1211: f64 = 6.43392746015763530355970484046e-1;
    pub const A141: f64 = 5.61675022830479523392909219681e-2;
    pub const A147: f64 = 2.53500210216624811088794765333e-1;
    pub const A148: f64 = -2.46239037470802489917441475441e-1;
    pub const A149: f64 = -1.24191423263816360469010140626e-1;
    pub const A1410: f64 = 1.5329179827876569731206322685e-1;
    pub const A1411: f64 = 8.20105229563468988491666602057e-3;
    pub const A1412: f64 = 7.56789766054569976138603589584e-3;
    pub const A1413: f64 = -8.298e-3;
    pub const A151: f64 = 3.18346481635021405060768473261e-2;
    pub const A156: f64 = 2.83009096723667755288322961402e-2;
    pub const A157: f64 = 5.35419883074385676223797384372e-2;
    pub const A158: f64 = -5.49237485713909884646569340306e-2;
    pub const A1511: f64 = -1.08347328697249322858509316994e-4;
    pub const A1512: f64 = 3.82571090835658412954920192323e-4;
    pub const A1513: f64 = -3.40465008687404560802977114492e-4;
    pub const A1514: f64 = 1.41312443674632500278074618366e-1;
    pub const A161: f64 = -4.28896301583791923408573538692e-1;
    pub const A166: f64 = -4.69762141536116384314449447206e0;
    pub const A167: f64 = 7.68342119606259904184240953878e0;
    pub const A168: f64 = 4.06898981839711007970213554331e0;
    pub const A169: f64 = 3.56727187455281109270669543021e-1;
    pub const A1613: f64 = -1.39902416515901462129418009734e-3;
    pub const A1614: f64 = 2.9475147891527723389556272149e0;
    pub const A1615: f64 = -9.15095847217987001081870187138e0;
    pub const D41: f64 = -0.84289382761090128651353491142e+01;
    pub const D46: f64 = 0.56671495351937776962531783590e+00;
    pub const D47: f64 = -0.30689499459498916912797304727e+01;
    pub const D48: f64 = 0.23846676565120698287728149680e+01;
    pub const D49: f64 = 0.21170345824450282767155149946e+01;
    pub const D410: f64 = -0.87139158377797299206789907490e+00;
    pub const D411: f64 = 0.22404374302607882758541771650e+01;
    pub const D412: f64 = 0.63157877876946881815570249290e+00;
    pub const D413: f64 = -0.88990336451333310820698117400e-01;
    pub const D414: f64 = 0.18148505520854727256656404962e+02;
    pub const D415: f64 = -0.91946323924783554000451984436e+01;
    pub const D416: f64 = -0.44360363875948939664310572000e+01;
    pub const D51: f64 = 0.10427508642579134603413151009e+02;
    pub const D56: f64 = 0.24228349177525818288430175319e+03;
    pub const D57: f64 = 0.16520045171727028198505394887e+03;
    pub const D58: f64 = -0.37454675472269020279518312152e+03;
    pub const D59: f64 = -0.22113666853125306036270938578e+02;
    pub const D510: f64 = 0.77334326684722638389603898808e+01;
    pub const D511: f64 = -0.30674084731089398182061213626e+02;
    pub const D512: f64 = -0.93321305264302278729567221706e+01;
    pub const D513: f64 = 0.15697238121770843886131091075e+02;
    pub const D514: f64 = -0.31139403219565177677282850411e+02;
    pub const D515: f64 = -0.93529243588444783865713862664e+01;
    pub const D516: f64 = 0.35816841486394083752465898540e+02;
    pub const D61: f64 = 0.19985053242002433820987653617e+02;
    pub const D66: f64 = -0.38703730874935176555105901742e+03;
    pub const D67: f64 = -0.18917813819516756882830838328e+03;
    pub const D68: f64 = 0.52780815920542364900561016686e+03;
    pub const D69: f64 = -0.11573902539959630126141871134e+02;
    pub const D610: f64 = 0.68812326946963000169666922661e+01;
    pub const D611: f64 = -0.10006050966910838403183860980e+01;
    pub const D612: f64 = 0.77771377980534432092869265740e+00;
    pub const D613: f64 = -0.27782057523535084065932004339e+01;
    pub const D614: f64 = -0.60196695231264120758267380846e+02;
    pub const D615: f64 = 0.84320405506677161018159903784e+02;
    pub const D616: f64 = 0.11992291136182789328035130030e+02;
    pub const D71: f64 = -0.25693933462703749003312586129e+02;
    pub const D76: f64 = -0.15418974869023643374053993627e+03;
    pub const D77: f64 = -0.23152937917604549567536039109e+03;
    pub const D78: f64 = 0.35763911791061412378285349910e+03;
    pub const D79: f64 = 0.93405324183624310003907691704e+02;
    pub const D710: f64 = -0.37458323136451633156875139351e+02;
    pub const D711: f64 = 0.10409964950896230045147246184e+03;
    pub const D712: f64 = 0.29840293426660503123344363579e+02;
    pub const D713: f64 = -0.43533456590011143754432175058e+02;
    pub const D714: f64 = 0.96324553959188282948394950600e+02;
    pub const D715: f64 = -0.39177261675615439165231486172e+02;
    pub const D716: f64 = -0.14972683625798562581422125276e+03;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(_t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn harmonic_oscillator_endpoint() {
        let ctl = StepControl::new(1e-12, 1e-12);
        let out = integrate(&harmonic, 0.0, [0.0, 1.0], 10.0, &ctl, |_| {
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!((out.y[0] - 10f64.sin()).abs() < 1e-10, "{:?}", out.y);
        assert!((out.y[1] - 10f64.cos()).abs() < 1e-10);
        assert_eq!(out.t, 10.0);
    }

    #[test]
    fn backward_integration_retraces() {
        let ctl = StepControl::new(1e-12, 1e-12);
        let out = integrate(&harmonic, 0.0, [0.0, 1.0], -3.0, &ctl, |_| {
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!((out.y[0] - (-3f64).sin()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        let ctl = StepControl::new(1e-11, 1e-11);
        let (_, segs) = integrate_dense(&harmonic, 0.0, [0.0, 1.0], 6.0, &ctl).unwrap();
        let mut worst: f64 = 0.0;
        for seg in &segs {
            for j in 0..=10 {
                let t = seg.t0 + seg.h * j as f64 / 10.0;
                let y = seg.eval(t);
                worst = worst
                    .max((y[0] - t.sin()).abs())
                    .max((y[1] - t.cos()).abs());
            }
        }
        assert!(worst < 1e-9, "dense error {worst}");
    }

    #[test]
    fn error_decreases_at_high_order_with_step_size() {
        // fixed steps through the initial_step / max_step pair
        let run = |h: f64| {
            let mut ctl = StepControl::new(1.0, 1.0);
            ctl.initial_step = Some(h);
            ctl.max_step = h;
            let out = integrate(&harmonic, 0.0, [0.0, 1.0], 4.0, &ctl, |_| {
                ControlFlow::Continue(())
            })
            .unwrap();
            (out.y[0] - 4f64.sin()).abs()
        };
        let e1 = run(0.4);
        let e2 = run(0.2);
        let order = (e1 / e2).log2();
        assert!(order > 7.0, "observed order {order} ({e1:e}, {e2:e})");
    }

    #[test]
    fn blow_up_is_reported_with_time() {
        // y' = y^2 from y(0) = 1 escapes at t = 1
        let f = |_t: f64, y: &[f64; 1]| [y[0] * y[0]];
        let mut ctl = StepControl::new(1e-10, 1e-10);
        ctl.escape_radius = Some(1e8);
        let err = integrate(&f, 0.0, [1.0], 2.0, &ctl, |_| ControlFlow::Continue(())).unwrap_err();
        match err {
            OdeError::Escaped { t } => assert!((t - 1.0).abs() < 1e-6, "{t}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
