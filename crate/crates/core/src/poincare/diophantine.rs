use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Frequencies `omega` with `|q omega / 2 pi - p| >= K / q^(m + eps)`,
/// checked for `1 <= q <= q_max`. Only `m = 1` is supported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineClass {
    pub k: f64,
    pub epsilon: f64,
    pub q_max: u32,
    pub m: u32,
}

impl DiophantineClass {
    pub fn new(k: f64, epsilon: f64, q_max: u32) -> Result<Self> {
        let dc = Self {
            k,
            epsilon,
            q_max,
            m: 1,
        };
        dc.validate()?;
        Ok(dc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "K = {} must be finite and >= 0",
                self.k
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        if self.q_max == 0 {
            return Err(Error::InvalidParameter("q_max must be at least 1".into()));
        }
        if self.m != 1 {
            return Err(Error::InvalidParameter(format!(
                "m = {} unsupported (only m = 1)",
                self.m
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineVerdict {
    pub pass: bool,
    /// `min_q q^(m+eps) |q omega / 2 pi - p|` over the horizon.
    pub margin: f64,
    /// `(p, q)` attaining the margin.
    pub worst: (i64, u32),
    /// First `(p, q)` below `K`, if any.
    pub violation: Option<(i64, u32)>,
}

/// Brute-force scan with the nearest integer `p` for each `q`.
/// `omega` is in radians.
pub fn diophantine_check(omega: f64, dc: &DiophantineClass) -> Result<DiophantineVerdict> {
    dc.validate()?;
    let x = omega / (2.0 * std::f64::consts::PI);
    let expo = dc.m as f64 + dc.epsilon;
    let mut verdict = DiophantineVerdict {
        pass: true,
        margin: f64::INFINITY,
        worst: (0, 1),
        violation: None,
    };
    for q in 1..=dc.q_max {
        let qx = q as f64 * x;
        let p = qx.round();
        let scaled = (qx - p).abs() * (q as f64).powf(expo);
        if scaled < verdict.margin {
            verdict.margin = scaled;
            verdict.worst = (p as i64, q);
        }
        if verdict.violation.is_none() && scaled < dc.k {
            verdict.violation = Some((p as i64, q));
            verdict.pass = false;
        }
    }
    Ok(verdict)
}
