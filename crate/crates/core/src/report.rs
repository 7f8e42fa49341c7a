//! Versioned report envelopes (JSON) and the CSV tables of the CLI.
//!
//! The envelope stores the canonical form of the input config and its
//! SHA-256, so a report can be traced back to the exact inputs.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::ValidationReport;
use crate::dynamics::State;
use crate::experiments::{QuasiPeriodicityReport, SweepReport};
use crate::normalform::{ChainSymmetry, DomainRecord, OrderScalingReport};
use crate::poincare::{Atlas, ConfinementReport, RotationEstimate};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serde adapter writing non-finite floats as the strings `"inf"`,
/// `"-inf"` and `"nan"`; JSON numbers cannot carry them.
pub mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number, inf, -inf or nan, got '{other}'"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub n: u32,
    pub period: f64,
    /// Independent tanh-sinh evaluation of the same integral.
    pub period_check: f64,
    pub closure: f64,
    pub eval_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub amplitude: f64,
    pub rescaled: bool,
    pub samples: Vec<State>,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartSample {
    pub x: f64,
    pub y: f64,
    pub rho: f64,
    pub theta: f64,
    pub roundtrip_error: f64,
    pub jacobian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormReport {
    pub amplitude: f64,
    pub radial_steps: usize,
    pub angular_steps: usize,
    pub sup_v: Vec<f64>,
    pub domains: Vec<DomainRecord>,
    pub initial_g1_sup: f64,
    pub sup_f: f64,
    pub sup_g: f64,
    pub sup_h: f64,
    pub symmetry: ChainSymmetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "kebab-case")]
pub enum Payload {
    Validation(ValidationReport),
    Period(PeriodReport),
    Trajectory(TrajectoryReport),
    ActionAngle(Vec<ChartSample>),
    NormalForm(NormalFormReport),
    Scaling(Vec<OrderScalingReport>),
    Atlas(Atlas),
    Rotation(RotationEstimate),
    Confinement(ConfinementReport),
    Sweep(SweepReport),
    QuasiPeriodicity(QuasiPeriodicityReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema_version: u64,
    pub tool_version: String,
    /// Canonical JSON of the inputs (object keys sorted).
    pub config: serde_json::Value,
    /// Hex SHA-256 of the compact serialization of `config`.
    pub config_hash: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub payload: Payload,
}

/// Compact JSON with sorted object keys.
pub fn canonical_json(value: &serde_json::Value) -> String {
    // serde_json's default map is ordered by key
    serde_json::to_string(value).expect("a JSON value always serializes")
}

pub fn config_hash(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(canonical_json(config).as_bytes()))
}

impl ReportEnvelope {
    pub fn new<C: Serialize>(config: &C, payload: Payload) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::Serialize(e.to_string()))?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash(&config),
            config,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            payload,
        })
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `contents` to a temporary file next to `path` and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(contents).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_report(env: &ReportEnvelope, path: &Path) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(env).map_err(|e| Error::Serialize(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn parse_err(path: &Path, e: serde_json::Error) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Reads and validates an envelope: schema version first, then the config
/// hash, then the payload shape.
pub fn read_report(path: &Path) -> Result<ReportEnvelope> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_report(&text).map_err(|e| match e {
        Error::Parse {
            line,
            column,
            message,
            ..
        } => Error::Parse {
            path: path.display().to_string(),
            line,
            column,
            message,
        },
        e => e,
    })
}

/// [`read_report`] on an in-memory document.
pub fn parse_report(text: &str) -> Result<ReportEnvelope> {
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| parse_err(Path::new("<input>"), e))?;
    match raw
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
    {
        Some(SCHEMA_VERSION) => {}
        Some(found) => {
            return Err(Error::UnsupportedSchema {
                found,
                supported: SCHEMA_VERSION,
            })
        }
        None => {
            return Err(Error::Parse {
                path: "<input>".into(),
                line: 1,
                column: 1,
                message: "missing integer field schema_version".into(),
            })
        }
    }
    let env: ReportEnvelope =
        serde_json::from_str(text).map_err(|e| parse_err(Path::new("<input>"), e))?;
    let computed = config_hash(&env.config);
    if computed != env.config_hash {
        return Err(Error::HashMismatch {
            stored: env.config_hash,
            computed,
        });
    }
    Ok(env)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `rho0,lambda0,omega,omega_err,sup_drift,status`.
pub fn atlas_csv(atlas: &Atlas) -> String {
    let mut out = String::from("rho0,lambda0,omega,omega_err,sup_drift,status\n");
    for row in &atlas.rows {
        let (omega, err) = row
            .curve
            .rotation
            .map_or((f64::NAN, f64::NAN), |r| (r.omega, r.error_bound));
        let status = serde_json::to_value(row.curve.status).expect("status serializes");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(row.rho0),
            fmt_f64(row.lambda0),
            fmt_f64(omega),
            fmt_f64(err),
            fmt_f64(row.curve.sup_drift),
            status.as_str().unwrap_or_default()
        );
    }
    out
}

/// One row per orbit:
/// `amplitude,x0,v0,sup_forward,sup_backward,ratio,escaped,escape_time`.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out =
        String::from("amplitude,x0,v0,sup_forward,sup_backward,ratio,escaped,escape_time\n");
    for o in &report.orbits {
        let escape = o.forward.escape_time.or(o.backward.escape_time.map(|t| -t));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(o.amplitude),
            fmt_f64(o.x0),
            fmt_f64(o.v0),
            fmt_f64(o.forward.sup),
            fmt_f64(o.backward.sup),
            fmt_f64(o.ratio()),
            o.forward.escaped || o.backward.escaped,
            escape.map(fmt_f64).unwrap_or_default()
        );
    }
    out
}

/// `t,x,v`.
pub fn trajectory_csv(samples: &[State]) -> String {
    let mut out = String::from("t,x,v\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{}", fmt_f64(s.t), fmt_f64(s.x), fmt_f64(s.v));
    }
    out
}

/// `A,sup` per row, preceded by a comment line with the fit.
pub fn scaling_csv(report: &OrderScalingReport) -> String {
    let mut out = format!(
        "# term={:?} expected={} slope={} residual={}\nA,sup\n",
        report.term,
        report.gamma_expected,
        fmt_f64(report.fitted_slope),
        fmt_f64(report.residual)
    );
    for (a, s) in report.a_values.iter().zip(&report.sup_norms) {
        let _ = writeln!(out, "{},{}", fmt_f64(*a), fmt_f64(*s));
    }
    out
}
