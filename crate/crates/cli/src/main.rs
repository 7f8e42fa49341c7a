use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use revbound::actionangle::{AAPoint, ActionAngle};
use revbound::coefficients::validate_spec;
use revbound::dynamics::{integrate, IntegratorConfig, State, SystemConfig};
use revbound::experiments::{
    boundedness_sweep, run_atlas_experiment, AtlasExperiment, Axis, Jitter, SweepConfig,
};
use revbound::normalform::{
    compose_chain, order_scaling, AnnulusDomain, ChainOptions, GridResolution, PerturbationTerms,
    ScalingFamily, ScalingGrid, ScalingTerm,
};
use revbound::poincare::{
    default_class, iterate, rotation_number, AtlasSettings, PoincareMap, DEFAULT_DRIFT_TOL,
};
use revbound::report::{
    atlas_csv, scaling_csv, sweep_csv, trajectory_csv, write_atomic, write_report, ChartSample,
    NormalFormReport, Payload, PeriodReport, ReportEnvelope, TrajectoryReport,
};
use revbound::special::{build_trig, compute_period, compute_period_tanh_sinh};
use revbound::{CoefficientSpec, Error};

const EXIT_INVALID_SPEC: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "revbound",
    version,
    about = "Boundedness experiments for reversible polynomial oscillators"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Global {
    /// Coefficient spec (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; `.csv` also writes the JSON envelope next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Integrator tolerance (relative and absolute).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for initial-condition jitter.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Check a spec against the structural hypotheses.
    Validate,
    /// Period of the generalized trigonometric functions of degree n.
    Period {
        #[arg(long)]
        n: u32,
    },
    /// Integrate one orbit and sample it uniformly.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[arg(long = "A", default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long)]
        x0: f64,
        #[arg(long)]
        v0: f64,
        #[arg(long, default_value_t = 10.0)]
        t1: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Evaluate the action-angle chart: `--rho/--theta` or `--x/--y`.
    #[command(allow_negative_numbers = true)]
    Aa {
        #[arg(long)]
        n: u32,
        #[arg(long, requires = "theta")]
        rho: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, requires = "y", conflicts_with = "rho")]
        x: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
    },
    /// Build the averaging chain and report its sizes and symmetries;
    /// optionally fit order-estimate slopes.
    #[command(allow_negative_numbers = true)]
    NormalformVerify {
        #[arg(long = "A", default_value_t = 64.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 2)]
        radial: usize,
        #[arg(long, default_value_t = 2)]
        angular: usize,
        /// Annulus `inner:outer` in rho.
        #[arg(long, default_value = "3.5:10", value_parser = parse_range, allow_hyphen_values = true)]
        domain: (f64, f64),
        /// Terms to fit, e.g. `v1,f1,f2,xi,eta`.
        #[arg(long, value_delimiter = ',')]
        scaling: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
        a_values: Vec<f64>,
    },
    /// Classify curves on a lambda grid and test confinement between two.
    #[command(allow_negative_numbers = true)]
    PoincareAtlas {
        #[arg(long = "A", default_value_t = 64.0)]
        amplitude: f64,
        #[arg(long, default_value = "2:3", value_parser = parse_range, allow_hyphen_values = true)]
        lambda_range: (f64, f64),
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
        #[arg(long, default_value_t = DEFAULT_DRIFT_TOL)]
        drift_tol: f64,
        /// Radial steps in the drift gauge (0 = raw rho).
        #[arg(long, default_value_t = 2)]
        gauge_steps: usize,
        /// Wall-clock budget in seconds for the scan.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Rotation number of one orbit of the time-1 map.
    #[command(allow_negative_numbers = true)]
    Rotation {
        #[arg(long = "A", default_value_t = 64.0)]
        amplitude: f64,
        #[arg(long)]
        rho0: f64,
        #[arg(long, default_value_t = 0.0)]
        theta0: f64,
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
    },
    /// Forward and backward boundedness sweep over an (x, v) grid.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[arg(long = "A", value_delimiter = ',', default_value = "1")]
        amplitudes: Vec<f64>,
        #[arg(long, default_value = "-2.5:2.5", value_parser = parse_range, allow_hyphen_values = true)]
        x_range: (f64, f64),
        #[arg(long, default_value_t = 10)]
        nx: usize,
        #[arg(long, default_value = "-2.5:2.5", value_parser = parse_range, allow_hyphen_values = true)]
        v_range: (f64, f64),
        #[arg(long, default_value_t = 10)]
        nv: usize,
        #[arg(long, default_value_t = 1000.0)]
        horizon: f64,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<f64>,
        /// Jitter as a fraction of the grid spacing (needs --seed).
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((lo, hi))
}

/// Failures sorted into the documented exit codes.
enum Failure {
    Spec(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_) | Error::RegularityViolation => Failure::Spec(e.into()),
            e => Failure::Numerical(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

struct Ctx {
    global: Global,
    command: Command,
}

impl Ctx {
    fn integrator(&self) -> IntegratorConfig {
        self.global
            .tol
            .map_or_else(IntegratorConfig::default, IntegratorConfig::with_tol)
    }

    fn spec(&self) -> Outcome<CoefficientSpec> {
        let path = self
            .global
            .config
            .as_ref()
            .ok_or_else(|| Failure::Spec(anyhow!("--config is required for this command")))?;
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::Spec)?;
        CoefficientSpec::from_json(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(Failure::Spec)
    }

    fn valid_spec(&self) -> Outcome<CoefficientSpec> {
        let spec = self.spec()?;
        let report = validate_spec(&spec);
        if !report.is_pass() {
            return Err(Error::InvalidSpec(report).into());
        }
        Ok(spec)
    }

    /// Inputs recorded in the envelope: the command, its arguments and the
    /// spec contents (not just the path).
    fn envelope_config(&self) -> serde_json::Value {
        let spec = self.spec().ok().map(|s| s.canonical_json());
        serde_json::json!({
            "command": self.command,
            "global": self.global,
            "spec": spec,
        })
    }

    /// Writes the envelope to `--out` (or stdout), plus `csv` when `--out`
    /// names a `.csv` file.
    fn emit(&self, payload: Payload, csv: Option<String>) -> Outcome {
        let env = ReportEnvelope::new(&self.envelope_config(), payload)?;
        match &self.global.out {
            None => {
                let text = serde_json::to_string_pretty(&env).map_err(anyhow::Error::from)?;
                let mut out = std::io::stdout().lock();
                match writeln!(out, "{text}") {
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                    r => r.map_err(anyhow::Error::from)?,
                }
            }
            Some(path) if is_csv(path) => {
                let csv = csv.ok_or_else(|| anyhow!("this command has no CSV form"))?;
                write_atomic(path, csv.as_bytes())?;
                write_report(&env, &path.with_extension("json"))?;
            }
            Some(path) => write_report(&env, path)?,
        }
        Ok(())
    }
}

fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn trig(n: u32) -> Outcome<Arc<revbound::special::GeneralizedTrig>> {
    Ok(Arc::new(build_trig(n, &IntegratorConfig::default())?))
}

fn run(ctx: &Ctx) -> Outcome {
    match ctx.command.clone() {
        Command::Validate => {
            let spec = ctx.spec()?;
            let report = validate_spec(&spec);
            let pass = report.is_pass();
            if !pass {
                eprintln!("{report}");
            }
            ctx.emit(Payload::Validation(report), None)?;
            if !pass {
                return Err(Failure::Spec(anyhow!("spec violates the hypotheses")));
            }
        }
        Command::Period { n } => {
            let t = trig(n)?;
            let report = PeriodReport {
                n,
                period: compute_period(n),
                period_check: compute_period_tanh_sinh(n),
                closure: t.closure(),
                eval_err: t.eval_err(),
            };
            ctx.emit(Payload::Period(report), None)?;
        }
        Command::Simulate {
            amplitude,
            x0,
            v0,
            t1,
            samples,
        } => {
            let cfg = SystemConfig::rescaled(ctx.valid_spec()?, amplitude)?;
            let icfg = IntegratorConfig {
                dense_output: true,
                ..ctx.integrator()
            };
            let traj = integrate(&cfg, &icfg, State::new(x0, v0, 0.0), t1)?;
            let samples = traj.sample_uniform(samples);
            let csv = trajectory_csv(&samples);
            let report = TrajectoryReport {
                amplitude,
                rescaled: true,
                samples,
                accepted: traj.accepted,
                rejected: traj.rejected,
            };
            ctx.emit(Payload::Trajectory(report), Some(csv))?;
        }
        Command::Aa {
            n,
            rho,
            theta,
            x,
            y,
        } => {
            let chart = ActionAngle::new(trig(n)?);
            let p = match (rho, theta, x, y) {
                (Some(r), Some(t), _, _) => AAPoint::new(r, t),
                (_, _, Some(x), Some(y)) => chart.to_action_angle(x, y)?,
                _ => return Err(Failure::Numerical(anyhow!("give --rho/--theta or --x/--y"))),
            };
            let (x, y) = chart.from_action_angle(p);
            let q = chart.to_action_angle(x, y)?;
            let dth = (q.theta - p.theta + 0.5).rem_euclid(1.0) - 0.5;
            let sample = ChartSample {
                x,
                y,
                rho: p.rho,
                theta: p.theta,
                roundtrip_error: (q.rho - p.rho).abs().max(dth.abs()),
                jacobian: chart.jacobian_check(p),
            };
            ctx.emit(Payload::ActionAngle(vec![sample]), None)?;
        }
        Command::NormalformVerify {
            amplitude,
            radial,
            angular,
            domain,
            scaling,
            a_values,
        } => {
            let spec = ctx.valid_spec()?;
            let t = trig(spec.n)?;
            let dom = AnnulusDomain::new(domain.0, domain.1)?;
            if scaling.is_empty() {
                let pt = PerturbationTerms::new(SystemConfig::rescaled(spec, amplitude)?, t)?;
                let opts = ChainOptions {
                    domain: dom,
                    resolution: GridResolution::default(),
                };
                let ch = compose_chain(&pt, radial, angular, &opts)?;
                let report = NormalFormReport {
                    amplitude,
                    radial_steps: radial,
                    angular_steps: angular,
                    sup_v: ch.steps.iter().map(|s| s.sup_v).collect(),
                    domains: ch.domains.clone(),
                    initial_g1_sup: ch.initial_g1_sup,
                    sup_f: ch.sup_f(),
                    sup_g: ch.sup_g(),
                    sup_h: ch.sup_h(),
                    symmetry: ch.symmetry(),
                };
                ctx.emit(Payload::NormalForm(report), None)?;
            } else {
                let family = ScalingFamily {
                    spec,
                    trig: t,
                    icfg: ctx.global.tol.map_or(
                        IntegratorConfig::with_tol(1e-13),
                        IntegratorConfig::with_tol,
                    ),
                    lambda_range: (2.0, 3.0),
                };
                let mut reports = Vec::new();
                for name in &scaling {
                    let term: ScalingTerm = name.parse()?;
                    let grid = match term {
                        ScalingTerm::Xi | ScalingTerm::Eta => ScalingGrid::twist(),
                        _ => ScalingGrid::default(),
                    };
                    let r = order_scaling(&family, term, &dom, &a_values, &grid)?;
                    eprintln!(
                        "{term:?}: slope {:.4} (expected {}), residual {:.2e}",
                        r.fitted_slope, r.gamma_expected, r.residual
                    );
                    reports.push(r);
                }
                let csv = reports.iter().map(scaling_csv).collect::<String>();
                ctx.emit(Payload::Scaling(reports), Some(csv))?;
            }
        }
        Command::PoincareAtlas {
            amplitude,
            lambda_range,
            samples,
            iters,
            drift_tol,
            gauge_steps,
            time_limit,
        } => {
            let spec = ctx.valid_spec()?;
            let t = trig(spec.n)?;
            let icfg = ctx.global.tol.map_or(
                IntegratorConfig::with_tol(1e-10),
                IntegratorConfig::with_tol,
            );
            let map = PoincareMap::new(SystemConfig::rescaled(spec, amplitude)?, t, icfg)?;
            let settings = AtlasSettings {
                lambda_range,
                samples,
                iterates: iters,
                drift_tol,
                class: default_class(map.constants(), amplitude),
            };
            let mut exp = AtlasExperiment::new(settings);
            exp.gauge_radial_steps = gauge_steps;
            exp.confinement_iterates = iters;
            let deadline = time_limit.map(|s| Instant::now() + Duration::from_secs_f64(s));
            let outcome = run_atlas_experiment(&map, &exp, deadline)?;
            eprintln!(
                "{} rows, {} candidates, {} confirmed{}",
                outcome.atlas.rows.len(),
                outcome.atlas.candidates().count(),
                outcome.confirmed(),
                if outcome.atlas.complete {
                    ""
                } else {
                    " (scan cut short by the time limit)"
                }
            );
            match &outcome.confinement {
                Some(c) => eprintln!(
                    "confinement: confined={} excess={:.3e}",
                    c.confined, c.excess
                ),
                None => eprintln!("confinement: no adjacent pair of confirmed curves"),
            }
            let csv = atlas_csv(&outcome.atlas);
            if let Some(c) = outcome.confinement.clone() {
                if let Some(path) = &ctx.global.out {
                    let env = ReportEnvelope::new(&ctx.envelope_config(), Payload::Confinement(c))?;
                    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
                    write_report(
                        &env,
                        &path.with_file_name(format!("{stem}.confinement.json")),
                    )?;
                }
            }
            ctx.emit(Payload::Atlas(outcome.atlas), Some(csv))?;
        }
        Command::Rotation {
            amplitude,
            rho0,
            theta0,
            iters,
        } => {
            let spec = ctx.valid_spec()?;
            let t = trig(spec.n)?;
            let icfg = ctx.global.tol.map_or(
                IntegratorConfig::with_tol(1e-10),
                IntegratorConfig::with_tol,
            );
            let map = PoincareMap::new(SystemConfig::rescaled(spec, amplitude)?, t, icfg)?;
            let orbit = iterate(&map, AAPoint::new(rho0, theta0), iters);
            let est = rotation_number(&orbit)?;
            ctx.emit(Payload::Rotation(est), None)?;
        }
        Command::Sweep {
            amplitudes,
            x_range,
            nx,
            v_range,
            nv,
            horizon,
            checkpoints,
            jitter,
        } => {
            let spec = ctx.valid_spec()?;
            let jitter = match (ctx.global.seed, jitter) {
                (_, 0.0) => None,
                (Some(seed), fraction) => Some(Jitter { seed, fraction }),
                (None, _) => return Err(Failure::Numerical(anyhow!("--jitter needs --seed"))),
            };
            let sc = SweepConfig {
                spec_source: ctx.global.config.clone(),
                spec,
                amplitudes,
                x: Axis {
                    lo: x_range.0,
                    hi: x_range.1,
                    count: nx,
                },
                v: Axis {
                    lo: v_range.0,
                    hi: v_range.1,
                    count: nv,
                },
                jitter,
                horizon,
                checkpoints,
                integrator: ctx.integrator(),
                output: ctx.global.out.clone(),
            };
            let report = boundedness_sweep(&sc)?;
            for s in &report.summaries {
                eprintln!(
                    "A = {}: {} orbits, {} escapes, max ratio {:.6}",
                    s.amplitude, s.orbits, s.escapes, s.max_ratio
                );
            }
            let csv = sweep_csv(&report);
            ctx.emit(Payload::Sweep(report), Some(csv))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        global: cli.global,
        command: cli.command,
    };
    match run(&ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Spec(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID_SPEC)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
