//! Acceptance suite: one PASS/FAIL line per criterion, each with its
//! measured values and runtime. Select criteria by number:
//! `cargo test --test acceptance -- 1 4 7`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use revbound::actionangle::{AAPoint, ActionAngle};
use revbound::dynamics::{IntegratorConfig, SystemConfig};
use revbound::experiments::{
    boundedness_sweep, run_atlas_experiment, AtlasExperiment, Axis, SweepConfig,
};
use revbound::normalform::{
    build_angular_step, build_radial_step, compose_chain, order_scaling, twist_scaling,
    AnnulusDomain, ChainOptions, GridResolution, PerturbationTerms, ScalingFamily, ScalingGrid,
    ScalingTerm,
};
use revbound::poincare::{
    default_class, iterate, reversibility_defect, rotation_number, AnnulusMap, AtlasSettings,
    Involution, PoincareMap, RigidRotation, UnperturbedTwist, DEFAULT_DRIFT_TOL,
};
use revbound::special::{build_trig, compute_period, GeneralizedTrig};
use revbound::CoefficientSpec;

// Criterion 1
const PERIOD0_TOL: f64 = 1e-12;
const PERIOD1_TOL: f64 = 1e-10;
/// Gamma(1/4) rounded to f64.
const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;
// Criterion 2
const IDENTITY_TOL: f64 = 1e-9;
const IDENTITY_POINTS: usize = 10_000;
// Criterion 3
const JACOBIAN_TOL: f64 = 1e-6;
const ROUNDTRIP_TOL: f64 = 1e-8;
// Criterion 4
const PARITY_TOL: f64 = 1e-10;
// Criterion 5
const SLOPE_TOL: f64 = 0.2;
const SCALING_A: [f64; 4] = [16.0, 32.0, 64.0, 128.0];
// Criterion 6
const REVERSIBILITY_TOL: f64 = 1e-7;
const TWIST_TOL: f64 = 1e-9;
/// Integrator tolerances at which the time-1 map meets the two bounds.
const REVERSIBILITY_RTOL: f64 = 1e-14;
const TWIST_RTOL: f64 = 1e-15;
// Criterion 7
const ROTATION_TOL: f64 = 1e-8;
const ROTATION_RTOL: f64 = 1e-14;
// Criterion 8
const ATLAS_MIN_CURVES: usize = 3;
const CONFINEMENT_TOL: f64 = 1e-3;
const ATLAS_RTOL: f64 = 1e-10;
// Criterion 9
const SWEEP_RATIO_CHANGE: f64 = 0.05;
const SWEEP_RTOL: f64 = 1e-10;

const DEMO_AMPLITUDE: f64 = 64.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn demo_spec() -> CoefficientSpec {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/demo.json");
    CoefficientSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn trig(n: u32) -> Arc<GeneralizedTrig> {
    Arc::new(build_trig(n, &IntegratorConfig::default()).unwrap())
}

fn demo_map(tol: f64) -> PoincareMap {
    let spec = demo_spec();
    let cfg = SystemConfig::rescaled(spec, DEMO_AMPLITUDE).unwrap();
    PoincareMap::new(cfg, trig(2), IntegratorConfig::with_tol(tol)).unwrap()
}

fn period_oracle() -> Verdict {
    // n = 1: T = 4 x_max int_0^1 (1 - s^4)^(-1/2) ds = 2^(1/4) B(1/4, 1/2),
    // B(1/4, 1/2) = Gamma(1/4)^2 / sqrt(2 pi)
    let oracle1 = 2f64.powf(0.25) * GAMMA_QUARTER * GAMMA_QUARTER / (2.0 * PI).sqrt();
    let e0 = (compute_period(0) - 2.0 * PI).abs();
    let e1 = (compute_period(1) - oracle1).abs();
    Verdict {
        pass: e0 <= PERIOD0_TOL && e1 <= PERIOD1_TOL,
        detail: format!("|T(0) - 2pi| = {e0:.2e}, |T(1) - 2^(1/4) B(1/4,1/2)| = {e1:.2e}"),
    }
}

fn identity_suite() -> Verdict {
    let mut worst = [0.0f64; 3];
    for n in [0u32, 1, 2, 3, 5] {
        let t = trig(n);
        let t0 = t.period();
        let p = 2 * n as i32 + 1;
        for k in 0..IDENTITY_POINTS {
            let s = -2.0 * t0 + 4.0 * t0 * (k as f64 + 0.5) / IDENTITY_POINTS as f64;
            let (sv, cv) = t.eval(s);
            let (ds, dc) = t.eval_derivative(s);
            worst[0] = worst[0].max((ds - cv).abs()).max((dc + sv.powi(p)).abs());
            worst[1] = worst[1].max(t.energy_residual(s).abs());
            let (sm, cm) = t.eval(-s);
            worst[2] = worst[2].max((sm + sv).abs()).max((cm - cv).abs());
        }
    }
    Verdict {
        pass: worst.iter().all(|w| *w <= IDENTITY_TOL),
        detail: format!(
            "derivative {:.2e}, energy {:.2e}, parity {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    }
}

fn chart_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut jac, mut rt) = (0.0f64, 0.0f64);
    for n in [1u32, 2, 3] {
        let chart = ActionAngle::new(trig(n));
        for _ in 0..100 {
            let p = AAPoint::new(rng.gen_range(0.5..50.0), rng.gen_range(0.0..1.0));
            jac = jac.max((chart.jacobian_check(p) - 1.0).abs());
            let (x, y) = chart.from_action_angle(p);
            let q = chart.to_action_angle(x, y).unwrap();
            let dth = (q.theta - p.theta + 0.5).rem_euclid(1.0) - 0.5;
            rt = rt.max(((q.rho - p.rho) / p.rho).abs()).max(dth.abs());
        }
    }
    Verdict {
        pass: jac <= JACOBIAN_TOL && rt <= ROUNDTRIP_TOL,
        detail: format!("max ||det| - 1| = {jac:.2e}, roundtrip {rt:.2e}"),
    }
}

fn symmetry_suite() -> Verdict {
    let pt = PerturbationTerms::new(
        SystemConfig::rescaled(demo_spec(), DEMO_AMPLITUDE).unwrap(),
        trig(2),
    )
    .unwrap();
    let dom = AnnulusDomain::new(3.5, 10.0).unwrap();
    let (nr, nth, nt) = (64, 64, 16);
    let rhos: Vec<f64> = (0..nr)
        .map(|i| dom.inner + (dom.outer - dom.inner) * i as f64 / (nr - 1) as f64)
        .collect();
    // f odd in theta, g even in theta, both even in t
    let mut terms = 0.0f64;
    for &r in &rhos {
        for j in 0..nth {
            let th = j as f64 / nth as f64;
            for k in 0..nt {
                let t = k as f64 / nt as f64;
                let v = pt.eval_terms(r, th, t);
                let m = pt.eval_terms(r, -th, t);
                let w = pt.eval_terms(r, th, -t);
                for d in [
                    v.f1 + m.f1,
                    v.f2 + m.f2,
                    v.g1 - m.g1,
                    v.g2 - m.g2,
                    v.f1 - w.f1,
                    v.f2 - w.f2,
                    v.g1 - w.g1,
                    v.g2 - w.g2,
                ] {
                    terms = terms.max(d.abs());
                }
            }
        }
    }
    let radial = build_radial_step(&pt, &dom)
        .unwrap()
        .parity_defect(&rhos, nth, nt);
    let angular = build_angular_step(&pt, &dom, None)
        .unwrap()
        .parity_defect(&rhos, nth, nt);
    let opts = ChainOptions {
        domain: dom,
        resolution: GridResolution::default(),
    };
    let chain = compose_chain(&pt, 2, 2, &opts).unwrap().symmetry();
    let chain_max = chain.f.max(chain.g).max(chain.h);
    Verdict {
        pass: terms.max(radial.max()).max(angular.max()).max(chain_max) <= PARITY_TOL,
        detail: format!(
            "f/g {terms:.2e}, V1 {:.2e}, U1 {:.2e}, V2 {:.2e}, U2 {:.2e}, chain(2,2) F/G/H {:.2e}",
            radial.v, radial.u, angular.v, angular.u, chain_max
        ),
    }
}

fn scaling_suite() -> Verdict {
    let dom = AnnulusDomain::new(3.5, 10.0).unwrap();
    let family = ScalingFamily {
        spec: demo_spec(),
        trig: trig(2),
        icfg: IntegratorConfig::with_tol(1e-12),
        lambda_range: (2.0, 3.0),
    };
    let grid = ScalingGrid::default();
    let mut reports = Vec::new();
    for term in [ScalingTerm::V1, ScalingTerm::F1, ScalingTerm::F2] {
        reports.push(order_scaling(&family, term, &dom, &SCALING_A, &grid).unwrap());
    }
    reports.extend(twist_scaling(&family, &SCALING_A, &ScalingGrid::twist()).unwrap());
    let detail = reports
        .iter()
        .map(|r| {
            format!(
                "{:?} {:+.3} (target {:+}, sups {})",
                r.term,
                r.fitted_slope,
                r.gamma_expected,
                r.sup_norms
                    .iter()
                    .map(|s| format!("{s:.2e}"))
                    .collect::<Vec<_>>()
                    .join("/")
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    Verdict {
        pass: reports.iter().all(|r| r.within(SLOPE_TOL)),
        detail,
    }
}

fn reversibility_suite() -> Verdict {
    let map = demo_map(REVERSIBILITY_RTOL);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rev = 0.0f64;
    for _ in 0..20 {
        let lam: f64 = rng.gen_range(2.0..3.0);
        let z = AAPoint::new(lam * lam, rng.gen_range(0.0..1.0));
        rev = rev.max(reversibility_defect(&map, z, Involution::Angle).unwrap());
    }
    // unperturbed limit against the closed-form twist
    let spec = CoefficientSpec::unperturbed(2);
    let cfg = SystemConfig::rescaled(spec, DEMO_AMPLITUDE).unwrap();
    let flat = PoincareMap::new(cfg, trig(2), IntegratorConfig::with_tol(TWIST_RTOL)).unwrap();
    let twist = UnperturbedTwist {
        k: *flat.constants(),
        amplitude: DEMO_AMPLITUDE,
    };
    let mut limit = 0.0f64;
    for (r, th) in [
        (4.0, 0.0),
        (5.3, 0.21),
        (6.25, 0.5),
        (7.7, 0.66),
        (9.0, 0.93),
    ] {
        let p = AAPoint::new(r, th);
        let (a, b) = (flat.step(p).unwrap(), twist.step(p).unwrap());
        limit = limit.max((a.point.rho - b.point.rho).hypot(a.lift - b.lift));
    }
    Verdict {
        pass: rev <= REVERSIBILITY_TOL && limit <= TWIST_TOL,
        detail: format!(
            "max |RPRP z - z| = {rev:.2e} (rtol {REVERSIBILITY_RTOL:e}), twist limit {limit:.2e} (rtol {TWIST_RTOL:e})"
        ),
    }
}

fn rotation_suite() -> Verdict {
    let gamma = (5f64.sqrt() - 1.0) / 2.0;
    let orbit = iterate(&RigidRotation { gamma }, AAPoint::new(1.0, 0.0), 10_000);
    let golden = (rotation_number(&orbit).unwrap().omega - gamma).abs();
    // integrated unperturbed map at a moderate amplitude, 10^4 iterates
    let a = 4.0;
    let cfg = SystemConfig::rescaled(CoefficientSpec::unperturbed(2), a).unwrap();
    let map = PoincareMap::new(cfg, trig(2), IntegratorConfig::with_tol(ROTATION_RTOL)).unwrap();
    let k = *map.constants();
    let mut freq = 0.0f64;
    for rho in [4.0, 6.25, 9.0] {
        let est = rotation_number(&iterate(&map, AAPoint::new(rho, 0.0), 10_000)).unwrap();
        let d =
            (est.omega_mod1() - k.frequency(a, rho).rem_euclid(1.0) + 0.5).rem_euclid(1.0) - 0.5;
        freq = freq.max(d.abs());
    }
    Verdict {
        pass: golden <= ROTATION_TOL && freq <= ROTATION_TOL,
        detail: format!("golden {golden:.2e}, unperturbed (A = {a}) {freq:.2e}"),
    }
}

fn atlas_suite(budget: Duration, start: Instant) -> Verdict {
    let map = demo_map(ATLAS_RTOL);
    let settings = AtlasSettings {
        lambda_range: (2.0, 3.0),
        samples: 50,
        iterates: 10_000,
        drift_tol: DEFAULT_DRIFT_TOL,
        class: default_class(map.constants(), DEMO_AMPLITUDE),
    };
    let mut exp = AtlasExperiment::new(settings);
    exp.confinement_tol = CONFINEMENT_TOL;
    let outcome = run_atlas_experiment(&map, &exp, Some(start + budget)).unwrap();
    let atlas = &outcome.atlas;
    let candidates = outcome.candidates();
    let confined = outcome.confinement.as_ref().is_some_and(|c| c.confined);
    let progress = if atlas.complete {
        String::new()
    } else {
        let per_row = atlas.elapsed_seconds / atlas.rows.len().max(1) as f64;
        format!(
            "; scan stopped at the runtime bound after {}/{} radii (~{:.0} s per radius)",
            atlas.rows.len(),
            settings.samples,
            per_row
        )
    };
    let conf = match &outcome.confinement {
        Some(c) => format!(", confinement excess {:.2e}", c.excess),
        None => ", confinement not run".into(),
    };
    Verdict {
        pass: atlas.complete && candidates >= ATLAS_MIN_CURVES && confined,
        detail: format!(
            "{candidates} candidates, {} Diophantine-confirmed{conf}{progress}",
            outcome.confirmed()
        ),
    }
}

fn sweep_suite() -> Verdict {
    let sc = SweepConfig {
        spec_source: None,
        spec: demo_spec(),
        amplitudes: vec![1.0],
        x: Axis {
            lo: -2.5,
            hi: 2.5,
            count: 10,
        },
        v: Axis {
            lo: -2.5,
            hi: 2.5,
            count: 10,
        },
        jitter: None,
        horizon: 2000.0,
        checkpoints: vec![1000.0],
        integrator: IntegratorConfig::with_tol(SWEEP_RTOL),
        output: None,
    };
    let report = boundedness_sweep(&sc).unwrap();
    let s = &report.summaries[0];
    let (r1, r2) = (s.checkpoint_max_ratios[0], s.max_ratio);
    let change = (r2 - r1).abs() / r1;
    Verdict {
        pass: report.escapes() == 0 && s.failures == 0 && change < SWEEP_RATIO_CHANGE,
        detail: format!(
            "{} orbits, {} escapes, max ratio {r1:.6} (T = 1e3) -> {r2:.6} (T = 2e3), change {:.3}%, mirror defect {:.2e}",
            s.orbits,
            s.escapes,
            100.0 * change,
            s.mirror_defect.unwrap_or(f64::NAN)
        ),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let selected: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    type Check = Box<dyn Fn(Instant) -> Verdict>;
    let criteria: Vec<(u32, &str, u64, Check)> = vec![
        (1, "period oracle", 1, Box::new(|_| period_oracle())),
        (
            2,
            "generalized trig identities",
            10,
            Box::new(|_| identity_suite()),
        ),
        (3, "action-angle chart", 10, Box::new(|_| chart_suite())),
        (4, "parity suite", 30, Box::new(|_| symmetry_suite())),
        (
            5,
            "order-estimate scaling",
            300,
            Box::new(|_| scaling_suite()),
        ),
        (
            6,
            "time-1 map reversibility",
            60,
            Box::new(|_| reversibility_suite()),
        ),
        (7, "rotation numbers", 30, Box::new(|_| rotation_suite())),
        (
            8,
            "invariant-curve atlas and confinement",
            600,
            Box::new(|start| atlas_suite(Duration::from_secs(600), start)),
        ),
        (9, "boundedness sweep", 900, Box::new(|_| sweep_suite())),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = check(start);
        let secs = start.elapsed().as_secs_f64();
        let in_time = secs < budget as f64;
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {}; {secs:.1} s of {budget} s{}",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            if in_time {
                ""
            } else {
                " (over the runtime bound)"
            }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
