//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `BLOCKED` cannot be met as stated (see the decisions
//! ledger); they still run at the stated tolerances and are reported FAIL.
//! The process exits nonzero if any other criterion fails, or if a blocked
//! criterion unexpectedly passes.

mod common;

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use common::{compare_derivative, random_expr, random_point, random_polynomial, random_polynomial_field, Comparison};
use hamflow::check::{Check, ResidualStats};
use hamflow::dynamics::{integrate_ode, observe_drift_fn, Method};
use hamflow::exterior::{curl, ext_d, flat, sharp, wedge, Form, VectorField3};
use hamflow::expr::{parse, Expr, Tape, Var};
use hamflow::frenet::FrameFields;
use hamflow::halphen::{self, fixtures, SUITE_SEED};
use hamflow::poisson::{
    frobenius_coefficient, hamiltonian_residual, homotopy_potential, jacobi_residual, min_angle, pencil_along_paths,
    poisson_from_riccati, reconstruct_casimir, riccati_integrate, HomotopyOptions, ReconstructError,
    RiccatiCoefficients, TubeOptions,
};
use hamflow::sampling::{rng, SampleBox};

/// Criteria that fail for reasons recorded in the decisions ledger.
const BLOCKED: &[(u32, &str)] = &[
    (5, "the Euler top from (1, 0.8, 0.6) blows up near t = 1.2553 < 5"),
    (8, "alpha^d alpha = rho nu, not rho^-1; beta^d beta and gamma^d gamma hit rounding above 1e-12 near coincidence planes"),
];

const SEED: u64 = 20240601;

fn field(name: &str, c: [&str; 3]) -> VectorField3 {
    VectorField3::parse(name, c).unwrap()
}

fn rotation() -> VectorField3 {
    field("rotation", ["-y", "x", "0"])
}

fn off_axis_box() -> SampleBox {
    SampleBox::cube(2.0).excluding(vec![parse("sqrt(x^2 + y^2)").unwrap()], 0.1)
}

fn threshold(name: &str, s: &ResidualStats, tol: f64) -> Check {
    Check::threshold(name, s.max_abs, s.samples, tol)
}

fn frame_suite() -> Vec<Check> {
    let mut out = Vec::new();
    for (name, v, points) in [
        ("rotation", rotation(), off_axis_box().sample(100, SEED, 0)),
        ("darboux_halphen", fixtures().v, halphen::admissible_box().sample(100, SEED, 0)),
    ] {
        let frames = FrameFields::new(&v);
        let mut ortho = ResidualStats::default();
        let mut volume = ResidualStats::default();
        let mut lost = 0;
        for &p in &points {
            match frames.frame_at(p) {
                Ok(f) => {
                    ortho.push(f.orthonormality_residual());
                    volume.push(f.volume_pairing() - 1.0);
                }
                Err(_) => lost += 1,
            }
        }
        out.push(threshold(&format!("{name}_orthonormality"), &ortho, 1e-12));
        out.push(threshold(&format!("{name}_volume_pairing"), &volume, 1e-12));
        out.push(Check::threshold(format!("{name}_frames_defined"), lost as f64, points.len(), 0.0));
    }
    out
}

fn jacobi_frobenius() -> Vec<Check> {
    let mut r = rng(SEED, 2);
    let mut identity = ResidualStats::default();
    let mut scaling = ResidualStats::default();
    for _ in 0..20 {
        let j = random_polynomial_field(&mut r, 2);
        let f = random_polynomial(&mut r, 1) + 3.0;
        let fj = j.scale(&f);
        let a = flat(&fj);
        let scaled = wedge(&a, &ext_d(&a).unwrap()).components()[0].clone();
        let tape = Tape::compile(&[
            jacobi_residual(&j),
            frobenius_coefficient(&j),
            j.norm() * curl(&j).norm(),
            scaled,
            f.powi(2) * frobenius_coefficient(&j),
            fj.norm() * curl(&fj).norm(),
        ]);
        for _ in 0..100 {
            let v = tape.eval(random_point(&mut r, 2.0), 0.0).unwrap();
            identity.push((v[0] - v[1]).abs() / v[2].max(f64::MIN_POSITIVE));
            scaling.push((v[3] - v[4]).abs() / v[5].max(f64::MIN_POSITIVE));
        }
    }
    vec![
        threshold("jacobi_equals_frobenius_relative", &identity, 1e-10),
        threshold("square_scaling_relative", &scaling, 1e-9),
    ]
}

fn riccati_oracle() -> Vec<Check> {
    let tangent = |_: f64| [1.0, 0.0, 1.0];
    let path = riccati_integrate(&RiccatiCoefficients::Explicit(&tangent), [0.0; 3], 0.0, 3.2, 1e-3).unwrap();
    let at_half = path
        .samples
        .iter()
        .find(|r| (r.s - 0.5).abs() < 1e-9)
        .map(|r| (r.mu().unwrap() - 0.5f64.tan()).abs())
        .unwrap_or(f64::NAN);
    let past: ResidualStats = path
        .samples
        .iter()
        .filter(|r| r.s > FRAC_PI_2 && r.s < FRAC_PI_2 + 1.5)
        .map(|r| r.mu().map_or(f64::INFINITY, |m| m - r.s.tan()))
        .collect();
    let zero = |_: f64| [0.0; 3];
    let still = riccati_integrate(&RiccatiCoefficients::Explicit(&zero), [0.0; 3], 0.7, 10.0, 1e-3).unwrap();
    let drift: ResidualStats = still.samples.iter().map(|r| r.mu().unwrap() - 0.7).collect();
    vec![
        Check::threshold("tan_at_half", at_half, 1, 1e-8),
        threshold("tan_past_pole", &past, 1e-6)
            .with_note("s in (pi/2, pi/2 + 1.5); the interval as written, (pi/2, 1.5), is empty"),
        threshold("zero_coefficients_constant", &drift, 1e-14),
    ]
}

fn poisson_construction() -> Vec<Check> {
    let v = rotation();
    let frames = FrameFields::new(&v);
    let report = |mu0: f64| {
        let path = riccati_integrate(&RiccatiCoefficients::FieldDriven(&frames), [1.0, 0.0, 0.5], mu0, 5.0, 1e-3)
            .expect("rotation frame is defined off the axis");
        poisson_from_riccati(&frames, &path, TubeOptions::default()).expect("tube stays off the axis")
    };
    let r0 = report(0.0);
    let r1 = report(1.0);
    let mut out = vec![
        threshold("jacobi_mu0_0", &r0.jacobi, 1e-8),
        threshold("jacobi_mu0_1", &r1.jacobi, 1e-8),
        Check::nonvanishing("pointwise_independent", min_angle(&r0, &r1).unwrap_or(0.0), r0.samples.len(), 1e-6)
            .with_note("smallest angle between the two Poisson vectors"),
    ];
    for m in pencil_along_paths(&r1, &r0, &[-2.0, -1.0, 1.0, 2.0]) {
        out.push(threshold(&format!("pencil_c_{}", m.c), &m.stats, 1e-8));
    }
    out
}

fn hamiltonian_fixtures() -> Vec<Check> {
    let points = SampleBox::cube(2.0).sample(100, SEED, 0);
    let top = field("euler_top", ["y*z", "z*x", "x*y"]);
    let h1 = parse("x^2 - y^2").unwrap();
    let h2 = parse("y^2 - z^2").unwrap();
    let j = field("J", ["x/2", "-y/2", "0"]);
    let top_res = hamiltonian_residual(&top, &j, &h2, &points);
    let rot = hamiltonian_residual(&rotation(), &field("J", ["-x", "-y", "0"]), &Expr::z(), &points);
    let mut out = vec![threshold("euler_top_residual", &top_res.residual, 1e-12)];
    match integrate_ode(&top, [1.0, 0.8, 0.6], (0.0, 5.0), Method::Rk4 { h: 1e-3 }) {
        Ok(traj) => {
            for (name, h) in [("drift_x2_minus_y2", &h1), ("drift_y2_minus_z2", &h2)] {
                let tape = Tape::compile(std::slice::from_ref(h));
                let d = observe_drift_fn(&traj, |t, x| Ok(tape.eval(x, t)?[0])).unwrap();
                out.push(Check::threshold(name, d.relative, traj.samples.len(), 1e-8));
            }
        }
        Err(e) => out.push(Check::fail("euler_top_trajectory", format!("t in [0, 5]: {e}"))),
    }
    // The same drift bound on the interval where the solution exists.
    match integrate_ode(&top, [1.0, 0.8, 0.6], (0.0, 1.0), Method::Rk4 { h: 1e-3 }) {
        Ok(traj) => {
            let worst = [&h1, &h2]
                .iter()
                .map(|h| {
                    let tape = Tape::compile(std::slice::from_ref(*h));
                    observe_drift_fn(&traj, |t, x| Ok(tape.eval(x, t)?[0])).unwrap().relative
                })
                .fold(0.0, f64::max);
            out.push(
                Check::threshold("drift_before_blowup_diagnostic", worst, traj.samples.len(), 1e-8)
                    .with_note("t in [0, 1]"),
            );
        }
        Err(e) => out.push(Check::fail("drift_before_blowup_diagnostic", e.to_string())),
    }
    out.push(threshold("rotation_residual", &rot.residual, 1e-12));
    out
}

fn reconstruction() -> Vec<Check> {
    let v = rotation();
    let points = off_axis_box().sample(50, SEED, 0);
    let mut out = Vec::new();
    match reconstruct_casimir(&v, &field("J", ["-x", "-y", "0"]), &points, &HomotopyOptions::default()) {
        Ok((c, _)) => {
            let offset = |p: [f64; 3]| c.value(p).unwrap() + 0.5 * (p[0] * p[0] + p[1] * p[1]);
            let c0 = offset(points[0]);
            let closed: ResidualStats = points.iter().map(|&p| offset(p) - c0).collect();
            out.push(threshold("rotation_casimir_closed_form", &closed, 1e-8));
            let mut drift = 0.0f64;
            for &p in points.iter().take(5) {
                let traj = integrate_ode(&v, p, (0.0, 6.3), Method::Rk4 { h: 1e-3 }).unwrap();
                let d = observe_drift_fn(&traj, |_, x| Ok(c.value(x)?)).unwrap();
                drift = drift.max(d.max_abs);
            }
            out.push(Check::threshold("rotation_casimir_drift", drift, 5, 1e-10).with_note("max |C(x(t)) - C(x(0))| over one period"));
        }
        Err(e) => out.push(Check::fail("rotation_casimir", e.to_string())),
    }
    let f = fixtures();
    let j = sharp(&f.gamma).unwrap();
    let hp = halphen::admissible_box().sample(50, SEED, 0);
    out.push(match reconstruct_casimir(&f.v, &j, &hp, &HomotopyOptions::default()) {
        Err(ReconstructError::ObstructionGodbillonVey { d_xi_max, .. }) => {
            Check::threshold("darboux_halphen_obstruction", 0.0, hp.len(), 0.0).with_note(format!("max |d xi| = {d_xi_max:e}"))
        }
        Err(e) => Check::fail("darboux_halphen_obstruction", format!("wrong error: {e}")),
        Ok(_) => Check::fail("darboux_halphen_obstruction", "a Casimir was constructed"),
    });
    out
}

fn homotopy() -> Vec<Check> {
    let omega = Form::one_form([Expr::y(), Expr::x(), Expr::zero()]);
    let mut out = Vec::new();
    match homotopy_potential(&omega, &HomotopyOptions::default()) {
        Ok(h) => {
            out.push(Check::threshold("value_at_2_3_0", (h.value([2.0, 3.0, 0.0]).unwrap() - 6.0).abs(), 1, 1e-9));
            let pts = SampleBox::cube(2.0).sample(50, SEED, 0);
            out.push(threshold("dh_minus_omega", &h.verify(&pts).unwrap(), 1e-8));
        }
        Err(e) => out.push(Check::fail("potential", e.to_string())),
    }
    out.extend(halphen::homotopy_degeneracy_demo(&fixtures(), &halphen::dyadic_probes()));
    out
}

fn halphen_suite() -> Vec<Check> {
    const PREFIXES: &[&str] = &[
        "sl2_",
        "symm_",
        "charsymm_",
        "rho_inv_",
        "dual_pairing",
        "maurer_cartan_",
        "local_structure_",
        "frobenius_beta",
        "frobenius_gamma",
        "alpha_wedge_dalpha",
        "godbillon_vey_",
        "integrating_factor_gamma",
    ];
    halphen::verification_suite(100, SUITE_SEED)
        .into_iter()
        .filter(|c| PREFIXES.iter().any(|p| c.name.starts_with(p)) && !c.name.ends_with("_scaled") && !c.name.ends_with("_vs_rho"))
        .collect()
}

fn holonomy() -> Vec<Check> {
    match halphen::holonomy_demo(&fixtures(), halphen::SPOT, &[0.1, 0.05, 0.025]) {
        Ok(h) => {
            let smallest = h.loop_integrals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            vec![
                Check::threshold("scaled_error_decreasing", if h.monotone() { 0.0 } else { 1.0 }, h.sides.len(), 0.0)
                    .with_note(format!("{:?}", h.scaled_errors)),
                Check::nonvanishing("loop_integrals_nonzero", smallest, h.sides.len(), 1e-12),
                Check::threshold("exact_form_control", h.exact_control.abs(), 1, 1e-10),
            ]
        }
        Err(e) => vec![Check::fail("holonomy", e.to_string())],
    }
}

fn halphen_transform() -> Vec<Check> {
    halphen::transform_checks()
        .into_iter()
        .filter(|c| !c.name.ends_with("mobius"))
        .collect()
}

fn parser_derivative() -> Vec<Check> {
    let mut r = rng(SEED, 11);
    let mut worst = 0.0f64;
    let (mut compared, mut unresolved, mut singular) = (0usize, 0usize, 0usize);
    let mut round_trip = ResidualStats::default();
    for _ in 0..100 {
        let e = random_expr(&mut r, 6);
        let back = parse(&e.to_string()).unwrap();
        for _ in 0..100 {
            let p = random_point(&mut r, 1.5);
            if let (Ok(a), Ok(b)) = (e.eval(p, 0.0), back.eval(p, 0.0)) {
                if a.is_finite() {
                    round_trip.push(if a == b { 0.0 } else { (a - b).abs() / a.abs() });
                }
            }
            for var in Var::SPATIAL {
                match compare_derivative(&e, p, var) {
                    Comparison::Error(err) => {
                        worst = worst.max(err);
                        compared += 1;
                    }
                    Comparison::Unresolved => unresolved += 1,
                    Comparison::Singular => singular += 1,
                }
            }
        }
    }
    let total = compared + unresolved + singular;
    vec![
        Check::threshold("derivative_vs_difference", worst, compared, 1e-5)
            .with_note(format!("{compared} of {total} comparisons; {unresolved} beyond difference resolution, {singular} not finite")),
        Check::nonvanishing("comparisons_made", compared as f64 / total as f64, total, 0.8),
        threshold("print_parse_round_trip", &round_trip, 1e-12),
    ]
}

fn main() {
    let criteria: [(u32, &str, fn() -> Vec<Check>); 11] = [
        (1, "frame suite", frame_suite),
        (2, "Jacobi equals Frobenius", jacobi_frobenius),
        (3, "Riccati oracle", riccati_oracle),
        (4, "Poisson construction", poisson_construction),
        (5, "Hamiltonian fixtures", hamiltonian_fixtures),
        (6, "reconstruction", reconstruction),
        (7, "homotopy", homotopy),
        (8, "Darboux-Halphen suite", halphen_suite),
        (9, "holonomy", holonomy),
        (10, "Halphen transform", halphen_transform),
        (11, "parser and derivative", parser_derivative),
    ];
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = Vec::new();
    let start = Instant::now();
    for (id, title, run) in criteria {
        if filter.is_some_and(|f| f != id) {
            continue;
        }
        let t = Instant::now();
        let checks = run();
        let ok = !checks.is_empty() && checks.iter().all(Check::passed);
        let blocked = BLOCKED.iter().find(|(b, _)| *b == id);
        println!(
            "{} criterion {id:>2}: {title} ({} checks, {:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            checks.len(),
            t.elapsed().as_secs_f64()
        );
        for c in checks.iter().filter(|c| !c.passed()) {
            println!(
                "       {} max_residual={:e} tolerance={:e} samples={}{}",
                c.name,
                c.max_residual,
                c.tolerance,
                c.samples,
                c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            );
        }
        match (ok, blocked) {
            (false, Some((_, why))) => println!("       known blocker: {why}"),
            (false, None) => unexpected.push(format!("criterion {id} failed")),
            (true, Some(_)) => unexpected.push(format!("criterion {id} passed but is listed as blocked")),
            (true, None) => {}
        }
    }
    println!("acceptance suite finished in {:.1} s", start.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("unexpected outcomes: {}", unexpected.join("; "));
        std::process::exit(1);
    }
}
