mod common;

use common::{compare_derivative, Comparison, random_expr, random_point, random_polynomial, random_polynomial_field};
use hamflow::check::{Check, Status};
use hamflow::cli::{exit_code, Report};
use hamflow::exterior::{bracket, ext_d, flat, grad, interior, pair_two_form, wedge, Form, Vec3, VectorField3};
use hamflow::expr::{parse, Expr, Tape, Var};
use hamflow::poisson::{frobenius_coefficient, homotopy_potential, jacobi_residual, HomotopyOptions};
use hamflow::sampling::rng;
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

fn random_one_form(seed: u64, depth: usize) -> Form {
    let mut r = rng(seed, 0);
    Form::one_form([0, 1, 2].map(|_| random_expr(&mut r, depth)))
}

fn random_field(seed: u64, stream: u64) -> VectorField3 {
    let mut r = rng(seed, stream);
    random_polynomial_field(&mut r, 2)
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn derivative_matches_central_difference(seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let e = random_expr(&mut r, 6);
        for _ in 0..10 {
            let p = random_point(&mut r, 1.5);
            for var in Var::SPATIAL {
                if let Comparison::Error(err) = compare_derivative(&e, p, var) {
                    prop_assert!(err <= 1e-5, "{} at {p:?} d/d{}: {err:e}", e.to_string_limited(200), var.name());
                }
            }
        }
    }

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let e = random_expr(&mut r, 6);
        let back = parse(&e.to_string()).unwrap();
        for _ in 0..10 {
            let p = random_point(&mut r, 1.5);
            if let (Ok(a), Ok(b)) = (e.eval(p, 0.0), back.eval(p, 0.0)) {
                if a.is_finite() {
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn d_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let w = random_one_form(seed, 3);
        let e = random_one_form(seed.wrapping_add(1), 3);
        let lhs = ext_d(&w.scale(&Expr::constant(a)).add(&e.scale(&Expr::constant(b)))).unwrap();
        let rhs = ext_d(&w).unwrap().scale(&Expr::constant(a)).add(&ext_d(&e).unwrap().scale(&Expr::constant(b)));
        let tape = Tape::compile(&[lhs.components(), rhs.components()].concat());
        let mut r = rng(seed, 1);
        for _ in 0..10 {
            if let Ok(v) = tape.eval(random_point(&mut r, 1.5), 0.0) {
                for i in 0..3 {
                    prop_assert!((v[i] - v[3 + i]).abs() <= 1e-10 * (1.0 + v[i].abs()));
                }
            }
        }
    }

    #[test]
    fn d_squared_vanishes(seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let f = Form::scalar(random_expr(&mut r, 4));
        let w = random_one_form(seed.wrapping_add(7), 4);
        let ddf = ext_d(&ext_d(&f).unwrap()).unwrap();
        let ddw = ext_d(&ext_d(&w).unwrap()).unwrap();
        let tape = Tape::compile(&[ddf.components(), ddw.components()].concat());
        for _ in 0..10 {
            if let Ok(v) = tape.eval(random_point(&mut r, 1.5), 0.0) {
                for c in v.iter().filter(|c| c.is_finite()) {
                    prop_assert!(c.abs() < 1e-12, "d(d omega) component {c:e}");
                }
            }
        }
    }

    #[test]
    fn ext_d_matches_invariant_formula(seed in any::<u64>()) {
        let w = random_one_form(seed, 3);
        let u = random_field(seed, 1);
        let v = random_field(seed, 2);
        let dw = ext_d(&w).unwrap();
        let wv = interior(&v, &w).unwrap().components()[0].clone();
        let wu = interior(&u, &w).unwrap().components()[0].clone();
        let w_uv = interior(&bracket(&u, &v), &w).unwrap().components()[0].clone();
        let rhs = u.dot(&grad(&wv)) - v.dot(&grad(&wu)) - w_uv;
        let tape = Tape::compile(&[dw.components(), u.components.as_slice(), v.components.as_slice(), &[rhs]].concat());
        let mut r = rng(seed, 3);
        for _ in 0..10 {
            if let Ok(x) = tape.eval(random_point(&mut r, 1.0), 0.0) {
                if x.iter().all(|c| c.is_finite()) {
                    let lhs = pair_two_form(&x[0..3], &Vec3::new(x[3], x[4], x[5]), &Vec3::new(x[6], x[7], x[8]));
                    prop_assert!((lhs - x[9]).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {}", x[9]);
                }
            }
        }
    }

    #[test]
    fn jacobi_equals_frobenius(seed in any::<u64>()) {
        let j = random_field(seed, 0);
        let curl_scale = j.norm() * hamflow::exterior::curl(&j).norm();
        let tape = Tape::compile(&[jacobi_residual(&j), frobenius_coefficient(&j), curl_scale]);
        let mut r = rng(seed, 1);
        for _ in 0..20 {
            let v = tape.eval(random_point(&mut r, 2.0), 0.0).unwrap();
            prop_assert!((v[0] - v[1]).abs() <= 1e-10 * v[2].max(f64::MIN_POSITIVE), "{v:?}");
        }
    }

    #[test]
    fn frobenius_scales_by_square(seed in any::<u64>()) {
        let j = random_field(seed, 0);
        let mut r = rng(seed, 1);
        let f = random_polynomial(&mut r, 1) + 3.0;
        let fj = j.scale(&f);
        let a = flat(&fj);
        let lhs = wedge(&a, &ext_d(&a).unwrap()).components()[0].clone();
        let rhs = f.powi(2) * frobenius_coefficient(&j);
        let scale = fj.norm() * hamflow::exterior::curl(&fj).norm();
        let tape = Tape::compile(&[lhs, rhs, scale]);
        for _ in 0..20 {
            let v = tape.eval(random_point(&mut r, 2.0), 0.0).unwrap();
            prop_assert!((v[0] - v[1]).abs() <= 1e-9 * (1.0 + v[2]), "{v:?}");
        }
    }

    #[test]
    fn gradients_satisfy_jacobi(seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let h = random_expr(&mut r, 4);
        let tape = Tape::compile(&[jacobi_residual(&grad(&h))]);
        for _ in 0..10 {
            if let Ok(v) = tape.eval(random_point(&mut r, 1.5), 0.0) {
                if v[0].is_finite() {
                    prop_assert!(v[0].abs() < 1e-10, "{:e}", v[0]);
                }
            }
        }
    }

    #[test]
    fn exit_code_contract(statuses in prop::collection::vec(0u8..3, 0..20)) {
        let checks: Vec<Check> = statuses
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                0 => Check::threshold(format!("c{i}"), 0.0, 1, 1.0),
                1 => Check::threshold(format!("c{i}"), 2.0, 1, 1.0),
                _ => Check::skip(format!("c{i}"), "skipped"),
            })
            .collect();
        let any_fail = checks.iter().any(|c| c.status == Status::Fail);
        prop_assert_eq!(exit_code(&checks), if any_fail { 1 } else { 0 });
        let mut report = Report::new("synthetic", b"", Some(0));
        report.extend(checks);
        let back: Report = serde_json::from_str(&report.to_json()).unwrap();
        prop_assert_eq!(back.exit_code(), report.exit_code());
        prop_assert_eq!(back.checks.len(), statuses.len());
    }
}

proptest! {
    #![proptest_config(cases(30))]

    #[test]
    fn homotopy_recovers_polynomial(seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let degree = 1 + (seed % 4) as u32;
        let h = random_polynomial(&mut r, degree);
        let omega = Form::one_form(grad(&h).components);
        let potential = homotopy_potential(&omega, &HomotopyOptions::default()).unwrap();
        let h0 = h.eval([0.0; 3], 0.0).unwrap();
        for _ in 0..5 {
            let p = random_point(&mut r, 1.5);
            let want = h.eval(p, 0.0).unwrap() - h0;
            let got = potential.value(p).unwrap();
            prop_assert!((got - want).abs() <= 1e-8 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }
}
