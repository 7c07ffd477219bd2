//! Seeded generators shared by the property and acceptance suites.
#![allow(dead_code)]

use hamflow::exterior::VectorField3;
use hamflow::expr::{Expr, Var};
use rand::Rng;

/// Random expression tree in `x, y, z` with at most `depth` operator levels.
/// Logarithms, roots and quotients are guarded so the tree is defined
/// everywhere; `exp` may still overflow far from the origin.
pub fn random_expr(rng: &mut impl Rng, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..4) {
            0 => Expr::x(),
            1 => Expr::y(),
            2 => Expr::z(),
            _ => Expr::constant((rng.random_range(-2.0..2.0f64) * 8.0).round() / 8.0),
        };
    }
    let sub = |rng: &mut _| random_expr(rng, depth - 1);
    match rng.random_range(0..11) {
        0 => sub(rng) + sub(rng),
        1 => sub(rng) - sub(rng),
        2 => sub(rng) * sub(rng),
        3 => sub(rng) / (1.0 + sub(rng).powi(2)),
        4 => sub(rng).powi(2),
        5 => sub(rng).sin(),
        6 => sub(rng).cos(),
        7 => (1.0 + sub(rng).powi(2)).ln(),
        8 => (1.0 + sub(rng).powi(2)).sqrt(),
        9 => sub(rng).exp(),
        _ => -sub(rng),
    }
}

/// Random polynomial of total degree at most `degree` with coefficients in [-2, 2].
pub fn random_polynomial(rng: &mut impl Rng, degree: u32) -> Expr {
    let mut terms = Vec::new();
    for i in 0..=degree {
        for j in 0..=degree - i {
            for k in 0..=degree - i - j {
                let c = rng.random_range(-2.0..2.0f64);
                terms.push(c * Expr::x().powi(i as i32) * Expr::y().powi(j as i32) * Expr::z().powi(k as i32));
            }
        }
    }
    hamflow::expr::sum(terms)
}

pub fn random_polynomial_field(rng: &mut impl Rng, degree: u32) -> VectorField3 {
    VectorField3::new(
        "J",
        [
            random_polynomial(rng, degree),
            random_polynomial(rng, degree),
            random_polynomial(rng, degree),
        ],
    )
}

pub fn random_point(rng: &mut impl Rng, half: f64) -> [f64; 3] {
    [0, 1, 2].map(|_| rng.random_range(-half..half))
}

/// Central difference of `e` along `var` with step `h`.
pub fn central_difference(e: &Expr, p: [f64; 3], var: Var, h: f64) -> Option<f64> {
    let i = match var {
        Var::X => 0,
        Var::Y => 1,
        Var::Z => 2,
        Var::T => return None,
    };
    let (mut a, mut b) = (p, p);
    a[i] += h;
    b[i] -= h;
    let fa = e.eval(a, 0.0).ok()?;
    let fb = e.eval(b, 0.0).ok()?;
    let d = (fa - fb) / (2.0 * h);
    d.is_finite().then_some(d)
}

/// Outcome of one derivative-versus-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Comparison {
    /// Scaled error `|de - fd| / (1 + max(|e|, |de|))`.
    Error(f64),
    /// `e` or one of its derivatives is not finite here.
    Singular,
    /// The difference quotient's own truncation bound `h^2 |d3e| / 6`
    /// exceeds a tenth of the tolerance, so it cannot serve as an oracle.
    Unresolved,
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-5;

/// Derivative of `e` at `p` against a central difference with `h = 1e-6`,
/// scaled by `1 + max(|e|, |de|)`. The difference quotient carries a
/// rounding error of about `eps |e| / h`, hence `|e|` in the scale.
pub fn compare_derivative(e: &Expr, p: [f64; 3], var: Var) -> Comparison {
    let d1 = e.diff(var);
    let d3 = d1.diff(var).diff(var);
    let finite = |x: &Expr| x.eval(p, 0.0).ok().filter(|v| v.is_finite());
    let (Some(value), Some(exact), Some(third)) = (finite(e), finite(&d1), finite(&d3)) else {
        return Comparison::Singular;
    };
    let Some(fd) = central_difference(e, p, var, FD_STEP) else {
        return Comparison::Singular;
    };
    let scale = 1.0 + value.abs().max(exact.abs());
    if FD_STEP * FD_STEP * third.abs() / 6.0 > 0.1 * FD_TOL * scale {
        return Comparison::Unresolved;
    }
    Comparison::Error((exact - fd).abs() / scale)
}
