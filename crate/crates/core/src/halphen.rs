//! The Darboux-Halphen system: fixtures, sl(2) triples, Halphen symmetries,
//! dual coframe identities, the Godbillon-Vey obstruction and the Halphen
//! transformation.
//!
//! Two time conventions are in use. The field `v` with components
//! `(yz - xy - xz, xz - xy - yz, xy - xz - yz)` is used everywhere except
//! for the transformation check, which runs on the pair-sum system
//! `d(x+y)/dt = xy, d(y+z)/dt = yz, d(x+z)/dt = xz`. Solving the pair sums
//! gives `x' = (xy + xz - yz)/2` and cyclic, i.e. `-v/2`, so a solution of
//! one is a solution of the other after `t -> -t/2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::{Check, ResidualStats};
use crate::dynamics::{integrate_fn, line_integral, square_loop, Method, Path, Trajectory};
use crate::exterior::{
    bracket, div, ext_d, grad, interior, lie_derivative, pair_two_form, sharp, wedge, ExtendedField,
    Form, LieField, Vec3, VectorField3,
};
use crate::expr::{parse, EvalError, Expr, Tape};
use crate::poisson::{homotopy_potential, integrating_factor, Gauge, HomotopyOptions, PotentialError};
use crate::sampling::{uniform, SampleBox};

/// Components of `v`.
pub const V_COMPONENTS: [&str; 3] = ["y*z - x*y - x*z", "x*z - x*y - y*z", "x*y - x*z - y*z"];

/// Components of the explicit pair-sum system.
pub const HALP_COMPONENTS: [&str; 3] = [
    "(x*y + x*z - y*z)/2",
    "(x*y + y*z - x*z)/2",
    "(x*z + y*z - x*y)/2",
];

/// The spot-check point used throughout.
pub const SPOT: [f64; 3] = [1.0, 2.0, 4.0];

/// Margin around the coincidence planes `x = y`, `y = z`, `z = x`.
pub const COINCIDENCE_MARGIN: f64 = 1e-3;

fn e(s: &str) -> Expr {
    parse(s).expect("built-in expression")
}

pub fn halp_system() -> VectorField3 {
    VectorField3::parse("halp", HALP_COMPONENTS).expect("built-in expression")
}

pub fn coincidence_exclusions() -> Vec<Expr> {
    vec![e("x - y"), e("y - z"), e("z - x")]
}

/// `[-2, 2]^3` minus the coincidence planes.
pub fn admissible_box() -> SampleBox {
    SampleBox::cube(2.0).excluding(coincidence_exclusions(), COINCIDENCE_MARGIN)
}

fn det3(a: &[Expr], b: &[Expr], c: &[Expr]) -> Expr {
    &a[0] * (&b[1] * &c[2] - &b[2] * &c[1]) - &a[1] * (&b[0] * &c[2] - &b[2] * &c[0])
        + &a[2] * (&b[0] * &c[1] - &b[1] * &c[0])
}

/// Determinant of a 4x4 matrix given by rows, expanded along the first column.
pub fn det4(rows: &[[Expr; 4]; 4]) -> Expr {
    let mut acc = Expr::zero();
    for i in 0..4 {
        if rows[i][0].is_zero() {
            continue;
        }
        let minor: Vec<&[Expr]> = (0..4).filter(|&r| r != i).map(|r| &rows[r][1..]).collect();
        let term = &rows[i][0] * det3(minor[0], minor[1], minor[2]);
        acc = if i % 2 == 0 { acc + term } else { acc - term };
    }
    acc
}

fn row(time: Expr, space: &[Expr; 3]) -> [Expr; 4] {
    [time, space[0].clone(), space[1].clone(), space[2].clone()]
}

/// Symbolic objects of the Darboux-Halphen case.
#[derive(Clone, Debug)]
pub struct Fixtures {
    pub v: VectorField3,
    pub u: VectorField3,
    pub w: VectorField3,
    /// `-(u x v) . w`.
    pub rho_inv: Expr,
    /// `det((1, v), V_t, U_t, W_t)`.
    pub rho_inv_det: Expr,
    /// `det((1, v), V_M, U_M, W_M)`.
    pub rho_inv_characteristic: Expr,
    /// `-4 (x - y)(y - z)(z - x)`.
    pub rho_inv_closed: Expr,
    pub rho: Expr,
    /// `rho dx^dy^dz`.
    pub nu: Form,
    pub beta: Form,
    pub alpha: Form,
    pub gamma: Form,
}

pub fn fixtures() -> Fixtures {
    let v = VectorField3::parse("v", V_COMPONENTS).expect("built-in expression");
    let u = VectorField3::parse("u", ["2*x", "2*y", "2*z"]).expect("built-in expression");
    let w = VectorField3::constant([1.0, 1.0, 1.0]).named("w");
    let rho_inv = -u.cross(&v).dot(&w);
    let t = Expr::t();
    let ext = extended_triple(&v, &u, &w);
    let one = Expr::one();
    let rho_inv_det = det4(&[
        row(one.clone(), &v.components),
        row(ext.v.time.clone(), &ext.v.space),
        row(ext.u.time.clone(), &ext.u.space),
        row(ext.w.time.clone(), &ext.w.space),
    ]);
    let ch = characteristic_triple(&v, &u, &w);
    let zero = Expr::zero();
    let rho_inv_characteristic = det4(&[
        row(one, &v.components),
        row(zero.clone(), &ch.v.components),
        row(zero.clone(), &ch.u.components),
        row(zero, &ch.w.components),
    ]);
    drop(t);
    let rho_inv_closed = e("-4*(x - y)*(y - z)*(z - x)");
    let rho = 1.0 / &rho_inv_closed;
    // Factored cross products evaluate without cancellation near the
    // coincidence planes.
    let dual = |c: [&str; 3]| Form::one_form(c.map(|s| &rho * e(s)));
    Fixtures {
        nu: Form::three_form(rho.clone()),
        beta: dual(["2*(y - z)", "-2*(x - z)", "2*(x - y)"]),
        alpha: dual(["2*x*(y - z)", "-2*y*(x - z)", "2*z*(x - y)"]),
        gamma: dual([
            "-2*(y - z)*(x*y + x*z - y*z)",
            "2*(x - z)*(x*y - x*z + y*z)",
            "2*(x - y)*(x*y - x*z - y*z)",
        ]),
        v,
        u,
        w,
        rho_inv,
        rho_inv_det,
        rho_inv_characteristic,
        rho_inv_closed,
        rho,
    }
}

/// Fields `(v, u, w)` of weights `(-1, 0, 1)`, expected to satisfy
/// `[u, v] = 2v`, `[u, w] = -2w`, `[v, w] = u`.
#[derive(Clone, Debug)]
pub struct Sl2Triple<F> {
    pub name: String,
    pub v: F,
    pub u: F,
    pub w: F,
}

/// `V_t = d/dt`, `U_t = -2t d/dt + u`, `W_t = -t^2 d/dt - w + t u`.
pub fn extended_triple(v: &VectorField3, u: &VectorField3, w: &VectorField3) -> Sl2Triple<ExtendedField> {
    let _ = v;
    let t = Expr::t();
    let w_space = w.scale(&Expr::constant(-1.0)).add(&u.scale(&t));
    Sl2Triple {
        name: "time_extended".into(),
        v: ExtendedField::new("V_t", Expr::one(), [Expr::zero(), Expr::zero(), Expr::zero()]),
        u: ExtendedField::new("U_t", -2.0 * &t, u.components.clone()),
        w: ExtendedField::new("W_t", -(&t * &t), w_space.components),
    }
}

/// `V_M = -v`, `U_M = u + 2t v`, `W_M = -w + t u + t^2 v`.
pub fn characteristic_triple(v: &VectorField3, u: &VectorField3, w: &VectorField3) -> Sl2Triple<VectorField3> {
    let t = Expr::t();
    Sl2Triple {
        name: "characteristic".into(),
        v: v.scale(&Expr::constant(-1.0)).named("V_M"),
        u: u.add(&v.scale(&(2.0 * &t))).named("U_M"),
        w: w
            .scale(&Expr::constant(-1.0))
            .add(&u.scale(&t))
            .add(&v.scale(&(&t * &t)))
            .named("W_M"),
    }
}

pub fn base_triple(f: &Fixtures) -> Sl2Triple<VectorField3> {
    Sl2Triple {
        name: "v_u_w".into(),
        v: f.v.clone(),
        u: f.u.clone(),
        w: f.w.clone(),
    }
}

/// Sampled `max_i |lhs_i - k(t) rhs_i|`; points that fail to evaluate are counted.
fn relation(
    lhs: &[Expr],
    rhs: &[Expr],
    k: impl Fn(f64) -> f64,
    points: &[[f64; 3]],
    times: &[f64],
) -> (ResidualStats, usize) {
    let n = lhs.len();
    let tape = Tape::compile(&[lhs, rhs].concat());
    let mut stats = ResidualStats::default();
    let mut skipped = 0;
    for (i, &p) in points.iter().enumerate() {
        let t = times.get(i).copied().unwrap_or(0.0);
        match tape.eval(p, t) {
            Ok(r) => stats.push((0..n).map(|j| (r[j] - k(t) * r[n + j]).abs()).fold(0.0, f64::max)),
            Err(_) => skipped += 1,
        }
    }
    (stats, skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sl2Residuals {
    /// `[u, v] - 2v`.
    pub uv: ResidualStats,
    /// `[u, w] + 2w`.
    pub uw: ResidualStats,
    /// `[v, w] - u`.
    pub vw: ResidualStats,
    pub skipped: usize,
}

impl Sl2Residuals {
    pub fn max(&self) -> f64 {
        self.uv.max_abs.max(self.uw.max_abs).max(self.vw.max_abs)
    }

    pub fn samples(&self) -> usize {
        self.uv.samples
    }
}

pub fn sl2_bracket_residuals<F: LieField>(
    triple: &Sl2Triple<F>,
    points: &[[f64; 3]],
    times: &[f64],
) -> Sl2Residuals {
    let rel = |a: &F, b: &F, other: &F, k: f64| {
        relation(
            &a.lie_bracket(b).component_exprs(),
            &other.component_exprs(),
            move |_| k,
            points,
            times,
        )
    };
    let (uv, s1) = rel(&triple.u, &triple.v, &triple.v, 2.0);
    let (uw, s2) = rel(&triple.u, &triple.w, &triple.w, -2.0);
    let (vw, s3) = rel(&triple.v, &triple.w, &triple.u, 1.0);
    Sl2Residuals {
        uv,
        uw,
        vw,
        skipped: s1.max(s2).max(s3),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedResidual {
    pub name: String,
    pub stats: ResidualStats,
    pub skipped: usize,
}

/// Residuals of the symmetry conditions with `D = d/dt + v`:
/// `[D, V_t]`, `[D, U_t] + 2D`, `[D, W_t] + 2tD` and `[D, X_M]` for the
/// characteristic fields. The last entry is a negative control with `2t`
/// replaced by `t`; it must not vanish.
pub fn symmetry_bracket_residuals(f: &Fixtures, points: &[[f64; 3]], times: &[f64]) -> Vec<NamedResidual> {
    let d = ExtendedField::time_extension(&f.v);
    let ext = extended_triple(&f.v, &f.u, &f.w);
    let ch = characteristic_triple(&f.v, &f.u, &f.w);
    let dc = d.component_exprs();
    let mut out = Vec::new();
    let mut add = |name: &str, x: &ExtendedField, k: &dyn Fn(f64) -> f64| {
        let (stats, skipped) = relation(&d.lie_bracket(x).component_exprs(), &dc, k, points, times);
        out.push(NamedResidual {
            name: name.into(),
            stats,
            skipped,
        });
    };
    add("symm_V_t", &ext.v, &|_| 0.0);
    add("symm_U_t", &ext.u, &|_| -2.0);
    add("symm_W_t", &ext.w, &|t| -2.0 * t);
    add("charsymm_V_M", &ExtendedField::spatial(&ch.v), &|_| 0.0);
    add("charsymm_U_M", &ExtendedField::spatial(&ch.u), &|_| 0.0);
    add("charsymm_W_M", &ExtendedField::spatial(&ch.w), &|_| 0.0);
    add("symm_W_t_negative_control", &ext.w, &|t| -t);
    out
}

/// `[forms (beta, alpha, gamma)] x [fields (v, u, w)]`.
pub fn dual_pairing_matrix(f: &Fixtures, point: [f64; 3]) -> Result<[[f64; 3]; 3], EvalError> {
    let mut exprs = Vec::with_capacity(9);
    for form in [&f.beta, &f.alpha, &f.gamma] {
        for field in [&f.v, &f.u, &f.w] {
            exprs.push(interior(field, form).expect("1-form").components()[0].clone());
        }
    }
    let r = Tape::compile(&exprs).eval(point, 0.0)?;
    Ok([[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]])
}

fn d(form: &Form) -> Form {
    ext_d(form).expect("degree below 3")
}

fn form_relation(name: &str, a: &Form, b: &Form, points: &[[f64; 3]], tol: f64) -> Check {
    let (stats, skipped) = relation(a.components(), b.components(), |_| 1.0, points, &[]);
    note_skipped(Check::threshold(name, stats.max_abs, stats.samples, tol), skipped)
}

fn note_skipped(check: Check, skipped: usize) -> Check {
    if skipped > 0 {
        check.with_note(format!("{skipped} points skipped (not evaluable)"))
    } else {
        check
    }
}

/// `max |a - b| / max(|a|, |b|)` over the points.
fn relative(a: &Expr, b: &Expr, points: &[[f64; 3]]) -> (ResidualStats, usize) {
    let tape = Tape::compile(&[a.clone(), b.clone()]);
    let mut stats = ResidualStats::default();
    let mut skipped = 0;
    for &p in points {
        match tape.eval(p, 0.0) {
            Ok(r) => {
                let scale = r[0].abs().max(r[1].abs());
                stats.push(if scale == 0.0 { 0.0 } else { (r[0] - r[1]).abs() / scale });
            }
            Err(_) => skipped += 1,
        }
    }
    (stats, skipped)
}

fn spot(expr: &Expr) -> f64 {
    expr.eval(SPOT, 0.0).unwrap_or(f64::NAN)
}

/// Last multiplier routes and spot value.
pub fn last_multiplier_checks(f: &Fixtures, points: &[[f64; 3]], times: &[f64]) -> Vec<Check> {
    let mut out = Vec::new();
    let (stats, skipped) = relative(&f.rho_inv, &f.rho_inv_closed, points);
    out.push(note_skipped(
        Check::threshold("rho_inv_triple_product_vs_closed_form", stats.max_abs, stats.samples, 1e-12),
        skipped,
    ));
    for (name, det) in [
        ("rho_inv_det_route_vs_closed_form", &f.rho_inv_det),
        ("rho_inv_characteristic_det_route_vs_closed_form", &f.rho_inv_characteristic),
    ] {
        let tape = Tape::compile(&[det.clone(), f.rho_inv_closed.clone()]);
        let mut s = ResidualStats::default();
        for (p, t) in points.iter().zip(times) {
            if let Ok(r) = tape.eval(*p, *t) {
                s.push((r[0] - r[1]).abs() / r[0].abs().max(r[1].abs()));
            }
        }
        out.push(Check::threshold(name, s.max_abs, s.samples, 1e-12));
    }
    let values = [
        spot(&f.rho_inv),
        f.rho_inv_det.eval(SPOT, 0.3).unwrap_or(f64::NAN),
        spot(&f.rho_inv_closed),
    ];
    let worst = values.iter().map(|v| (v + 24.0).abs()).fold(0.0, f64::max);
    out.push(
        Check::threshold("rho_inv_spot_value", worst, 1, 1e-12)
            .with_note(format!("rho^-1(1,2,4) by three routes: {values:?}; expected -24")),
    );
    out
}

/// Every identity of the dual coframe, at `points`.
pub fn geometry_residuals(f: &Fixtures, points: &[[f64; 3]]) -> Vec<Check> {
    let (a, b, g) = (&f.alpha, &f.beta, &f.gamma);
    let two = Expr::constant(2.0);
    let half = Expr::constant(0.5);
    let mut out = Vec::new();

    for (name, form, a, b) in [
        ("dual_form_beta_definition", &f.beta, &f.u, &f.w),
        ("dual_form_alpha_definition", &f.alpha, &f.w, &f.v),
        ("dual_form_gamma_definition", &f.gamma, &f.v, &f.u),
    ] {
        let cross = a.cross(b).scale(&f.rho).components;
        let mut stats = ResidualStats::default();
        for (c, d) in form.components().iter().zip(&cross) {
            let (s, _) = relative(c, d, points);
            stats.push(s.max_abs);
        }
        out.push(Check::threshold(name, stats.max_abs, points.len(), 1e-12));
    }

    let mut worst = 0.0f64;
    let mut n = 0;
    for &p in points {
        if let Ok(m) = dual_pairing_matrix(f, p) {
            n += 1;
            for (i, row) in m.iter().enumerate() {
                for (j, x) in row.iter().enumerate() {
                    worst = worst.max((x - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
        }
    }
    out.push(Check::threshold("dual_pairing_identity", worst, n, 1e-12));

    for (name, field) in [("volume_invariance_u", &f.u), ("volume_invariance_v", &f.v), ("volume_invariance_w", &f.w)] {
        let div_nu = div(&field.scale(&f.rho)) / &f.rho;
        let (stats, skipped) = relation(&[div_nu], &[Expr::zero()], |_| 0.0, points, &[]);
        out.push(note_skipped(Check::threshold(name, stats.max_abs, stats.samples, 1e-10), skipped));
    }
    let lvg = lie_derivative(&f.v, g).expect("1-form");
    out.push(form_relation("lie_v_gamma", &lvg, &Form::zero(1), points, 1e-10));

    out.push(form_relation("maurer_cartan_beta", &d(b), &wedge(a, b).scale(&Expr::constant(-2.0)), points, 1e-10));
    out.push(form_relation("maurer_cartan_alpha", &d(a), &wedge(g, b), points, 1e-10));
    out.push(form_relation("maurer_cartan_gamma", &d(g), &wedge(a, g).scale(&two), points, 1e-10));

    let i = |x: &VectorField3| interior(x, &f.nu).expect("3-form");
    out.push(form_relation("local_structure_v", &i(&f.v), &wedge(a, g), points, 1e-10));
    out.push(form_relation("local_structure_v_exact", &wedge(a, g), &d(g).scale(&half), points, 1e-10));
    out.push(form_relation("local_structure_u", &i(&f.u), &wedge(g, b), points, 1e-10));
    out.push(form_relation("local_structure_u_exact", &wedge(g, b), &d(a), points, 1e-10));
    out.push(form_relation("local_structure_w", &i(&f.w), &wedge(b, a), points, 1e-10));
    out.push(form_relation("local_structure_w_exact", &wedge(b, a), &d(b).scale(&half), points, 1e-10));

    for (name, form) in [("frobenius_beta", b), ("frobenius_gamma", g)] {
        let df = d(form);
        let wedge_df = wedge(form, &df);
        out.push(form_relation(name, &wedge_df, &Form::zero(3), points, 1e-12));
        let tape = Tape::compile(&[wedge_df.components(), form.components(), df.components()].concat());
        let mut scaled = ResidualStats::default();
        for &p in points {
            if let Ok(r) = tape.eval(p, 0.0) {
                let scale = Vec3::new(r[1], r[2], r[3]).norm() * Vec3::new(r[4], r[5], r[6]).norm();
                scaled.push(r[0].abs() / scale.max(f64::MIN_POSITIVE));
            }
        }
        out.push(
            Check::threshold(format!("{name}_scaled"), scaled.max_abs, scaled.samples, 1e-14)
                .with_note("coefficient divided by |form| |d form|"),
        );
    }

    let ada = wedge(a, &d(a)).components()[0].clone();
    let spot_ada = spot(&ada);
    let (stats, skipped) = relative(&ada, &f.rho_inv, points);
    let worst = stats.max_abs.max((spot_ada + 24.0).abs() / 24.0);
    out.push(note_skipped(
        Check::threshold("alpha_wedge_dalpha", worst, stats.samples, 1e-9).with_note(format!(
            "relative error of the alpha^d alpha coefficient against rho^-1; value at (1,2,4) = {spot_ada:e}, rho^-1 = -24"
        )),
        skipped,
    ));
    let (stats, skipped) = relative(&ada, &f.rho, points);
    out.push(note_skipped(
        Check::threshold("alpha_wedge_dalpha_vs_rho", stats.max_abs, stats.samples, 1e-9)
            .with_note("alpha^d alpha = nu, coefficient rho"),
        skipped,
    ));

    let abg = wedge(&wedge(a, b), g).components()[0].clone();
    let tape = Tape::compile(&[abg.clone(), f.rho.clone()]);
    let mut rel = ResidualStats::default();
    let mut smallest = f64::INFINITY;
    let mut sign = 0.0;
    for &p in points {
        if let Ok(r) = tape.eval(p, 0.0) {
            rel.push((r[0].abs() - r[1].abs()).abs() / r[1].abs());
            smallest = smallest.min(r[0].abs());
            sign = (r[0] / r[1]).signum();
        }
    }
    out.push(
        Check::threshold("godbillon_vey_magnitude", rel.max_abs, rel.samples, 1e-9)
            .with_note(format!("alpha^beta^gamma = {sign} * rho dx^dy^dz")),
    );
    out.push(Check::nonvanishing("godbillon_vey_nonvanishing", smallest, rel.samples, f64::MIN_POSITIVE));
    out
}

/// `d gamma - 2 alpha^gamma`, `d beta + 2 alpha^beta`, the integrating
/// factor of `gamma` and its non-closedness.
pub fn closed_scaled_forms_check(f: &Fixtures, points: &[[f64; 3]]) -> Vec<Check> {
    let (a, b, g) = (&f.alpha, &f.beta, &f.gamma);
    let two = Expr::constant(2.0);
    let mut out = vec![
        form_relation("closed_scaled_gamma", &d(g), &wedge(a, g).scale(&two), points, 1e-10),
        form_relation("closed_scaled_beta", &d(b).scale(&Expr::constant(-1.0)), &wedge(a, b).scale(&two), points, 1e-10),
    ];
    let two_alpha = a.scale(&two);
    match integrating_factor(g, &Gauge::Along(f.w.clone()), points) {
        Ok(xi) => {
            out.push(form_relation("integrating_factor_gamma", &xi.xi, &two_alpha, points, 1e-9));
            // dxi = 2 gamma^beta paired with (sharp gamma, sharp beta).
            let pairing = Tape::compile(&[xi.d_xi.components(), g.components(), b.components()].concat());
            let mut smallest = f64::INFINITY;
            let mut n = 0;
            for &p in points {
                if let Ok(r) = pairing.eval(p, 0.0) {
                    let gs = Vec3::new(r[3], r[4], r[5]);
                    let bs = Vec3::new(r[6], r[7], r[8]);
                    let val = pair_two_form(&r[0..3], &gs, &bs) / (gs.norm() * bs.norm());
                    smallest = smallest.min(val.abs());
                    n += 1;
                }
            }
            out.push(
                Check::nonvanishing("integrating_factor_not_closed", smallest, n, 1e-9)
                    .with_note("d xi (sharp gamma, sharp beta) / (|gamma||beta|), smallest magnitude"),
            );
        }
        Err(e) => out.push(Check::fail("integrating_factor_gamma", e.to_string())),
    }
    match integrating_factor(g, &Gauge::Orthogonal, points) {
        Ok(xi) => {
            // Gauges differ by a multiple of gamma.
            let diff = xi.xi.sub(&two_alpha);
            let w = wedge(&diff, g);
            let tape = Tape::compile(&[w.components(), diff.components(), g.components()].concat());
            let mut stats = ResidualStats::default();
            for &p in points {
                if let Ok(r) = tape.eval(p, 0.0) {
                    let scale = 1.0 + Vec3::new(r[3], r[4], r[5]).norm() * Vec3::new(r[6], r[7], r[8]).norm();
                    stats.push(Vec3::new(r[0], r[1], r[2]).amax() / scale);
                }
            }
            out.push(
                Check::threshold("integrating_factor_gauge_class", stats.max_abs, stats.samples, 1e-9)
                    .with_note("(xi_orthogonal - 2 alpha) ^ gamma, relative"),
            );
        }
        Err(e) => out.push(Check::fail("integrating_factor_gauge_class", e.to_string())),
    }
    out
}

/// Probe points whose pairwise coordinate differences are powers of two.
pub fn dyadic_probes() -> Vec<[f64; 3]> {
    HomotopyOptions::default().probes
}

/// The homotopy integrands `x . beta` and `x . gamma` vanish identically.
pub fn homotopy_degeneracy_demo(f: &Fixtures, probes: &[[f64; 3]]) -> Vec<Check> {
    let x = VectorField3::new("x", [Expr::x(), Expr::y(), Expr::z()]);
    let mut out = Vec::new();
    let opts = HomotopyOptions {
        probes: probes.to_vec(),
        ..HomotopyOptions::default()
    };
    for (name, form) in [("beta", &f.beta), ("gamma", &f.gamma)] {
        let integrand = interior(&x, form).expect("1-form").components()[0].clone();
        let (stats, skipped) = relation(&[integrand], &[Expr::zero()], |_| 0.0, probes, &[]);
        out.push(note_skipped(
            Check::threshold(format!("homotopy_integrand_{name}"), stats.max_abs, stats.samples, 1e-14),
            skipped,
        ));
        let name = format!("homotopy_degenerate_{name}");
        out.push(match homotopy_potential(form, &opts) {
            Err(PotentialError::DegenerateIntegrand {
                probes,
                max_integrand,
                max_relative,
            }) => Check::threshold(name, max_integrand, probes, 1e-14)
                .with_note(format!("DegenerateIntegrand raised; max relative integrand {max_relative:e}")),
            Err(e) => Check::fail(name, format!("unexpected error: {e}")),
            Ok(_) => Check::fail(name, "potential constructed; DegenerateIntegrand expected"),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolonomyReport {
    pub center: [f64; 3],
    pub sides: Vec<f64>,
    pub loop_integrals: Vec<f64>,
    /// `r^2 d alpha(e1, e2)` at the center.
    pub predicted: Vec<f64>,
    /// `|loop - predicted| / r^2`.
    pub scaled_errors: Vec<f64>,
    /// Loop integral of an exact form on the largest loop.
    pub exact_control: f64,
}

impl HolonomyReport {
    pub fn monotone(&self) -> bool {
        self.scaled_errors.windows(2).all(|w| w[1] < w[0])
    }
}

/// Square loops of the given sides around `center` in the plane spanned
/// by `sharp(beta)` and `sharp(gamma)` there.
pub fn holonomy_demo(f: &Fixtures, center: [f64; 3], sides: &[f64]) -> Result<HolonomyReport, crate::dynamics::DynamicsError> {
    let err = |source| crate::dynamics::DynamicsError::SingularityOnPath { point: center, source };
    let e1 = sharp(&f.beta).expect("1-form").eval(center, 0.0).map_err(err)?;
    let e2 = sharp(&f.gamma).expect("1-form").eval(center, 0.0).map_err(err)?;
    let (a1, a2) = {
        let a = e1.normalize();
        let b = (e2 - a * a.dot(&e2)).normalize();
        (a, b)
    };
    let da = d(&f.alpha).eval(center, 0.0).map_err(err)?;
    let density = pair_two_form(&da, &a1, &a2);
    let exact = Form::one_form(grad(&e("x*y*z + x^2 - sin(y)")).components);
    let mut report = HolonomyReport {
        center,
        sides: sides.to_vec(),
        loop_integrals: Vec::new(),
        predicted: Vec::new(),
        scaled_errors: Vec::new(),
        exact_control: 0.0,
    };
    for &r in sides {
        let path: Path = square_loop(center, a1, a2, r).expect("independent directions");
        let val = line_integral(&f.alpha, &path)?;
        let pred = r * r * density;
        report.loop_integrals.push(val);
        report.predicted.push(pred);
        report.scaled_errors.push((val - pred).abs() / (r * r));
    }
    let largest = sides.iter().copied().fold(0.0, f64::max);
    report.exact_control = line_integral(&exact, &square_loop(center, a1, a2, largest).expect("independent directions"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HalphenError {
    #[error("ct + d vanishes or changes sign along the trajectory near t = {t}")]
    DenominatorZero { t: f64 },
    #[error("ad - bc = 0")]
    Degenerate,
    #[error("trajectory must have at least 5 equally spaced samples")]
    NotUniform,
}

/// `(t, x) -> ((a t + b)/(c t + d), 2c (c t + d)/D + (c t + d)^2 x / D)`, `D = ad - bc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalphenTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl HalphenTransform {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        HalphenTransform { a, b, c, d }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, t: f64, x: [f64; 3]) -> Result<(f64, [f64; 3]), HalphenError> {
        let det = self.determinant();
        if det == 0.0 {
            return Err(HalphenError::Degenerate);
        }
        let k = self.c * t + self.d;
        if k == 0.0 {
            return Err(HalphenError::DenominatorZero { t });
        }
        let shift = 2.0 * self.c * k / det;
        let scale = k * k / det;
        Ok(((self.a * t + self.b) / k, x.map(|xi| shift + scale * xi)))
    }
}

/// Transforms a trajectory of the pair-sum system and returns the residual of
/// the pair-sum equations along the image, with derivatives from five-point
/// differences in the original time and the chain rule.
pub fn halphen_transform_check(traj: &Trajectory, tr: &HalphenTransform) -> Result<ResidualStats, HalphenError> {
    let s = &traj.samples;
    if s.len() < 5 {
        return Err(HalphenError::NotUniform);
    }
    let h = s[1].t - s[0].t;
    if s.windows(2).any(|w| ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.abs()) {
        return Err(HalphenError::NotUniform);
    }
    let det = tr.determinant();
    if det == 0.0 {
        return Err(HalphenError::Degenerate);
    }
    let sign0 = (tr.c * s[0].t + tr.d).signum();
    for r in s {
        let k = tr.c * r.t + tr.d;
        if k == 0.0 || k.signum() != sign0 {
            return Err(HalphenError::DenominatorZero { t: r.t });
        }
    }
    let mut stats = ResidualStats::default();
    for i in 2..s.len() - 2 {
        let (t, x) = (s[i].t, Vec3::from(s[i].x));
        let dx = (Vec3::from(s[i - 2].x) - 8.0 * Vec3::from(s[i - 1].x) + 8.0 * Vec3::from(s[i + 1].x)
            - Vec3::from(s[i + 2].x))
            / (12.0 * h);
        let k = tr.c * t + tr.d;
        let big_x = x.map(|xi| (2.0 * tr.c * k + k * k * xi) / det);
        let big_dx = (Vec3::repeat(2.0 * tr.c * tr.c) + 2.0 * tr.c * k * x + k * k * dx) * (k * k / (det * det));
        let res = [(0, 1), (1, 2), (0, 2)]
            .map(|(p, q)| (big_dx[p] + big_dx[q] - big_x[p] * big_x[q]).abs())
            .into_iter()
            .fold(0.0, f64::max);
        stats.push(res);
    }
    Ok(stats)
}

/// Default trajectory of the pair-sum system on `t in [0.1, 1]`.
pub const HALP_START: [f64; 3] = [0.3, -0.2, 0.5];

pub fn halp_trajectory(x0: [f64; 3], span: (f64, f64), h: f64) -> Result<Trajectory, crate::dynamics::DynamicsError> {
    let tape = halp_system().tape();
    integrate_fn(
        |t, x| {
            let v = tape.eval(x, t)?;
            Ok(Vec3::new(v[0], v[1], v[2]))
        },
        x0,
        span,
        Method::Rk4 { h },
    )
}

/// Translation, scaling and Möbius transforms of a pair-sum trajectory, and the
/// denominator-crossing error.
pub fn transform_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let traj = match halp_trajectory(HALP_START, (0.1, 1.0), 1e-3) {
        Ok(t) => t,
        Err(e) => return vec![Check::fail("halphen_transform", e.to_string())],
    };
    for (name, tr, tol) in [
        ("halphen_transform_translation", HalphenTransform::new(1.0, 1.0, 0.0, 1.0), 1e-9),
        ("halphen_transform_scaling", HalphenTransform::new(2.0, 0.0, 0.0, 1.0), 1e-6),
        ("halphen_transform_mobius", HalphenTransform::new(1.0, 0.0, 1.0, 1.0), 1e-6),
    ] {
        out.push(match halphen_transform_check(&traj, &tr) {
            Ok(stats) => Check::threshold(name, stats.max_abs, stats.samples, tol),
            Err(e) => Check::fail(name, e.to_string()),
        });
    }
    let name = "halphen_transform_denominator";
    out.push(match halp_trajectory(HALP_START, (-0.5, 0.5), 1e-3) {
        Ok(crossing) => match halphen_transform_check(&crossing, &HalphenTransform::new(0.0, 1.0, -1.0, 0.0)) {
            Err(HalphenError::DenominatorZero { t }) => {
                Check::threshold(name, 0.0, 1, 0.0).with_note(format!("DenominatorZero raised at t = {t}"))
            }
            other => Check::fail(name, format!("DenominatorZero expected, got {other:?}")),
        },
        Err(e) => Check::fail(name, e.to_string()),
    });
    out
}

/// Seed of the reference run.
pub const SUITE_SEED: u64 = 1;

/// Every verification of the case study at `n_points` seeded random points.
pub fn verification_suite(n_points: usize, seed: u64) -> Vec<Check> {
    let f = fixtures();
    let points = admissible_box().sample(n_points, seed, 0);
    let times = uniform(points.len(), -1.0, 1.0, seed, 1);
    let mut out = Vec::new();

    let sl2 = |name: &str, r: Sl2Residuals| note_skipped(Check::threshold(name, r.max(), r.samples(), 1e-12), r.skipped);
    out.push(sl2("sl2_v_u_w", sl2_bracket_residuals(&base_triple(&f), &points, &times)));
    out.push(sl2(
        "sl2_time_extended",
        sl2_bracket_residuals(&extended_triple(&f.v, &f.u, &f.w), &points, &times),
    ));
    out.push(sl2(
        "sl2_characteristic",
        sl2_bracket_residuals(&characteristic_triple(&f.v, &f.u, &f.w), &points, &times),
    ));
    let mut perturbed = base_triple(&f);
    perturbed.v = perturbed.v.add(&VectorField3::constant([1.0, 0.0, 0.0]));
    let r = sl2_bracket_residuals(&perturbed, &points, &times);
    out.push(Check::nonvanishing("sl2_negative_control", r.max(), r.samples(), 1e-3));

    for r in symmetry_bracket_residuals(&f, &points, &times) {
        out.push(if r.name.ends_with("negative_control") {
            Check::nonvanishing(r.name, r.stats.max_abs, r.stats.samples, 1e-3)
        } else {
            note_skipped(Check::threshold(r.name, r.stats.max_abs, r.stats.samples, 1e-12), r.skipped)
        });
    }
    out.extend(last_multiplier_checks(&f, &points, &times));
    out.extend(geometry_residuals(&f, &points));
    out.extend(closed_scaled_forms_check(&f, &points));
    out.extend(homotopy_degeneracy_demo(&f, &dyadic_probes()));
    match holonomy_demo(&f, SPOT, &[0.1, 0.05, 0.025]) {
        Ok(h) => {
            let smallest = h.loop_integrals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            out.push(
                Check::threshold("alpha_holonomy_shrinking", if h.monotone() { 0.0 } else { 1.0 }, h.sides.len(), 0.0)
                    .with_note(format!("scaled errors {:?}", h.scaled_errors)),
            );
            out.push(Check::nonvanishing("alpha_holonomy_nonzero", smallest, h.sides.len(), 1e-12));
            out.push(Check::threshold("exact_form_holonomy", h.exact_control.abs(), 1, 1e-10));
        }
        Err(e) => out.push(Check::fail("alpha_holonomy", e.to_string())),
    }
    out.extend(transform_checks());
    out
}

/// `[(1,0,0), (x,0,0)] = (1,0,0)`-style sanity for the bracket used here.
pub fn bracket_of(a: &VectorField3, b: &VectorField3) -> VectorField3 {
    bracket(a, b)
}
