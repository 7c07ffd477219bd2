//! ODE integration, conserved-quantity drift and line integrals of 1-forms.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exterior::{Form, Vec3, VectorField3};
use crate::expr::{EvalError, Expr, Tape, Var};
use crate::quadrature::gl32_points;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("singularity hit at t = {t}, x = {point:?}{}", .source.as_ref().map(|e| format!(": {e}")).unwrap_or_default())]
    SingularityHit {
        t: f64,
        point: [f64; 3],
        source: Option<EvalError>,
    },
    #[error("singular one-form on the path at {point:?}: {source}")]
    SingularityOnPath { point: [f64; 3], source: EvalError },
    #[error("invalid integration request: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Rk4 { h: f64 },
    /// Fehlberg 4(5), advancing with the fifth-order solution.
    Rkf45 { atol: f64, rtol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk4 { h: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: [f64; 3],
    /// Arclength accumulated from the start.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub method: Method,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectories have at least one sample")
    }

    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "t,x,y,z,s")?;
        for r in &self.samples {
            writeln!(out, "{:e},{:e},{:e},{:e},{:e}", r.t, r.x[0], r.x[1], r.x[2], r.s)?;
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        self.samples.iter().map(|r| r.x).collect()
    }
}

type State = [f64; 4];

fn axpy(y: &State, a: f64, k: &State) -> State {
    [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2], y[3] + a * k[3]]
}

fn combine(y: &State, h: f64, ks: &[&State], ws: &[f64]) -> State {
    let mut out = *y;
    for (k, w) in ks.iter().zip(ws) {
        for i in 0..4 {
            out[i] += h * w * k[i];
        }
    }
    out
}

/// Integrates `x' = f(t, x)` with the arclength `s' = |f|` appended.
pub fn integrate_fn(
    f: impl Fn(f64, [f64; 3]) -> Result<Vec3, EvalError>,
    x0: [f64; 3],
    span: (f64, f64),
    method: Method,
) -> Result<Trajectory, DynamicsError> {
    let (t0, t1) = span;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(DynamicsError::Invalid("time span must be finite"));
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let rhs = |t: f64, y: &State| -> Result<State, DynamicsError> {
        let x = [y[0], y[1], y[2]];
        let v = f(t, x).map_err(|e| DynamicsError::SingularityHit {
            t,
            point: x,
            source: Some(e),
        })?;
        Ok([v[0], v[1], v[2], v.norm()])
    };
    let finite = |t: f64, y: &State| -> Result<(), DynamicsError> {
        if y.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(DynamicsError::SingularityHit {
                t,
                point: [y[0], y[1], y[2]],
                source: None,
            })
        }
    };
    let mut y: State = [x0[0], x0[1], x0[2], 0.0];
    let mut samples = vec![TrajectorySample { t: t0, x: x0, s: 0.0 }];
    let push = |samples: &mut Vec<TrajectorySample>, t: f64, y: &State| {
        samples.push(TrajectorySample {
            t,
            x: [y[0], y[1], y[2]],
            s: y[3],
        })
    };
    match method {
        Method::Rk4 { h } => {
            if !(h > 0.0) {
                return Err(DynamicsError::Invalid("step must be positive"));
            }
            let steps = ((t1 - t0).abs() / h).round().max(if t1 == t0 { 0.0 } else { 1.0 }) as usize;
            let step = if steps == 0 { 0.0 } else { (t1 - t0) / steps as f64 };
            for i in 0..steps {
                let t = t0 + i as f64 * step;
                let k1 = rhs(t, &y)?;
                let k2 = rhs(t + 0.5 * step, &axpy(&y, 0.5 * step, &k1))?;
                let k3 = rhs(t + 0.5 * step, &axpy(&y, 0.5 * step, &k2))?;
                let k4 = rhs(t + step, &axpy(&y, step, &k3))?;
                y = combine(&y, step, &[&k1, &k2, &k3, &k4], &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
                let tn = if i + 1 == steps { t1 } else { t0 + (i + 1) as f64 * step };
                finite(tn, &y)?;
                push(&mut samples, tn, &y);
            }
        }
        Method::Rkf45 { atol, rtol } => {
            if !(atol > 0.0 && rtol >= 0.0) {
                return Err(DynamicsError::Invalid("tolerances must be positive"));
            }
            let mut t = t0;
            let mut h = dir * ((t1 - t0).abs() * 1e-3).clamp(1e-6, 1e-2);
            while (t1 - t) * dir > 0.0 {
                if (t + h - t1) * dir > 0.0 {
                    h = t1 - t;
                }
                let (y5, err) = fehlberg_step(&rhs, t, &y, h, atol, rtol)?;
                if err <= 1.0 {
                    t = if (t + h - t1) * dir >= 0.0 { t1 } else { t + h };
                    y = y5;
                    finite(t, &y)?;
                    push(&mut samples, t, &y);
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h *= factor;
                if h.abs() < 1e-14 * t.abs().max(1.0) {
                    return Err(DynamicsError::StepFailure { t, h });
                }
            }
        }
    }
    Ok(Trajectory { method, samples })
}

fn fehlberg_step(
    rhs: &impl Fn(f64, &State) -> Result<State, DynamicsError>,
    t: f64,
    y: &State,
    h: f64,
    atol: f64,
    rtol: f64,
) -> Result<(State, f64), DynamicsError> {
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + h / 4.0, &combine(y, h, &[&k1], &[1.0 / 4.0]))?;
    let k3 = rhs(t + 3.0 * h / 8.0, &combine(y, h, &[&k1, &k2], &[3.0 / 32.0, 9.0 / 32.0]))?;
    let k4 = rhs(
        t + 12.0 * h / 13.0,
        &combine(y, h, &[&k1, &k2, &k3], &[1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0]),
    )?;
    let k5 = rhs(
        t + h,
        &combine(y, h, &[&k1, &k2, &k3, &k4], &[439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0]),
    )?;
    let k6 = rhs(
        t + h / 2.0,
        &combine(
            y,
            h,
            &[&k1, &k2, &k3, &k4, &k5],
            &[-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
        ),
    )?;
    let ks = [&k1, &k3, &k4, &k5, &k6];
    let y4 = combine(y, h, &ks, &[25.0 / 216.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0]);
    let y5 = combine(
        y,
        h,
        &ks,
        &[16.0 / 135.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0],
    );
    let mut err = 0.0f64;
    for i in 0..3 {
        let scale = atol + rtol * y[i].abs().max(y5[i].abs());
        err = err.max((y5[i] - y4[i]).abs() / scale);
    }
    if !err.is_finite() {
        err = f64::INFINITY;
    }
    Ok((y5, err))
}

/// Integrates a field; components may depend on `t`.
pub fn integrate_ode(
    field: &VectorField3,
    x0: [f64; 3],
    span: (f64, f64),
    method: Method,
) -> Result<Trajectory, DynamicsError> {
    let tape = field.tape();
    integrate_fn(
        |t, x| {
            let v = tape.eval(x, t)?;
            Ok(Vec3::new(v[0], v[1], v[2]))
        },
        x0,
        span,
        method,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub initial: f64,
    /// `max |f - f_0|` over the samples.
    pub max_abs: f64,
    /// `max_abs / |f_0|`, or `max_abs` when `f_0 = 0`.
    pub relative: f64,
}

pub fn observe_drift_fn(
    traj: &Trajectory,
    f: impl Fn(f64, [f64; 3]) -> Result<f64, EvalError>,
) -> Result<Drift, EvalError> {
    let first = traj.samples[0];
    let initial = f(first.t, first.x)?;
    let mut max_abs = 0.0f64;
    for r in &traj.samples {
        max_abs = max_abs.max((f(r.t, r.x)? - initial).abs());
    }
    let relative = if initial != 0.0 { max_abs / initial.abs() } else { max_abs };
    Ok(Drift {
        initial,
        max_abs,
        relative,
    })
}

pub fn observe_drift(traj: &Trajectory, f: &Expr) -> Result<Drift, EvalError> {
    let tape = Tape::compile(std::slice::from_ref(f));
    observe_drift_fn(traj, |t, x| Ok(tape.eval(x, t)?[0]))
}

/// Paths for [`line_integral`].
#[derive(Debug, Clone)]
pub enum Path {
    /// Straight segments through the vertices, in order.
    Polyline(Vec<[f64; 3]>),
    /// `t -> curve(t)` on `[t0, t1]`, split into `segments` pieces.
    Parametric {
        curve: [Expr; 3],
        t0: f64,
        t1: f64,
        segments: usize,
    },
}

impl Path {
    /// Closed polygon through `vertices`.
    pub fn polygon(vertices: &[[f64; 3]]) -> Path {
        let mut v = vertices.to_vec();
        if let Some(&first) = vertices.first() {
            v.push(first);
        }
        Path::Polyline(v)
    }

    /// Polyline through the trajectory samples.
    pub fn trajectory(traj: &Trajectory) -> Path {
        Path::Polyline(traj.points())
    }
}

fn orthonormal_pair(e1: Vec3, e2: Vec3) -> Option<(Vec3, Vec3)> {
    let a = e1.try_normalize(1e-300)?;
    let b = (e2 - a * a.dot(&e2)).try_normalize(1e-12 * e2.norm())?;
    Some((a, b))
}

/// Square of side `side` centered at `center` in the plane of `e1, e2`,
/// traversed from `e1` towards `e2`. `None` if `e1, e2` are dependent.
pub fn square_loop(center: [f64; 3], e1: Vec3, e2: Vec3, side: f64) -> Option<Path> {
    let (a, b) = orthonormal_pair(e1, e2)?;
    let c = Vec3::from(center);
    let h = 0.5 * side;
    let v = [(1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .map(|(i, j)| (c + h * (i * a + j * b)).into());
    Some(Path::polygon(&v))
}

/// Regular polygon inscribed in the circle of `radius`, oriented like [`square_loop`].
pub fn regular_polygon(center: [f64; 3], e1: Vec3, e2: Vec3, radius: f64, sides: usize) -> Option<Path> {
    let (a, b) = orthonormal_pair(e1, e2)?;
    let c = Vec3::from(center);
    let v: Vec<[f64; 3]> = (0..sides.max(3))
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / sides.max(3) as f64;
            (c + radius * (th.cos() * a + th.sin() * b)).into()
        })
        .collect();
    Some(Path::polygon(&v))
}

/// `int_path omega` by the 32-node Gauss-Legendre rule on each segment.
pub fn line_integral(omega: &Form, path: &Path) -> Result<f64, DynamicsError> {
    if omega.degree() != 1 {
        return Err(DynamicsError::Invalid("line integrals need a 1-form"));
    }
    let tape = omega.tape();
    let at = |p: [f64; 3]| -> Result<Vec3, DynamicsError> {
        let v = tape
            .eval(p, 0.0)
            .map_err(|source| DynamicsError::SingularityOnPath { point: p, source })?;
        Ok(Vec3::new(v[0], v[1], v[2]))
    };
    let mut total = 0.0;
    match path {
        Path::Polyline(v) => {
            for w in v.windows(2) {
                let (a, b) = (Vec3::from(w[0]), Vec3::from(w[1]));
                let d = b - a;
                for (s, wt) in gl32_points(0.0, 1.0) {
                    total += wt * at((a + s * d).into())?.dot(&d);
                }
            }
        }
        Path::Parametric {
            curve,
            t0,
            t1,
            segments,
        } => {
            let mut all = curve.to_vec();
            all.extend(curve.iter().map(|c| c.diff(Var::T)));
            let ct = Tape::compile(&all);
            let n = (*segments).max(1);
            let dt = (t1 - t0) / n as f64;
            for k in 0..n {
                let a = t0 + k as f64 * dt;
                for (t, wt) in gl32_points(a, a + dt) {
                    let c = ct
                        .eval([0.0; 3], t)
                        .map_err(|source| DynamicsError::SingularityOnPath { point: [f64::NAN; 3], source })?;
                    let p = [c[0], c[1], c[2]];
                    total += wt * at(p)?.dot(&Vec3::new(c[3], c[4], c[5]));
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{ext_d, grad, pair_two_form};
    use crate::expr::parse;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn rotation() -> VectorField3 {
        VectorField3::parse("rot", ["-y", "x", "0"]).unwrap()
    }

    #[test]
    fn rotation_quarter_turn() {
        let tr = integrate_ode(&rotation(), [1.0, 0.0, 0.0], (0.0, FRAC_PI_2), Method::Rk4 { h: 1e-3 }).unwrap();
        let end = tr.last();
        assert_eq!(end.t, FRAC_PI_2);
        assert!((Vec3::from(end.x) - Vec3::new(0.0, 1.0, 0.0)).amax() < 1e-9);
        assert!((end.s - FRAC_PI_2).abs() < 1e-9);
        assert!(tr.samples.windows(2).all(|w| w[1].s >= w[0].s));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |h| {
            let tr = integrate_ode(&rotation(), [1.0, 0.0, 0.0], (0.0, 2.0), Method::Rk4 { h }).unwrap();
            (Vec3::from(tr.last().x) - Vec3::new(2f64.cos(), 2f64.sin(), 0.0)).norm()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((14.0..18.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn zero_field_and_adaptive_method() {
        let tr = integrate_ode(&VectorField3::zero(), [1.0, 2.0, 3.0], (0.0, 1.0), Method::default()).unwrap();
        assert!(tr.samples.iter().all(|r| r.x == [1.0, 2.0, 3.0] && r.s == 0.0));
        let m = Method::Rkf45 { atol: 1e-10, rtol: 1e-10 };
        let tr = integrate_ode(&rotation(), [1.0, 0.0, 0.0], (0.0, PI), m).unwrap();
        assert!((Vec3::from(tr.last().x) - Vec3::new(-1.0, 0.0, 0.0)).amax() < 1e-8);
        assert!(tr.samples.len() < 500);
        let back = integrate_ode(&rotation(), [1.0, 0.0, 0.0], (0.0, -FRAC_PI_2), m).unwrap();
        assert!((Vec3::from(back.last().x) - Vec3::new(0.0, -1.0, 0.0)).amax() < 1e-8);
    }

    #[test]
    fn singularities_are_reported() {
        let v = VectorField3::parse("edge", ["1", "0", "sqrt(0.25 - x)"]).unwrap();
        let r = integrate_ode(&v, [0.0, 0.0, 0.0], (0.0, 1.0), Method::Rk4 { h: 1e-3 });
        assert!(matches!(r, Err(DynamicsError::SingularityHit { source: Some(_), .. })));
        // x' = x^2 blows up at t = 1 from x = 1.
        let v = VectorField3::parse("blowup", ["x^2", "0", "0"]).unwrap();
        let r = integrate_ode(&v, [1.0, 0.0, 0.0], (0.0, 2.0), Method::Rk4 { h: 1e-3 });
        assert!(matches!(r, Err(DynamicsError::SingularityHit { .. })));
        let r = integrate_ode(&v, [1.0, 0.0, 0.0], (0.0, 2.0), Method::Rkf45 { atol: 1e-10, rtol: 1e-10 });
        assert!(r.is_err());
    }

    #[test]
    fn drift_examples() {
        let tr = integrate_ode(&rotation(), [1.0, 0.0, 0.0], (0.0, TAU), Method::Rk4 { h: 1e-3 }).unwrap();
        let d = observe_drift(&tr, &parse("x^2 + y^2").unwrap()).unwrap();
        assert!(d.relative < 1e-10);
        let d = observe_drift(&tr, &Expr::x()).unwrap();
        assert!((d.max_abs - 2.0).abs() < 1e-6);
    }

    #[test]
    fn line_integral_examples() {
        let omega = Form::parse(1, &["-y", "x", "0"]).unwrap();
        let circle = Path::Parametric {
            curve: [parse("cos(t)").unwrap(), parse("sin(t)").unwrap(), Expr::zero()],
            t0: 0.0,
            t1: TAU,
            segments: 8,
        };
        assert!((line_integral(&omega, &circle).unwrap() - TAU).abs() < 1e-10);

        let exact = Form::one_form(grad(&parse("x^2*y - sin(z)").unwrap()).components);
        let hexagon = regular_polygon([0.3, 0.1, 0.2], Vec3::x(), Vec3::new(0.2, 1.0, 0.3), 1.0, 6).unwrap();
        assert!(line_integral(&exact, &hexagon).unwrap().abs() < 1e-10);
        assert!(line_integral(&exact, &circle).unwrap().abs() < 1e-10);

        // Stokes on a square: d omega = 2 dx^dy.
        let sq = square_loop([0.0; 3], Vec3::x(), Vec3::y(), 0.5).unwrap();
        assert!((line_integral(&omega, &sq).unwrap() - 2.0 * 0.25).abs() < 1e-12);
        let d = ext_d(&omega).unwrap().eval([0.0; 3], 0.0).unwrap();
        assert_eq!(pair_two_form(&d, &Vec3::x(), &Vec3::y()), 2.0);

        let tr = integrate_ode(&rotation(), [1.0, 0.0, 0.0], (0.0, 1.0), Method::Rk4 { h: 1e-3 }).unwrap();
        let along = line_integral(&exact, &Path::trajectory(&tr)).unwrap();
        let h = parse("x^2*y - sin(z)").unwrap();
        let want = h.eval(tr.last().x, 0.0).unwrap() - h.eval([1.0, 0.0, 0.0], 0.0).unwrap();
        assert!((along - want).abs() < 1e-12);

        let pole = Form::parse(1, &["1/x", "0", "0"]).unwrap();
        let through = Path::Polyline(vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        // Gauss nodes avoid x = 0 exactly, so the pole is only hit by a vertex.
        let at_vertex = Path::Polyline(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert!(line_integral(&pole, &through).is_ok());
        assert!(line_integral(&pole, &at_vertex).is_ok());
        assert!(square_loop([0.0; 3], Vec3::x(), 2.0 * Vec3::x(), 1.0).is_none());
    }

    #[test]
    fn csv_export() {
        let tr = integrate_ode(&rotation(), [1.0, 0.0, 0.0], (0.0, 0.01), Method::Rk4 { h: 1e-3 }).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,y,z,s\n"));
        assert_eq!(text.lines().count(), 12);
    }
}
