//! Vector calculus and exterior calculus on R^3.
//!
//! Differential forms are stored in the canonical Cartesian basis:
//!
//! | degree | components                      |
//! |--------|---------------------------------|
//! | 0      | `f`                             |
//! | 1      | `dx, dy, dz`                    |
//! | 2      | `dy^dz, dz^dx, dx^dy`           |
//! | 3      | `dx^dy^dz`                      |
//!
//! With this layout a 1-form and a 2-form both look like ordinary vectors:
//! `d` on 1-forms is the curl, the wedge of two 1-forms is the cross
//! product, and `i_V(dx^dy^dz)` is the 2-form whose components are `V`.
//! A 2-form is evaluated on a pair of vectors as `c . (U x V)`.

use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{diff_many, parse, sum, EvalError, Expr, ParseError, Tape, Var};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("{op} is not defined on forms of degree {degree}")]
    Degree { op: &'static str, degree: usize },
    #[error("expected {expected} components for a {degree}-form, got {got}")]
    ComponentCount {
        degree: usize,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

fn binomial3(k: usize) -> usize {
    match k {
        0 | 3 => 1,
        1 | 2 => 3,
        _ => 0,
    }
}

/// A vector field on R^3 with symbolic Cartesian components.
///
/// Components may reference `t`; such fields are time-dependent and `t` is
/// treated as a parameter by every spatial operation here.
#[derive(Clone, Debug)]
pub struct VectorField3 {
    pub name: String,
    pub components: [Expr; 3],
}

impl VectorField3 {
    pub fn new(name: impl Into<String>, components: [Expr; 3]) -> Self {
        VectorField3 {
            name: name.into(),
            components,
        }
    }

    pub fn parse(name: impl Into<String>, components: [&str; 3]) -> Result<Self, ParseError> {
        Ok(VectorField3::new(
            name,
            [
                parse(components[0])?,
                parse(components[1])?,
                parse(components[2])?,
            ],
        ))
    }

    pub fn zero() -> Self {
        VectorField3::constant([0.0; 3])
    }

    pub fn constant(c: [f64; 3]) -> Self {
        VectorField3::new(
            "const",
            [Expr::constant(c[0]), Expr::constant(c[1]), Expr::constant(c[2])],
        )
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn eval(&self, point: [f64; 3], time: f64) -> Result<Vec3, EvalError> {
        let v = Tape::compile(&self.components).eval(point, time)?;
        Ok(Vec3::new(v[0], v[1], v[2]))
    }

    pub fn tape(&self) -> Tape {
        Tape::compile(&self.components)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        let [a, b, c] = &self.components;
        VectorField3::new(self.name.clone(), [f(a), f(b), f(c)])
    }

    pub fn scale(&self, factor: &Expr) -> Self {
        self.map(|c| factor * c)
    }

    pub fn add(&self, other: &VectorField3) -> Self {
        let [a, b, c] = &self.components;
        let [d, e, f] = &other.components;
        VectorField3::new(self.name.clone(), [a + d, b + e, c + f])
    }

    pub fn sub(&self, other: &VectorField3) -> Self {
        let [a, b, c] = &self.components;
        let [d, e, f] = &other.components;
        VectorField3::new(self.name.clone(), [a - d, b - e, c - f])
    }

    pub fn dot(&self, other: &VectorField3) -> Expr {
        let [a, b, c] = &self.components;
        let [d, e, f] = &other.components;
        a * d + b * e + c * f
    }

    pub fn cross(&self, other: &VectorField3) -> Self {
        let [a1, a2, a3] = &self.components;
        let [b1, b2, b3] = &other.components;
        VectorField3::new(
            format!("{}x{}", self.name, other.name),
            [a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1],
        )
    }

    pub fn norm(&self) -> Expr {
        self.dot(self).sqrt()
    }

    /// Directional derivative `(V . grad) f`.
    pub fn apply(&self, f: &Expr) -> Expr {
        sum(Var::SPATIAL
            .iter()
            .zip(&self.components)
            .map(|(&v, c)| c * f.diff(v)))
    }
}

/// Cartesian gradient.
pub fn grad(f: &Expr) -> VectorField3 {
    VectorField3::new(
        "grad",
        [f.diff(Var::X), f.diff(Var::Y), f.diff(Var::Z)],
    )
}

/// Jacobian rows `d(components)/d(var)` for each spatial variable.
fn partials(field: &[Expr; 3]) -> [Vec<Expr>; 3] {
    [
        diff_many(field, Var::X),
        diff_many(field, Var::Y),
        diff_many(field, Var::Z),
    ]
}

pub fn curl(v: &VectorField3) -> VectorField3 {
    let [dx, dy, dz] = partials(&v.components);
    VectorField3::new(
        format!("curl {}", v.name),
        [
            &dy[2] - &dz[1],
            &dz[0] - &dx[2],
            &dx[1] - &dy[0],
        ],
    )
}

pub fn div(v: &VectorField3) -> Expr {
    let [a, b, c] = &v.components;
    a.diff(Var::X) + b.diff(Var::Y) + c.diff(Var::Z)
}

/// Jacobi-Lie bracket `[V, W] = (V . grad) W - (W . grad) V`.
pub fn bracket(v: &VectorField3, w: &VectorField3) -> VectorField3 {
    let dv = partials(&v.components);
    let dw = partials(&w.components);
    let comps: Vec<Expr> = (0..3)
        .map(|i| {
            sum((0..3).map(|j| {
                &v.components[j] * &dw[j][i] - &w.components[j] * &dv[j][i]
            }))
        })
        .collect();
    let [a, b, c]: [Expr; 3] = comps.try_into().expect("three components");
    VectorField3::new(format!("[{},{}]", v.name, w.name), [a, b, c])
}

/// A differential form on R^3 in the canonical basis.
#[derive(Clone, Debug)]
pub struct Form {
    degree: usize,
    components: Vec<Expr>,
}

impl Form {
    pub fn new(degree: usize, components: Vec<Expr>) -> Result<Form, FormError> {
        let expected = binomial3(degree);
        if components.len() != expected {
            return Err(FormError::ComponentCount {
                degree,
                expected,
                got: components.len(),
            });
        }
        Ok(Form { degree, components })
    }

    /// The zero form of the given degree. Degrees above 3 have no components.
    pub fn zero(degree: usize) -> Form {
        Form {
            degree,
            components: vec![Expr::zero(); binomial3(degree)],
        }
    }

    pub fn scalar(f: Expr) -> Form {
        Form {
            degree: 0,
            components: vec![f],
        }
    }

    pub fn one_form(c: [Expr; 3]) -> Form {
        Form {
            degree: 1,
            components: c.to_vec(),
        }
    }

    pub fn two_form(c: [Expr; 3]) -> Form {
        Form {
            degree: 2,
            components: c.to_vec(),
        }
    }

    pub fn three_form(f: Expr) -> Form {
        Form {
            degree: 3,
            components: vec![f],
        }
    }

    /// `dx^dy^dz`.
    pub fn volume() -> Form {
        Form::three_form(Expr::one())
    }

    pub fn parse(degree: usize, components: &[&str]) -> Result<Form, FormError> {
        let comps = components
            .iter()
            .map(|s| parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        Form::new(degree, comps)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Components of a 1- or 2-form as a triple.
    pub fn triple(&self) -> Option<[Expr; 3]> {
        self.components.clone().try_into().ok()
    }

    /// The single coefficient of a 0- or 3-form.
    pub fn coefficient(&self) -> Option<&Expr> {
        match self.components.as_slice() {
            [c] => Some(c),
            _ => None,
        }
    }

    pub fn eval(&self, point: [f64; 3], time: f64) -> Result<Vec<f64>, EvalError> {
        Tape::compile(&self.components).eval(point, time)
    }

    pub fn tape(&self) -> Tape {
        Tape::compile(&self.components)
    }

    pub fn scale(&self, factor: &Expr) -> Form {
        Form {
            degree: self.degree,
            components: self.components.iter().map(|c| factor * c).collect(),
        }
    }

    fn zip(&self, other: &Form, f: impl Fn(&Expr, &Expr) -> Expr) -> Form {
        assert_eq!(self.degree, other.degree, "forms of different degree");
        Form {
            degree: self.degree,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Form) -> Form {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Form) -> Form {
        self.zip(other, |a, b| a - b)
    }
}

impl Serialize for Form {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            degree: usize,
            components: Vec<String>,
        }
        Repr {
            degree: self.degree,
            components: self.components.iter().map(|c| c.to_string()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Form {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            degree: usize,
            components: Vec<String>,
        }
        let repr = Repr::deserialize(deserializer)?;
        let comps = repr
            .components
            .iter()
            .map(|s| parse(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        Form::new(repr.degree, comps).map_err(serde::de::Error::custom)
    }
}

fn cross3(a: &[Expr], b: &[Expr]) -> [Expr; 3] {
    [
        &a[1] * &b[2] - &a[2] * &b[1],
        &a[2] * &b[0] - &a[0] * &b[2],
        &a[0] * &b[1] - &a[1] * &b[0],
    ]
}

fn dot3(a: &[Expr], b: &[Expr]) -> Expr {
    &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2]
}

/// Exterior product.
pub fn wedge(a: &Form, b: &Form) -> Form {
    let degree = a.degree + b.degree;
    if degree > 3 {
        return Form::zero(degree);
    }
    match (a.degree, b.degree) {
        (0, _) => b.scale(&a.components[0]),
        (_, 0) => a.scale(&b.components[0]),
        (1, 1) => Form::two_form(cross3(&a.components, &b.components)),
        // dx^(dy^dz) = dy^(dz^dx) = dz^(dx^dy) = vol, and 1-forms commute
        // with 2-forms.
        (1, 2) | (2, 1) => Form::three_form(dot3(&a.components, &b.components)),
        _ => unreachable!("degree sum checked above"),
    }
}

/// Exterior derivative of a form of degree at most 2.
pub fn ext_d(a: &Form) -> Result<Form, FormError> {
    match a.degree {
        0 => {
            let g = grad(&a.components[0]);
            Ok(Form::one_form(g.components))
        }
        1 => {
            let comps: [Expr; 3] = a.triple().expect("1-form");
            Ok(Form::two_form(curl(&VectorField3::new("", comps)).components))
        }
        2 => {
            let comps: [Expr; 3] = a.triple().expect("2-form");
            Ok(Form::three_form(div(&VectorField3::new("", comps))))
        }
        degree => Err(FormError::Degree {
            op: "exterior derivative",
            degree,
        }),
    }
}

/// Interior product `i_V a`.
pub fn interior(v: &VectorField3, a: &Form) -> Result<Form, FormError> {
    match a.degree {
        1 => Ok(Form::scalar(dot3(&v.components, &a.components))),
        // i_V(c . (dy^dz, dz^dx, dx^dy)) = c x V as a 1-form
        2 => Ok(Form::one_form(cross3(&a.components, &v.components))),
        3 => Ok(Form::two_form(v.scale(&a.components[0]).components)),
        degree => Err(FormError::Degree {
            op: "interior product",
            degree,
        }),
    }
}

/// Lie derivative by Cartan's formula `L_V = i_V d + d i_V`.
pub fn lie_derivative(v: &VectorField3, a: &Form) -> Result<Form, FormError> {
    match a.degree {
        0 => Ok(Form::scalar(v.apply(&a.components[0]))),
        1 | 2 => {
            let first = interior(v, &ext_d(a)?)?;
            let second = ext_d(&interior(v, a)?)?;
            Ok(first.add(&second))
        }
        3 => ext_d(&interior(v, a)?),
        degree => Err(FormError::Degree {
            op: "Lie derivative",
            degree,
        }),
    }
}

/// Euclidean index lowering.
pub fn flat(v: &VectorField3) -> Form {
    Form::one_form(v.components.clone())
}

/// Euclidean index raising of a 1-form.
pub fn sharp(a: &Form) -> Result<VectorField3, FormError> {
    match a.triple() {
        Some(c) if a.degree == 1 => Ok(VectorField3::new("sharp", c)),
        _ => Err(FormError::Degree {
            op: "sharp",
            degree: a.degree,
        }),
    }
}

/// Evaluates numeric 2-form components on a pair of vectors.
pub fn pair_two_form(components: &[f64], u: &Vec3, v: &Vec3) -> f64 {
    Vec3::new(components[0], components[1], components[2]).dot(&u.cross(v))
}

/// Skew bivector `Omega^{jk} d_j ^ d_k`, stored as `(Omega^23, Omega^31, Omega^12)`.
#[derive(Clone, Debug)]
pub struct Bivector3 {
    pub components: [Expr; 3],
}

/// `J_i = eps_ijk Omega^jk`; both index orders contribute, so `J_1 = 2 Omega^23`.
pub fn bivec_to_vec(omega: &Bivector3) -> VectorField3 {
    let two = Expr::constant(2.0);
    VectorField3::new("J", omega.components.clone()).scale(&two)
}

pub fn vec_to_bivec(j: &VectorField3) -> Bivector3 {
    Bivector3 {
        components: j.scale(&Expr::constant(0.5)).components,
    }
}

/// Vector field on the time-extended space `R x R^3`, written
/// `time * d/dt + space . grad`.
#[derive(Clone, Debug)]
pub struct ExtendedField {
    pub name: String,
    pub time: Expr,
    pub space: [Expr; 3],
}

impl ExtendedField {
    pub fn new(name: impl Into<String>, time: Expr, space: [Expr; 3]) -> Self {
        ExtendedField {
            name: name.into(),
            time,
            space,
        }
    }

    /// A field on `R^3` (possibly `t`-dependent) with no `d/dt` part.
    pub fn spatial(v: &VectorField3) -> Self {
        ExtendedField::new(v.name.clone(), Expr::zero(), v.components.clone())
    }

    /// `d/dt + v`.
    pub fn time_extension(v: &VectorField3) -> Self {
        ExtendedField::new(format!("d/dt+{}", v.name), Expr::one(), v.components.clone())
    }

    fn all(&self) -> [Expr; 4] {
        let [a, b, c] = &self.space;
        [self.time.clone(), a.clone(), b.clone(), c.clone()]
    }

    pub fn eval(&self, point: [f64; 3], time: f64) -> Result<[f64; 4], EvalError> {
        let v = Tape::compile(&self.all()).eval(point, time)?;
        Ok([v[0], v[1], v[2], v[3]])
    }

    pub fn scale(&self, f: &Expr) -> Self {
        let [a, b, c] = &self.space;
        ExtendedField::new(self.name.clone(), f * &self.time, [f * a, f * b, f * c])
    }

    pub fn add(&self, other: &ExtendedField) -> Self {
        let [a, b, c] = &self.space;
        let [d, e, f] = &other.space;
        ExtendedField::new(
            self.name.clone(),
            &self.time + &other.time,
            [a + d, b + e, c + f],
        )
    }
}

const EXTENDED_VARS: [Var; 4] = [Var::T, Var::X, Var::Y, Var::Z];

/// Lie bracket on `R x R^3`, with `d/dt` acting explicitly.
pub fn extended_bracket(a: &ExtendedField, b: &ExtendedField) -> ExtendedField {
    let ac = a.all();
    let bc = b.all();
    let da: Vec<Vec<Expr>> = EXTENDED_VARS.iter().map(|&v| diff_many(&ac, v)).collect();
    let db: Vec<Vec<Expr>> = EXTENDED_VARS.iter().map(|&v| diff_many(&bc, v)).collect();
    let comp = |i: usize| sum((0..4).map(|j| &ac[j] * &db[j][i] - &bc[j] * &da[j][i]));
    ExtendedField::new(
        format!("[{},{}]", a.name, b.name),
        comp(0),
        [comp(1), comp(2), comp(3)],
    )
}

/// Fields that carry a Lie bracket and can be sampled numerically.
pub trait LieField: Clone {
    fn lie_bracket(&self, other: &Self) -> Self;
    /// Components; length 3 for spatial fields, 4 with the `d/dt` part first.
    fn component_exprs(&self) -> Vec<Expr>;

    fn sample(&self, point: [f64; 3], time: f64) -> Result<Vec<f64>, EvalError> {
        Tape::compile(&self.component_exprs()).eval(point, time)
    }
}

impl LieField for VectorField3 {
    fn lie_bracket(&self, other: &Self) -> Self {
        bracket(self, other)
    }

    fn component_exprs(&self) -> Vec<Expr> {
        self.components.to_vec()
    }
}

impl LieField for ExtendedField {
    fn lie_bracket(&self, other: &Self) -> Self {
        extended_bracket(self, other)
    }

    fn component_exprs(&self) -> Vec<Expr> {
        self.all().to_vec()
    }
}
