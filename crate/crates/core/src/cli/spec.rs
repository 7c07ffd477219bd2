//! JSON field descriptions.
//!
//! ```json
//! {
//!   "name": "euler_top",
//!   "components": ["y*z", "x*z", "x*y"],
//!   "hamiltonians": ["y^2 - z^2"],
//!   "poisson_vectors": [["x/2", "-y/2", "0"]],
//!   "domain": {"lo": [-2, -2, -2], "hi": [2, 2, 2], "exclusions": ["x - y"], "margin": 1e-3}
//! }
//! ```
//!
//! `hamiltonians[i]` is paired with `poisson_vectors[i]` by `check-hamiltonian`.

use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::exterior::VectorField3;
use crate::expr::{parse, Expr};
use crate::sampling::SampleBox;

pub const DEFAULT_HALF_WIDTH: f64 = 2.0;
pub const DEFAULT_MARGIN: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{pointer}: {message}")]
    Invalid { pointer: String, message: String },
}

impl SpecError {
    fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        SpecError::Invalid {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// JSON pointer of the offending value, if the error is about one.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            SpecError::Invalid { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub name: String,
    pub field: VectorField3,
    pub hamiltonians: Vec<Expr>,
    pub poisson_vectors: Vec<VectorField3>,
    pub domain: SampleBox,
}

pub fn load_field_spec(path: impl AsRef<Path>) -> Result<(FieldSpec, Vec<u8>), SpecError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8_lossy(&bytes);
    Ok((parse_field_spec(&text)?, bytes))
}

pub fn parse_field_spec(text: &str) -> Result<FieldSpec, SpecError> {
    let root: Value = serde_json::from_str(text).map_err(|e| SpecError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = root.as_object().ok_or_else(|| SpecError::at("", "expected an object"))?;
    let name = match obj.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(SpecError::at("/name", "expected a string")),
        None => return Err(SpecError::at("/name", "missing")),
    };
    let components = obj
        .get("components")
        .ok_or_else(|| SpecError::at("/components", "missing"))?;
    let field = VectorField3::new(name.clone(), triple(components, "/components")?);
    let hamiltonians = match obj.get("hamiltonians") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| expr(v, &format!("/hamiltonians/{i}")))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(SpecError::at("/hamiltonians", "expected an array")),
    };
    let poisson_vectors = match obj.get("poisson_vectors") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let ptr = format!("/poisson_vectors/{i}");
                Ok(VectorField3::new(format!("J{i}"), triple(v, &ptr)?))
            })
            .collect::<Result<_, SpecError>>()?,
        Some(_) => return Err(SpecError::at("/poisson_vectors", "expected an array")),
    };
    let domain = match obj.get("domain") {
        None | Some(Value::Null) => SampleBox::cube(DEFAULT_HALF_WIDTH),
        Some(v) => domain(v)?,
    };
    Ok(FieldSpec {
        name,
        field,
        hamiltonians,
        poisson_vectors,
        domain,
    })
}

fn expr(v: &Value, ptr: &str) -> Result<Expr, SpecError> {
    match v {
        Value::String(s) => parse(s).map_err(|e| SpecError::at(ptr, e.to_string())),
        Value::Number(n) => Ok(Expr::constant(n.as_f64().unwrap_or(f64::NAN))),
        _ => Err(SpecError::at(ptr, "expected an expression string")),
    }
}

fn triple(v: &Value, ptr: &str) -> Result<[Expr; 3], SpecError> {
    let items = v
        .as_array()
        .ok_or_else(|| SpecError::at(ptr, "expected an array of 3 expressions"))?;
    if items.len() != 3 {
        return Err(SpecError::at(ptr, format!("expected 3 components, found {}", items.len())));
    }
    Ok([
        expr(&items[0], &format!("{ptr}/0"))?,
        expr(&items[1], &format!("{ptr}/1"))?,
        expr(&items[2], &format!("{ptr}/2"))?,
    ])
}

fn point(v: Option<&Value>, ptr: &str, default: f64) -> Result<[f64; 3], SpecError> {
    let Some(v) = v else { return Ok([default; 3]) };
    let items = v
        .as_array()
        .filter(|a| a.len() == 3)
        .ok_or_else(|| SpecError::at(ptr, "expected an array of 3 numbers"))?;
    let mut out = [0.0; 3];
    for (i, x) in items.iter().enumerate() {
        out[i] = x
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| SpecError::at(format!("{ptr}/{i}"), "expected a finite number"))?;
    }
    Ok(out)
}

fn domain(v: &Value) -> Result<SampleBox, SpecError> {
    let obj = v.as_object().ok_or_else(|| SpecError::at("/domain", "expected an object"))?;
    let lo = point(obj.get("lo"), "/domain/lo", -DEFAULT_HALF_WIDTH)?;
    let hi = point(obj.get("hi"), "/domain/hi", DEFAULT_HALF_WIDTH)?;
    if let Some(i) = (0..3).find(|&i| lo[i] >= hi[i]) {
        return Err(SpecError::at(format!("/domain/hi/{i}"), "must exceed the matching lo"));
    }
    let exclusions = match obj.get("exclusions") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| expr(v, &format!("/domain/exclusions/{i}")))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(SpecError::at("/domain/exclusions", "expected an array")),
    };
    let margin = match obj.get("margin") {
        None | Some(Value::Null) => DEFAULT_MARGIN,
        Some(m) => m
            .as_f64()
            .filter(|m| *m >= 0.0)
            .ok_or_else(|| SpecError::at("/domain/margin", "expected a non-negative number"))?,
    };
    Ok(SampleBox::new(lo, hi).excluding(exclusions, margin))
}
