use hamflow::check::Check;
use hamflow::dynamics::{integrate_ode, Method};
use hamflow::exterior::{self, Form, VectorField3};
use hamflow::expr::{self, Var};
use hamflow::frenet::{classify_structure, FrameFields};
use hamflow::poisson::{
    homotopy_potential, jacobi_residual, reconstruct_casimir, riccati_integrate, HomotopyOptions, ReconstructError,
    RiccatiCoefficients,
};
use hamflow::sampling::SampleBox;
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(hamflow, ObstructionError, PyArithmeticError);

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn numerical_error(e: impl std::fmt::Display) -> PyErr {
    PyArithmeticError::new_err(e.to_string())
}

fn var(name: &str) -> PyResult<Var> {
    match name {
        "x" => Ok(Var::X),
        "y" => Ok(Var::Y),
        "z" => Ok(Var::Z),
        "t" => Ok(Var::T),
        _ => Err(PyValueError::new_err(format!("unknown variable {name:?}"))),
    }
}

/// Symbolic expression in `x, y, z, t`.
#[pyclass(name = "Expr", frozen, from_py_object)]
#[derive(Clone)]
struct PyExpr(expr::Expr);

#[derive(FromPyObject)]
enum Operand {
    Expr(PyExpr),
    Number(f64),
}

impl Operand {
    fn expr(self) -> expr::Expr {
        match self {
            Operand::Expr(e) => e.0,
            Operand::Number(c) => expr::Expr::constant(c),
        }
    }
}

#[pymethods]
impl PyExpr {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        expr::parse(text).map(PyExpr).map_err(value_error)
    }

    #[pyo3(signature = (x, y, z, t = 0.0))]
    fn eval(&self, x: f64, y: f64, z: f64, t: f64) -> PyResult<f64> {
        self.0.eval([x, y, z], t).map_err(numerical_error)
    }

    fn diff(&self, var_name: &str) -> PyResult<Self> {
        Ok(PyExpr(self.0.diff(var(var_name)?)))
    }

    fn depends_on(&self, var_name: &str) -> PyResult<bool> {
        Ok(self.0.depends_on(var(var_name)?))
    }

    #[getter]
    fn dag_size(&self) -> usize {
        self.0.dag_size()
    }

    fn __add__(&self, other: Operand) -> Self {
        PyExpr(self.0.clone() + other.expr())
    }

    fn __radd__(&self, other: Operand) -> Self {
        PyExpr(other.expr() + self.0.clone())
    }

    fn __sub__(&self, other: Operand) -> Self {
        PyExpr(self.0.clone() - other.expr())
    }

    fn __rsub__(&self, other: Operand) -> Self {
        PyExpr(other.expr() - self.0.clone())
    }

    fn __mul__(&self, other: Operand) -> Self {
        PyExpr(self.0.clone() * other.expr())
    }

    fn __rmul__(&self, other: Operand) -> Self {
        PyExpr(other.expr() * self.0.clone())
    }

    fn __truediv__(&self, other: Operand) -> Self {
        PyExpr(self.0.clone() / other.expr())
    }

    fn __rtruediv__(&self, other: Operand) -> Self {
        PyExpr(other.expr() / self.0.clone())
    }

    fn __pow__(&self, exponent: Operand, _modulo: Option<Py<PyAny>>) -> Self {
        PyExpr(self.0.pow(exponent.expr()))
    }

    fn __neg__(&self) -> Self {
        PyExpr(-self.0.clone())
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr('{}')", self.0.to_string_limited(80))
    }
}

/// Parses an expression.
#[pyfunction]
fn parse(text: &str) -> PyResult<PyExpr> {
    PyExpr::new(text)
}

fn check_dict<'py>(py: Python<'py>, c: &Check) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &c.name)?;
    d.set_item("passed", c.passed())?;
    d.set_item("max_residual", c.max_residual)?;
    d.set_item("samples", c.samples)?;
    d.set_item("tolerance", c.tolerance)?;
    d.set_item("note", c.note.as_deref())?;
    Ok(d)
}

/// Vector field on R^3 with symbolic components.
#[pyclass(name = "VectorField", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyVectorField(VectorField3);

#[pymethods]
impl PyVectorField {
    #[new]
    #[pyo3(signature = (components, name = "V"))]
    fn new(components: [String; 3], name: &str) -> PyResult<Self> {
        let [a, b, c] = &components;
        VectorField3::parse(name, [a, b, c]).map(PyVectorField).map_err(value_error)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.0.name
    }

    #[getter]
    fn components(&self) -> [PyExpr; 3] {
        self.0.components.clone().map(PyExpr)
    }

    #[pyo3(signature = (point, t = 0.0))]
    fn eval(&self, point: [f64; 3], t: f64) -> PyResult<[f64; 3]> {
        let v = self.0.eval(point, t).map_err(numerical_error)?;
        Ok([v.x, v.y, v.z])
    }

    fn curl(&self) -> Self {
        PyVectorField(exterior::curl(&self.0))
    }

    fn div(&self) -> PyExpr {
        PyExpr(exterior::div(&self.0))
    }

    fn cross(&self, other: &PyVectorField) -> Self {
        PyVectorField(self.0.cross(&other.0))
    }

    fn dot(&self, other: &PyVectorField) -> PyExpr {
        PyExpr(self.0.dot(&other.0))
    }

    fn bracket(&self, other: &PyVectorField) -> Self {
        PyVectorField(exterior::bracket(&self.0, &other.0))
    }

    /// `J . curl J`, which vanishes exactly when `J` satisfies the Jacobi identity.
    fn jacobi_residual(&self) -> PyExpr {
        PyExpr(jacobi_residual(&self.0))
    }

    /// Frenet frame `(t, n, b)` of the streamline through `point`.
    fn frame_at(&self, point: [f64; 3]) -> PyResult<([f64; 3], [f64; 3], [f64; 3])> {
        let f = hamflow::frenet::frame_at(&self.0, point).map_err(numerical_error)?;
        Ok((f.t, f.n, f.b))
    }

    /// Helicities `(H_n, H_nb, H_b)` at `point`.
    fn helicities_at(&self, point: [f64; 3]) -> PyResult<(f64, f64, f64)> {
        let h = hamflow::frenet::helicities_at(&self.0, point).map_err(numerical_error)?;
        Ok((h.h_n, h.h_nb, h.h_b))
    }

    /// Samples the cube `[-half_width, half_width]^3` and classifies the frame.
    #[pyo3(signature = (samples = 100, seed = 0, half_width = 2.0, tol = 1e-8))]
    fn classify<'py>(
        &self,
        py: Python<'py>,
        samples: usize,
        seed: u64,
        half_width: f64,
        tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let points = SampleBox::cube(half_width).sample(samples, seed, 0);
        let class = classify_structure(&FrameFields::new(&self.0), &points, tol);
        let d = PyDict::new(py);
        d.set_item("verdict", class.verdict.as_str())?;
        d.set_item("samples", class.samples)?;
        d.set_item("max_helicity", class.max_helicity)?;
        d.set_item("max_helicity_at", class.max_helicity_at)?;
        d.set_item("degenerate", class.degenerate.len())?;
        Ok(d)
    }

    /// Integrates the field; returns rows `(t, x, y, z, s)`.
    #[pyo3(signature = (x0, t0, t1, method = "rk4", h = 1e-3, atol = 1e-10, rtol = 1e-10))]
    fn integrate(
        &self,
        x0: [f64; 3],
        t0: f64,
        t1: f64,
        method: &str,
        h: f64,
        atol: f64,
        rtol: f64,
    ) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
        let method = match method {
            "rk4" => Method::Rk4 { h },
            "rkf45" => Method::Rkf45 { atol, rtol },
            other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
        };
        let traj = integrate_ode(&self.0, x0, (t0, t1), method).map_err(numerical_error)?;
        Ok(traj
            .samples
            .iter()
            .map(|s| (s.t, s.x[0], s.x[1], s.x[2], s.s))
            .collect())
    }

    fn __repr__(&self) -> String {
        let [a, b, c] = self.0.components.clone().map(|e| e.to_string_limited(40));
        format!("VectorField({}: ({a}, {b}, {c}))", self.0.name)
    }
}

/// Integrates the Riccati equation along the streamline of `field`.
/// Returns rows `(s, x, y, z, mu)` with `mu = None` at poles.
#[pyfunction]
#[pyo3(signature = (field, start, mu0 = 0.0, length = 5.0, step = 1e-3))]
fn riccati(
    field: &PyVectorField,
    start: [f64; 3],
    mu0: f64,
    length: f64,
    step: f64,
) -> PyResult<Vec<(f64, f64, f64, f64, Option<f64>)>> {
    let frames = FrameFields::new(&field.0);
    let path = riccati_integrate(&RiccatiCoefficients::FieldDriven(&frames), start, mu0, length, step)
        .map_err(numerical_error)?;
    Ok(path
        .samples
        .iter()
        .map(|r| (r.s, r.x[0], r.x[1], r.x[2], r.mu()))
        .collect())
}

/// Riccati equation with constant helicities; returns rows `(s, mu)`.
#[pyfunction]
#[pyo3(signature = (h_n, h_nb, h_b, mu0 = 0.0, length = 1.0, step = 1e-3))]
fn riccati_constant(h_n: f64, h_nb: f64, h_b: f64, mu0: f64, length: f64, step: f64) -> PyResult<Vec<(f64, Option<f64>)>> {
    let coeffs = move |_: f64| [h_n, h_nb, h_b];
    let path = riccati_integrate(&RiccatiCoefficients::Explicit(&coeffs), [0.0; 3], mu0, length, step)
        .map_err(numerical_error)?;
    Ok(path.samples.iter().map(|r| (r.s, r.mu())).collect())
}

/// Potential of the one-form `p dx + q dy + r dz`, evaluated at `points`.
#[pyfunction]
#[pyo3(signature = (p, q, r, points, base = [0.0, 0.0, 0.0]))]
fn homotopy(p: &str, q: &str, r: &str, points: Vec<[f64; 3]>, base: [f64; 3]) -> PyResult<Vec<f64>> {
    let omega = Form::parse(1, &[p, q, r]).map_err(value_error)?;
    let opts = HomotopyOptions {
        base,
        ..HomotopyOptions::default()
    };
    let potential = homotopy_potential(&omega, &opts).map_err(numerical_error)?;
    points
        .into_iter()
        .map(|x| potential.value(x).map_err(numerical_error))
        .collect()
}

/// Casimir of `j` compatible with `v`. Returns `C` sampled at `points`.
/// Raises `ObstructionError` when the integrating factor is not closed.
#[pyfunction]
#[pyo3(signature = (v, j, samples = 50, seed = 0, half_width = 2.0, points = None))]
fn reconstruct<'py>(
    py: Python<'py>,
    v: &PyVectorField,
    j: &PyVectorField,
    samples: usize,
    seed: u64,
    half_width: f64,
    points: Option<Vec<[f64; 3]>>,
) -> PyResult<Bound<'py, PyDict>> {
    let sample_points = SampleBox::cube(half_width).sample(samples, seed, 0);
    let (potential, report) = match reconstruct_casimir(&v.0, &j.0, &sample_points, &HomotopyOptions::default()) {
        Ok(r) => r,
        Err(e @ ReconstructError::ObstructionGodbillonVey { .. }) => {
            return Err(ObstructionError::new_err(e.to_string()));
        }
        Err(e) => return Err(numerical_error(e)),
    };
    let values: Vec<f64> = points
        .unwrap_or_default()
        .into_iter()
        .map(|x| potential.value(x).map_err(numerical_error))
        .collect::<PyResult<_>>()?;
    let d = PyDict::new(py);
    d.set_item("values", values)?;
    d.set_item("grad_c_dot_v", report.grad_c_dot_v.max_abs)?;
    d.set_item("alignment", report.alignment.max_abs)?;
    d.set_item("lambda_variation", report.lambda_variation)?;
    d.set_item("xi_vanishes", report.xi_vanishes)?;
    Ok(d)
}

/// Runs the Darboux-Halphen verification suite; one dict per check.
#[pyfunction]
#[pyo3(signature = (points = 100, seed = 7))]
fn halphen_suite<'py>(py: Python<'py>, points: usize, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let checks = py.detach(|| hamflow::halphen::verification_suite(points, seed));
    checks.iter().map(|c| check_dict(py, c)).collect()
}

#[pymodule(name = "hamflow")]
fn hamflow_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ObstructionError", m.py().get_type::<ObstructionError>())?;
    m.add_class::<PyExpr>()?;
    m.add_class::<PyVectorField>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(riccati, m)?)?;
    m.add_function(wrap_pyfunction!(riccati_constant, m)?)?;
    m.add_function(wrap_pyfunction!(homotopy, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(halphen_suite, m)?)?;
    Ok(())
}
