//! Command-line surface: `hamflow <subcommand> [flags]`.
//!
//! Every subcommand prints one JSON [`Report`] to stdout (or `--out`).
//! Exit codes: 0 all checks pass, 1 a check failed, 2 input error,
//! 3 numerical failure.

pub mod report;
pub mod spec;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

pub use report::{exit, exit_code, Report};
pub use spec::{load_field_spec, parse_field_spec, FieldSpec, SpecError};

use crate::check::{Check, ResidualStats};
use crate::dynamics::{integrate_ode, observe_drift, Method};
use crate::exterior::Form;
use crate::expr::{parse, Tape};
use crate::frenet::{classify_structure, FrameFields};
use crate::halphen::verification_suite;
use crate::poisson::{
    hamiltonian_residual, homotopy_potential, jacobi_residual, poisson_from_riccati, reconstruct_casimir,
    riccati_integrate, HomotopyOptions, ReconstructError, RiccatiCoefficients, TubeOptions,
};
use crate::sampling::SampleBox;

#[derive(Debug, Parser)]
#[command(name = "hamflow", version, about = "Hamiltonian structure analysis for 3D vector fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for sample points.
    #[arg(long, global = true, env = "HAMFLOW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Number of sample points (default depends on the subcommand).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Check tolerance (default depends on the subcommand).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Number of verification points for `halphen` (default 100).
    #[arg(long, global = true)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Rk4,
    Rkf45,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frame sampling, helicities and structure classification.
    Analyze { spec: PathBuf },
    /// Riccati transport along a streamline and the resulting Poisson vector.
    Riccati {
        spec: PathBuf,
        #[arg(long, value_parser = parse_point)]
        start: [f64; 3],
        /// Initial ratio; `inf` starts at the pole.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu0: f64,
        #[arg(long, default_value_t = 5.0)]
        length: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Residuals of `v = J x grad H` for each declared pair.
    CheckHamiltonian { spec: PathBuf },
    /// Casimir reconstruction for a declared Poisson vector.
    Reconstruct {
        spec: PathBuf,
        /// Index into `poisson_vectors`.
        #[arg(long, default_value_t = 0)]
        j: usize,
        #[arg(long, value_parser = parse_point)]
        base: Option<[f64; 3]>,
    },
    /// Integrates the field and reports drift of the declared Hamiltonians.
    Traj {
        spec: PathBuf,
        #[arg(long, value_parser = parse_point)]
        x0: [f64; 3],
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        t0: f64,
        #[arg(long, allow_negative_numbers = true)]
        t1: f64,
        #[arg(long, value_enum, default_value_t = MethodName::Rk4)]
        method: MethodName,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, default_value_t = 1e-12)]
        atol: f64,
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Potential of a closed one-form `P dx + Q dy + R dz`.
    Homotopy {
        #[arg(allow_hyphen_values = true)]
        p: String,
        #[arg(allow_hyphen_values = true)]
        q: String,
        #[arg(allow_hyphen_values = true)]
        r: String,
        #[arg(long, value_parser = parse_point)]
        base: Option<[f64; 3]>,
        /// Points at which to report the potential.
        #[arg(long, value_parser = parse_point)]
        at: Vec<[f64; 3]>,
    },
    /// The Darboux-Halphen verification suite.
    Halphen,
}

/// Parses `x,y,z`.
pub fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match parts.as_slice() {
        [Ok(x), Ok(y), Ok(z)] if x.is_finite() && y.is_finite() && z.is_finite() => Ok([*x, *y, *z]),
        _ => Err(format!("expected three finite numbers 'x,y,z', got '{s}'")),
    }
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => exit::INPUT_ERROR,
            CliError::Numerical(_) => exit::NUMERICAL_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Parses `args` (including the program name), runs, writes the report and
/// returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { exit::INPUT_ERROR } else { exit::PASS };
        }
    };
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "hamflow: {e}");
            return e.code();
        }
    };
    let written = match &cli.common.out {
        Some(path) => std::fs::File::create(path).and_then(|f| report.write(f)),
        None => report.write(&mut *stdout),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "hamflow: cannot write report: {e}");
        return exit::INPUT_ERROR;
    }
    report.exit_code()
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let c = &cli.common;
    match &cli.command {
        Command::Analyze { spec } => analyze(spec, c),
        Command::Riccati {
            spec,
            start,
            mu0,
            length,
            step,
            csv,
        } => riccati(spec, c, *start, *mu0, *length, *step, csv.as_deref()),
        Command::CheckHamiltonian { spec } => check_hamiltonian(spec, c),
        Command::Reconstruct { spec, j, base } => reconstruct(spec, c, *j, *base),
        Command::Traj {
            spec,
            x0,
            t0,
            t1,
            method,
            h,
            atol,
            rtol,
            csv,
        } => {
            let method = match method {
                MethodName::Rk4 => Method::Rk4 { h: *h },
                MethodName::Rkf45 => Method::Rkf45 { atol: *atol, rtol: *rtol },
            };
            traj(spec, c, *x0, (*t0, *t1), method, csv.as_deref())
        }
        Command::Homotopy { p, q, r, base, at } => homotopy(&[p.clone(), q.clone(), r.clone()], c, *base, at),
        Command::Halphen => {
            let n = c.points.or(c.samples).unwrap_or(100);
            let mut r = Report::new("halphen", format!("halphen points={n}").as_bytes(), Some(c.seed));
            r.extend(verification_suite(n, c.seed));
            r.details = json!({ "points": n });
            Ok(r)
        }
    }
}

fn load(path: &FsPath) -> Result<(FieldSpec, Vec<u8>), CliError> {
    load_field_spec(path).map_err(input)
}

fn sample(domain: &SampleBox, n: usize, seed: u64) -> Result<Vec<[f64; 3]>, CliError> {
    let pts = domain.sample(n, seed, 0);
    if pts.len() < n {
        return Err(CliError::Input(format!(
            "only {} of {n} admissible points found in the domain",
            pts.len()
        )));
    }
    Ok(pts)
}

fn write_csv(path: &FsPath, f: impl FnOnce(std::fs::File) -> std::io::Result<()>) -> Result<String, CliError> {
    std::fs::File::create(path)
        .and_then(f)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.display().to_string())
}

fn analyze(path: &FsPath, c: &Common) -> Result<Report, CliError> {
    let (spec, bytes) = load(path)?;
    let n = c.samples.unwrap_or(100);
    let tol = c.tol.unwrap_or(1e-8);
    let points = sample(&spec.domain, n, c.seed)?;
    let frames = FrameFields::new(&spec.field);
    let mut ortho = ResidualStats::default();
    let mut volume = ResidualStats::default();
    for &p in &points {
        if let Ok(f) = frames.frame_at(p) {
            ortho.push(f.orthonormality_residual());
            volume.push(f.volume_pairing() - 1.0);
        }
    }
    let class = classify_structure(&frames, &points, tol);
    let mut r = Report::new("analyze", &bytes, Some(c.seed));
    for (name, stats) in [("frame_orthonormality", ortho), ("frame_volume_pairing", volume)] {
        r.push(if stats.samples == 0 {
            Check::skip(name, "no point admits a frame")
        } else {
            Check::threshold(name, stats.max_abs, stats.samples, 1e-12)
        });
    }
    r.push(Check::threshold(
        "classification_consistent",
        if class.is_consistent() { 0.0 } else { 1.0 },
        class.samples,
        0.0,
    ));
    r.verdict = Some(class.verdict.as_str().into());
    r.details = json!({ "field": spec.name, "classification": class });
    Ok(r)
}

fn riccati(
    path: &FsPath,
    c: &Common,
    start: [f64; 3],
    mu0: f64,
    length: f64,
    step: f64,
    csv: Option<&FsPath>,
) -> Result<Report, CliError> {
    let (spec, bytes) = load(path)?;
    let tol = c.tol.unwrap_or(1e-8);
    let frames = FrameFields::new(&spec.field);
    let path_ = riccati_integrate(&RiccatiCoefficients::FieldDriven(&frames), start, mu0, length, step)
        .map_err(|e| match e {
            crate::poisson::RiccatiError::InvalidStep { .. } => input(e),
            _ => numerical(e),
        })?;
    let poisson = poisson_from_riccati(&frames, &path_, TubeOptions::default()).map_err(numerical)?;
    let mut r = Report::new("riccati", &bytes, Some(c.seed));
    r.push(Check::threshold(
        "jacobi_along_path",
        poisson.jacobi.max_abs,
        poisson.jacobi.samples,
        tol,
    ));
    r.push(Check::threshold(
        "jacobi_frobenius_agreement",
        poisson.agreement,
        poisson.samples.len(),
        tol,
    ));
    if let Some(p) = csv {
        r.artifacts.push(write_csv(p, |f| path_.write_csv(std::io::BufWriter::new(f)))?);
    }
    let last = path_.final_sample();
    r.details = json!({
        "field": spec.name,
        "start": start,
        "mu0": if mu0.is_finite() { json!(mu0) } else { json!("inf") },
        "length": length,
        "step": path_.step,
        "final": { "s": last.s, "x": last.x, "p": last.p, "q": last.q },
        "consistency": path_.consistency_residual(),
        "frobenius": poisson.frobenius,
    });
    Ok(r)
}

fn check_hamiltonian(path: &FsPath, c: &Common) -> Result<Report, CliError> {
    let (spec, bytes) = load(path)?;
    if spec.hamiltonians.is_empty() || spec.poisson_vectors.is_empty() {
        return Err(CliError::Input(
            "check-hamiltonian needs both `hamiltonians` and `poisson_vectors`".into(),
        ));
    }
    if spec.hamiltonians.len() != spec.poisson_vectors.len() {
        return Err(CliError::Input(format!(
            "{} hamiltonians but {} poisson_vectors; they are paired by index",
            spec.hamiltonians.len(),
            spec.poisson_vectors.len()
        )));
    }
    let n = c.samples.unwrap_or(100);
    let tol = c.tol.unwrap_or(1e-10);
    let points = sample(&spec.domain, n, c.seed)?;
    let mut r = Report::new("check-hamiltonian", &bytes, Some(c.seed));
    let mut pairs = Vec::new();
    for (i, (j, h)) in spec.poisson_vectors.iter().zip(&spec.hamiltonians).enumerate() {
        let rep = hamiltonian_residual(&spec.field, j, h, &points);
        let jac = Tape::compile(&[jacobi_residual(j)]);
        let jacobi: ResidualStats = points.iter().filter_map(|&p| jac.eval(p, 0.0).ok()).map(|v| v[0]).collect();
        r.push(Check::threshold(format!("hamiltonian_{i}"), rep.residual.max_abs, rep.residual.samples, tol));
        r.push(Check::threshold(format!("jacobi_{i}"), jacobi.max_abs, jacobi.samples, tol));
        r.push(Check::threshold(format!("grad_h_dot_v_{i}"), rep.grad_h_dot_v.max_abs, rep.grad_h_dot_v.samples, tol));
        r.push(Check::threshold(format!("j_dot_v_{i}"), rep.j_dot_v.max_abs, rep.j_dot_v.samples, tol));
        pairs.push(json!({ "index": i, "hamiltonian": h.to_string_limited(256), "report": rep }));
    }
    r.details = json!({ "field": spec.name, "pairs": pairs });
    Ok(r)
}

fn reconstruct(path: &FsPath, c: &Common, j: usize, base: Option<[f64; 3]>) -> Result<Report, CliError> {
    let (spec, bytes) = load(path)?;
    let jf = spec
        .poisson_vectors
        .get(j)
        .ok_or_else(|| CliError::Input(format!("no poisson_vectors[{j}] in the input file")))?;
    let n = c.samples.unwrap_or(50);
    let tol = c.tol.unwrap_or(1e-6);
    let points = sample(&spec.domain, n, c.seed)?;
    let opts = HomotopyOptions {
        base: base.unwrap_or([0.0; 3]),
        ..HomotopyOptions::default()
    };
    let mut r = Report::new("reconstruct", &bytes, Some(c.seed));
    match reconstruct_casimir(&spec.field, jf, &points, &opts) {
        Ok((potential, rep)) => {
            r.push(Check::threshold("casimir_gradient", rep.gradient_check.max_abs, rep.gradient_check.samples, tol));
            r.push(Check::threshold("casimir_alignment", rep.alignment.max_abs, rep.alignment.samples, tol));
            r.push(Check::threshold("grad_c_dot_v", rep.grad_c_dot_v.max_abs, rep.grad_c_dot_v.samples, tol));
            r.details = json!({ "field": spec.name, "base": potential.base, "casimir": rep });
        }
        Err(ReconstructError::ObstructionGodbillonVey {
            d_xi_max,
            xi_wedge_d_xi_max,
            at,
        }) => {
            r.push(Check::fail(
                "casimir",
                "integrating factor is not closed: obstruction to a global Casimir",
            ));
            r.verdict = Some("OBSTRUCTION_GODBILLON_VEY".into());
            r.details = json!({
                "field": spec.name,
                "obstruction": { "d_xi_max": d_xi_max, "xi_wedge_d_xi_max": xi_wedge_d_xi_max, "at": at },
            });
        }
        Err(ReconstructError::Potential(e)) => return Err(numerical(e)),
    }
    Ok(r)
}

fn traj(
    path: &FsPath,
    c: &Common,
    x0: [f64; 3],
    span: (f64, f64),
    method: Method,
    csv: Option<&FsPath>,
) -> Result<Report, CliError> {
    let (spec, bytes) = load(path)?;
    let tol = c.tol.unwrap_or(1e-8);
    let t = integrate_ode(&spec.field, x0, span, method).map_err(|e| match e {
        crate::dynamics::DynamicsError::Invalid(_) => input(e),
        _ => numerical(e),
    })?;
    let mut r = Report::new("traj", &bytes, Some(c.seed));
    let mut drifts = Vec::new();
    for (i, h) in spec.hamiltonians.iter().enumerate() {
        let d = observe_drift(&t, h).map_err(numerical)?;
        r.push(Check::threshold(format!("drift_{i}"), d.relative, t.samples.len(), tol));
        drifts.push(d);
    }
    if spec.hamiltonians.is_empty() {
        r.push(Check::skip("drift", "no hamiltonians declared"));
    }
    if let Some(p) = csv {
        r.artifacts.push(write_csv(p, |f| t.write_csv(std::io::BufWriter::new(f)))?);
    }
    let last = t.last();
    r.details = json!({
        "field": spec.name,
        "method": method,
        "steps": t.samples.len() - 1,
        "final": last,
        "drift": drifts,
    });
    Ok(r)
}

fn homotopy(components: &[String], c: &Common, base: Option<[f64; 3]>, at: &[[f64; 3]]) -> Result<Report, CliError> {
    let exprs = components
        .iter()
        .map(|s| parse(s).map_err(|e| CliError::Input(format!("'{s}': {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let omega = Form::one_form([exprs[0].clone(), exprs[1].clone(), exprs[2].clone()]);
    let opts = HomotopyOptions {
        base: base.unwrap_or([0.0; 3]),
        ..HomotopyOptions::default()
    };
    let n = c.samples.unwrap_or(20);
    let tol = c.tol.unwrap_or(1e-6);
    let canonical = json!({ "form": components, "base": opts.base, "at": at, "samples": n });
    let mut r = Report::new("homotopy", canonical.to_string().as_bytes(), Some(c.seed));
    let potential = homotopy_potential(&omega, &opts).map_err(numerical)?;
    let points = SampleBox::new(
        opts.base.map(|b| b - 1.0),
        opts.base.map(|b| b + 1.0),
    )
    .sample(n, c.seed, 0);
    let stats = potential.verify(&points).map_err(numerical)?;
    r.push(Check::threshold("potential_gradient", stats.max_abs, stats.samples, tol));
    let values = at
        .iter()
        .map(|&p| potential.value(p).map(|v| json!({ "at": p, "value": v })))
        .collect::<Result<Vec<_>, _>>()
        .map_err(numerical)?;
    r.details = json!({ "base": opts.base, "values": values });
    Ok(r)
}
