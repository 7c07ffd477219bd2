use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::ResidualStats;
use crate::exterior::{ext_d, flat, interior, sharp, wedge, Form, FormError, Vec3, VectorField3};
use crate::expr::{EvalError, Tape};
use crate::quadrature::{adaptive, gl32_points};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("one-form is not integrable at {point:?}: eta ^ d eta = {value:e}")]
    NotIntegrable { point: [f64; 3], value: f64 },
    #[error("eta(N) vanishes at {point:?}")]
    PencilSingular { point: [f64; 3] },
    #[error("one-form is not closed at {point:?}: |d omega| = {value:e}")]
    NotClosed { point: [f64; 3], value: f64 },
    #[error(
        "homotopy integrand vanishes identically on {probes} probe rays \
         (max |x . omega(sx)| = {max_integrand:e}, max relative {max_relative:e})"
    )]
    DegenerateIntegrand {
        probes: usize,
        /// Largest `|r . omega|` at the probe points themselves.
        max_integrand: f64,
        /// Largest `|r . omega| / (|r| |omega|)` over all ray nodes.
        max_relative: f64,
    },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("no sample point could be evaluated")]
    NoAdmissiblePoints,
}

/// Vector field `N` fixing the representative of `xi` modulo `eta` by `i_N xi = 0`.
#[derive(Clone, Debug)]
pub enum Gauge {
    /// `N = sharp(eta)`.
    Orthogonal,
    Along(VectorField3),
}

#[derive(Clone, Debug)]
pub struct IntegratingFactor {
    pub xi: Form,
    pub d_xi: Form,
    /// Components of `d eta - xi ^ eta`.
    pub residual: ResidualStats,
    /// Largest component of `d xi` per point.
    pub d_xi_stats: ResidualStats,
    /// Largest component of `xi` per point.
    pub xi_stats: ResidualStats,
    pub closed: bool,
    pub skipped: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `d eta = xi ^ eta` for an integrable 1-form by
/// `xi = -i_N(d eta) / eta(N)`, checking the hypotheses at `points`.
pub fn integrating_factor(
    eta: &Form,
    gauge: &Gauge,
    points: &[[f64; 3]],
) -> Result<IntegratingFactor, PotentialError> {
    let n = match gauge {
        Gauge::Orthogonal => sharp(eta)?,
        Gauge::Along(n) => n.clone(),
    };
    let d_eta = ext_d(eta)?;
    let pairing = interior(&n, eta)?.components()[0].clone();
    let xi = interior(&n, &d_eta)?.scale(&(-1.0 / &pairing));
    let d_xi = ext_d(&xi)?;
    let frob = wedge(eta, &d_eta);
    let defect = d_eta.sub(&wedge(&xi, eta));

    let mut guard = eta.components().to_vec();
    guard.extend(d_eta.components().iter().cloned());
    guard.push(frob.components()[0].clone());
    guard.extend(n.components.iter().cloned());
    guard.push(pairing);
    let guard = Tape::compile(&guard);
    let mut rest = xi.components().to_vec();
    rest.extend(d_xi.components().iter().cloned());
    rest.extend(defect.components().iter().cloned());
    let rest = Tape::compile(&rest);

    let mut out = IntegratingFactor {
        xi: xi.clone(),
        d_xi: d_xi.clone(),
        residual: ResidualStats::default(),
        d_xi_stats: ResidualStats::default(),
        xi_stats: ResidualStats::default(),
        closed: true,
        skipped: 0,
    };
    let mut closed = true;
    for &p in points {
        let Ok(g) = guard.eval(p, 0.0) else {
            out.skipped += 1;
            continue;
        };
        let (e, de, w, nv, en) = (&g[0..3], &g[3..6], g[6], &g[7..10], g[10]);
        if w.abs() > 1e-9 * (1.0 + norm(e) * norm(de)) {
            return Err(PotentialError::NotIntegrable { point: p, value: w });
        }
        if en.abs() <= 1e-12 * norm(e) * norm(nv) {
            return Err(PotentialError::PencilSingular { point: p });
        }
        let r = rest.eval(p, 0.0)?;
        let (x, dx, defect) = (&r[0..3], &r[3..6], &r[6..9]);
        out.xi_stats.push(max_abs(x));
        out.d_xi_stats.push(max_abs(dx));
        out.residual.push(max_abs(defect) / (1.0 + max_abs(de)));
        let xn = norm(x);
        closed &= max_abs(dx) <= 1e-9 * (1.0 + xn + xn * xn);
    }
    if out.residual.samples == 0 {
        return Err(PotentialError::NoAdmissiblePoints);
    }
    out.closed = closed;
    Ok(out)
}

type OneFormFn = dyn Fn([f64; 3]) -> Result<Vec3, EvalError> + Send + Sync;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomotopyOptions {
    pub base: [f64; 3],
    pub tol: f64,
    /// Points whose rays from `base` are used to test the hypotheses.
    pub probes: Vec<[f64; 3]>,
    pub closed_tol: f64,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions {
            base: [0.0; 3],
            tol: 1e-10,
            // Pairwise coordinate differences are powers of two, so rational
            // fields with such factors evaluate exactly here.
            probes: vec![
                [0.5, 1.0, 1.5],
                [-1.0, 1.0, 3.0],
                [2.0, 1.5, 1.0],
                [-0.75, -0.25, 0.25],
                [3.0, -1.0, 1.0],
            ],
            closed_tol: 1e-9,
        }
    }
}

/// `H(x) = int_0^1 (x - base) . omega(base + s (x - base)) ds`.
#[derive(Clone)]
pub struct Potential {
    omega: Arc<OneFormFn>,
    pub base: [f64; 3],
    pub tol: f64,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential")
            .field("base", &self.base)
            .field("tol", &self.tol)
            .finish_non_exhaustive()
    }
}

impl Potential {
    pub fn value(&self, x: [f64; 3]) -> Result<f64, EvalError> {
        let b = Vec3::from(self.base);
        let r = Vec3::from(x) - b;
        if r == Vec3::zeros() {
            return Ok(0.0);
        }
        adaptive(|s| Ok((self.omega)((b + s * r).into())?.dot(&r)), 0.0, 1.0, self.tol)
    }

    /// Central-difference gradient with step `h`.
    pub fn gradient(&self, x: [f64; 3], h: f64) -> Result<Vec3, EvalError> {
        let mut g = Vec3::zeros();
        for i in 0..3 {
            let (mut a, mut b) = (x, x);
            a[i] += h;
            b[i] -= h;
            g[i] = (self.value(a)? - self.value(b)?) / (2.0 * h);
        }
        Ok(g)
    }

    /// `|grad H - omega|` at `points`, the gradient by central differences.
    pub fn verify(&self, points: &[[f64; 3]]) -> Result<ResidualStats, EvalError> {
        let mut stats = ResidualStats::default();
        for &p in points {
            let g = self.gradient(p, 1e-5)?;
            stats.push((g - (self.omega)(p)?).amax());
        }
        Ok(stats)
    }
}

fn check_rays(
    omega: &OneFormFn,
    d_omega: Option<&Tape>,
    opts: &HomotopyOptions,
) -> Result<(), PotentialError> {
    let b = Vec3::from(opts.base);
    let mut degenerate_probes = 0;
    let mut usable = 0;
    let mut max_integrand = 0.0f64;
    let mut max_relative = 0.0f64;
    for &x in &opts.probes {
        let r = Vec3::from(x) - b;
        if r.norm() == 0.0 {
            continue;
        }
        let mut nodes = 0;
        let mut vanishing = true;
        for (s, _) in gl32_points(0.0, 1.0).chain([(1.0, 0.0)]) {
            let Ok(w) = omega((b + s * r).into()) else {
                continue;
            };
            nodes += 1;
            let g = r.dot(&w);
            let scale = r.norm() * w.norm();
            if s == 1.0 {
                max_integrand = max_integrand.max(g.abs());
            }
            if scale > 0.0 {
                max_relative = max_relative.max(g.abs() / scale);
            }
            vanishing &= g.abs() <= 1e-12 * scale;
        }
        if nodes > 0 {
            usable += 1;
            if vanishing {
                degenerate_probes += 1;
            }
        }
    }
    if usable == 0 {
        return Err(PotentialError::NoAdmissiblePoints);
    }
    if degenerate_probes == usable {
        return Err(PotentialError::DegenerateIntegrand {
            probes: usable,
            max_integrand,
            max_relative,
        });
    }
    let Some(d_omega) = d_omega else {
        return Ok(());
    };
    for &x in &opts.probes {
        let r = Vec3::from(x) - b;
        for s in [0.25, 0.5, 0.75, 1.0] {
            let p: [f64; 3] = (b + s * r).into();
            let (Ok(w), Ok(dw)) = (omega(p), d_omega.eval(p, 0.0)) else {
                continue;
            };
            let m = max_abs(&dw);
            if m > opts.closed_tol * (1.0 + w.norm()) {
                return Err(PotentialError::NotClosed { point: p, value: m });
            }
        }
    }
    Ok(())
}

fn form_fn(omega: &Form) -> Result<Arc<OneFormFn>, PotentialError> {
    if omega.degree() != 1 {
        return Err(FormError::Degree {
            op: "homotopy_potential",
            degree: omega.degree(),
        }
        .into());
    }
    let tape = omega.tape();
    Ok(Arc::new(move |p| {
        let v = tape.eval(p, 0.0)?;
        Ok(Vec3::new(v[0], v[1], v[2]))
    }))
}

/// Potential of a closed 1-form by the homotopy formula along rays from
/// `opts.base`, after checking the integrand and closedness on probe rays.
pub fn homotopy_potential(omega: &Form, opts: &HomotopyOptions) -> Result<Potential, PotentialError> {
    let f = form_fn(omega)?;
    let d_omega = ext_d(omega)?.tape();
    check_rays(f.as_ref(), Some(&d_omega), opts)?;
    Ok(Potential {
        omega: f,
        base: opts.base,
        tol: opts.tol,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error(
        "integrating factor is not closed (max |d xi| = {d_xi_max:e}, \
         max |xi ^ d xi| = {xi_wedge_d_xi_max:e}); no global Casimir"
    )]
    ObstructionGodbillonVey {
        d_xi_max: f64,
        xi_wedge_d_xi_max: f64,
        /// Point where `|d xi|` is largest.
        at: [f64; 3],
    },
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CasimirReport {
    /// `xi` vanished at every sample, so no rescaling was applied.
    pub xi_vanishes: bool,
    pub d_xi_max: f64,
    pub samples: Vec<([f64; 3], f64)>,
    /// `grad C . V` with `grad C` by central differences.
    pub grad_c_dot_v: ResidualStats,
    /// `|grad C - e^-phi eta|`.
    pub gradient_check: ResidualStats,
    /// `|J x grad C| / (|J| |grad C|)`; small when `C` is a Casimir of `J`.
    pub alignment: ResidualStats,
    /// `lambda = |V| / |J x grad C|`, over samples where `J` and `grad C`
    /// are not parallel (`alignment > 1e-8`). Empty when `C` is a Casimir.
    pub lambda_samples: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `(max - min) / mean` of `lambda`.
    pub lambda_variation: f64,
}

/// Reconstructs a Casimir of `J`: integrating factor `xi` of `flat(J)`,
/// `phi` with `d phi = xi`, then `C` with `dC = e^-phi flat(J)`.
pub fn reconstruct_casimir(
    v: &VectorField3,
    j: &VectorField3,
    points: &[[f64; 3]],
    opts: &HomotopyOptions,
) -> Result<(Potential, CasimirReport), ReconstructError> {
    let eta = flat(j);
    let factor = integrating_factor(&eta, &Gauge::Orthogonal, points)?;
    let xi_vanishes = factor.xi_stats.max_abs <= 1e-12;
    if !xi_vanishes && !factor.closed {
        let gv = Tape::compile(&[
            wedge(&factor.xi, &factor.d_xi).components()[0].clone(),
            factor.d_xi.components()[0].clone(),
            factor.d_xi.components()[1].clone(),
            factor.d_xi.components()[2].clone(),
        ]);
        let mut at = points[0];
        let mut d_xi_max = 0.0f64;
        let mut gv_max = 0.0f64;
        for &p in points {
            if let Ok(r) = gv.eval(p, 0.0) {
                gv_max = gv_max.max(r[0].abs());
                let m = max_abs(&r[1..]);
                if m > d_xi_max {
                    d_xi_max = m;
                    at = p;
                }
            }
        }
        return Err(ReconstructError::ObstructionGodbillonVey {
            d_xi_max,
            xi_wedge_d_xi_max: gv_max,
            at,
        });
    }
    let eta_fn = form_fn(&eta)?;
    let scaled: Arc<OneFormFn> = if xi_vanishes {
        eta_fn
    } else {
        let phi = homotopy_potential(&factor.xi, opts)?;
        Arc::new(move |p| Ok((-phi.value(p)?).exp() * eta_fn(p)?))
    };
    check_rays(scaled.as_ref(), None, opts)?;
    let c = Potential {
        omega: scaled,
        base: opts.base,
        tol: opts.tol,
    };

    let fields = Tape::compile(&[v.components.to_vec(), j.components.to_vec()].concat());
    let mut report = CasimirReport {
        xi_vanishes,
        d_xi_max: factor.d_xi_stats.max_abs,
        samples: Vec::new(),
        grad_c_dot_v: ResidualStats::default(),
        gradient_check: ResidualStats::default(),
        alignment: ResidualStats::default(),
        lambda_samples: 0,
        lambda_min: f64::INFINITY,
        lambda_max: 0.0,
        lambda_variation: 0.0,
    };
    let mut lambda_sum = 0.0;
    for &p in points {
        let (Ok(value), Ok(g), Ok(fv)) = (c.value(p), c.gradient(p, 1e-5), fields.eval(p, 0.0)) else {
            continue;
        };
        let (vv, jv) = (Vec3::new(fv[0], fv[1], fv[2]), Vec3::new(fv[3], fv[4], fv[5]));
        report.samples.push((p, value));
        report.grad_c_dot_v.push(g.dot(&vv));
        report.gradient_check.push((g - (c.omega)(p).map_err(PotentialError::from)?).amax());
        let cross = jv.cross(&g).norm();
        let align = cross / (jv.norm() * g.norm());
        report.alignment.push(if align.is_finite() { align } else { 0.0 });
        let lambda = vv.norm() / cross;
        if align > 1e-8 && lambda.is_finite() {
            report.lambda_samples += 1;
            report.lambda_min = report.lambda_min.min(lambda);
            report.lambda_max = report.lambda_max.max(lambda);
            lambda_sum += lambda;
        }
    }
    let n = report.samples.len();
    if n == 0 {
        return Err(PotentialError::NoAdmissiblePoints.into());
    }
    let mean = lambda_sum / report.lambda_samples as f64;
    report.lambda_variation = if report.lambda_samples > 0 && mean > 0.0 {
        (report.lambda_max - report.lambda_min) / mean
    } else {
        report.lambda_min = f64::NAN;
        report.lambda_max = f64::NAN;
        f64::NAN
    };
    Ok((c, report))
}
