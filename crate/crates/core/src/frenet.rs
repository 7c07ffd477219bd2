//! Frenet-Serret frames of a vector field, helicity densities and the
//! structure classification built on them.
//!
//! The frame fields are symbolic: `t = V/|V|`, `n = -t x curl t / |t x curl t|`
//! and `b = t x n`, so the curls entering the helicities are exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::sync::OnceLock;

use nalgebra::Matrix3;

use crate::exterior::{curl, ext_d, flat, grad, wedge, Form, Vec3, VectorField3};
use crate::expr::{diff_many, EvalError, Expr, Tape, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("equilibrium at {point:?}: |V| = {speed:e}")]
    Equilibrium { point: [f64; 3], speed: f64 },
    #[error("curl of the tangent is parallel to the tangent at {point:?} (|t x curl t| = {transverse:e})")]
    CurlEigenvector { point: [f64; 3], transverse: f64 },
    #[error("frame is singular at {point:?}: {source}")]
    Singular {
        point: [f64; 3],
        #[source]
        source: EvalError,
    },
}

impl FrameError {
    pub fn point(&self) -> [f64; 3] {
        match self {
            FrameError::Equilibrium { point, .. }
            | FrameError::CurlEigenvector { point, .. }
            | FrameError::Singular { point, .. } => *point,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FrameError::Equilibrium { .. } => "equilibrium",
            FrameError::CurlEigenvector { .. } => "curl_eigenvector",
            FrameError::Singular { .. } => "singular",
        }
    }
}

/// `|V(x)|` at or below this counts as an equilibrium.
pub fn equilibrium_threshold(point: [f64; 3]) -> f64 {
    1e-10 * (1.0 + Vec3::from(point).norm())
}

/// `|t x curl t|` at or below this counts as `curl t` parallel to `t`.
pub fn degeneracy_threshold(curl_t_norm: f64) -> f64 {
    1e-10 * curl_t_norm + 1e-13
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSample {
    pub point: [f64; 3],
    pub t: [f64; 3],
    pub n: [f64; 3],
    pub b: [f64; 3],
    pub speed: f64,
}

impl FrameSample {
    pub fn tangent(&self) -> Vec3 {
        Vec3::from(self.t)
    }

    pub fn normal(&self) -> Vec3 {
        Vec3::from(self.n)
    }

    pub fn binormal(&self) -> Vec3 {
        Vec3::from(self.b)
    }

    /// Largest deviation from a right-handed orthonormal triad.
    pub fn orthonormality_residual(&self) -> f64 {
        let (t, n, b) = (self.tangent(), self.normal(), self.binormal());
        [
            t.norm() - 1.0,
            n.norm() - 1.0,
            b.norm() - 1.0,
            t.dot(&n),
            t.dot(&b),
            n.dot(&b),
        ]
        .into_iter()
        .map(f64::abs)
        .chain([(t.cross(&n) - b).amax()])
        .fold(0.0, f64::max)
    }

    /// `i_t(dx^dy^dz)` evaluated on `(n, b)`; equals 1 on a right-handed frame.
    pub fn volume_pairing(&self) -> f64 {
        crate::exterior::pair_two_form(self.t.as_slice(), &self.normal(), &self.binormal())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelicitySample {
    pub point: [f64; 3],
    pub h_n: f64,
    pub h_nb: f64,
    pub h_b: f64,
}

impl HelicitySample {
    pub fn max_abs(&self) -> f64 {
        self.h_n.abs().max(self.h_nb.abs()).max(self.h_b.abs())
    }
}

/// Symbolic frame of a field together with compiled evaluators.
#[derive(Clone)]
pub struct FrameFields {
    pub field: VectorField3,
    pub tangent: VectorField3,
    pub curl_tangent: VectorField3,
    pub normal: VectorField3,
    pub binormal: VectorField3,
    /// `partials[j][i] = d n_i / d x_j`, likewise for `b` below.
    pub normal_partials: [[Expr; 3]; 3],
    pub binormal_partials: [[Expr; 3]; 3],
    /// `(H_n, H_nb, H_b)`.
    pub helicities: [Expr; 3],
    stage1: Tape,
    stage2: Tape,
    jet: OnceLock<Tape>,
}

/// Frame vectors and their Jacobians at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameJet {
    pub frame: FrameSample,
    /// `dn[(i, j)] = d n_i / d x_j`.
    pub dn: Matrix3<f64>,
    pub db: Matrix3<f64>,
}

impl FrameJet {
    pub fn curl_normal(&self) -> Vec3 {
        curl_of_jacobian(&self.dn)
    }

    pub fn curl_binormal(&self) -> Vec3 {
        curl_of_jacobian(&self.db)
    }
}

/// Curl from a Jacobian laid out as `m[(i, j)] = d F_i / d x_j`.
pub fn curl_of_jacobian(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

fn partials(f: &VectorField3) -> [[Expr; 3]; 3] {
    Var::SPATIAL.map(|v| {
        let d = diff_many(&f.components, v);
        [d[0].clone(), d[1].clone(), d[2].clone()]
    })
}

fn curl_from_partials(p: &[[Expr; 3]; 3], name: &str) -> VectorField3 {
    VectorField3::new(
        name,
        [&p[1][2] - &p[2][1], &p[2][0] - &p[0][2], &p[0][1] - &p[1][0]],
    )
}

impl FrameFields {
    pub fn new(field: &VectorField3) -> Self {
        let speed = field.norm();
        let tangent = field.scale(&(1.0 / &speed)).named("t");
        let curl_tangent = curl(&tangent).named("curl t");
        let m = tangent.cross(&curl_tangent);
        let normal = m.scale(&(-1.0 / m.norm())).named("n");
        let binormal = tangent.cross(&normal).named("b");
        let normal_partials = partials(&normal);
        let binormal_partials = partials(&binormal);
        let curl_n = curl_from_partials(&normal_partials, "curl n");
        let curl_b = curl_from_partials(&binormal_partials, "curl b");
        let helicities = [
            normal.dot(&curl_n),
            normal.dot(&curl_b) + binormal.dot(&curl_n),
            binormal.dot(&curl_b),
        ];
        // The first stage guards the divisions performed by the second.
        let mut s1 = field.components.to_vec();
        s1.extend(curl_tangent.components.iter().cloned());
        let stage1 = Tape::compile(&s1);
        let stage2 = Tape::compile(&helicities);
        FrameFields {
            field: field.clone(),
            tangent,
            curl_tangent,
            normal,
            binormal,
            normal_partials,
            binormal_partials,
            helicities,
            stage1,
            stage2,
            jet: OnceLock::new(),
        }
    }

    fn jet_tape(&self) -> &Tape {
        self.jet.get_or_init(|| {
            let mut outs = Vec::with_capacity(18);
            for p in [&self.normal_partials, &self.binormal_partials] {
                for row in p {
                    outs.extend(row.iter().cloned());
                }
            }
            Tape::compile(&outs)
        })
    }

    pub fn jet_at(&self, point: [f64; 3]) -> Result<FrameJet, FrameError> {
        let frame = self.frame_at(point)?;
        let v = self
            .jet_tape()
            .eval(point, 0.0)
            .map_err(|source| FrameError::Singular { point, source })?;
        let m = |off: usize| Matrix3::from_fn(|i, j| v[off + 3 * j + i]);
        Ok(FrameJet {
            frame,
            dn: m(0),
            db: m(9),
        })
    }

    /// Distinct nodes in the compiled helicity evaluator.
    pub fn helicity_tape_len(&self) -> usize {
        self.stage2.len()
    }

    pub fn frame_at(&self, point: [f64; 3]) -> Result<FrameSample, FrameError> {
        let singular = |source| FrameError::Singular { point, source };
        let s1 = self.stage1.eval(point, 0.0).map_err(singular)?;
        let v = Vec3::new(s1[0], s1[1], s1[2]);
        let speed = v.norm();
        if speed <= equilibrium_threshold(point) {
            return Err(FrameError::Equilibrium { point, speed });
        }
        let c = Vec3::new(s1[3], s1[4], s1[5]);
        let t = v / speed;
        let m = t.cross(&c);
        let transverse = m.norm();
        if transverse <= degeneracy_threshold(c.norm()) {
            return Err(FrameError::CurlEigenvector { point, transverse });
        }
        let n = -m / transverse;
        let b = t.cross(&n);
        Ok(FrameSample {
            point,
            t: t.into(),
            n: n.into(),
            b: b.into(),
            speed,
        })
    }

    pub fn sample_at(&self, point: [f64; 3]) -> Result<(FrameSample, HelicitySample), FrameError> {
        let frame = self.frame_at(point)?;
        let h = self
            .stage2
            .eval(point, 0.0)
            .map_err(|source| FrameError::Singular { point, source })?;
        Ok((
            frame,
            HelicitySample {
                point,
                h_n: h[0],
                h_nb: h[1],
                h_b: h[2],
            },
        ))
    }

    pub fn helicities_at(&self, point: [f64; 3]) -> Result<HelicitySample, FrameError> {
        self.sample_at(point).map(|(_, h)| h)
    }

    /// `(t.grad f, n.grad f, b.grad f)`.
    pub fn directional_derivatives_at(&self, f: &Expr, point: [f64; 3]) -> Result<[f64; 3], FrameError> {
        let frame = self.frame_at(point)?;
        let g = grad(f)
            .eval(point, 0.0)
            .map_err(|source| FrameError::Singular { point, source })?;
        Ok([
            frame.tangent().dot(&g),
            frame.normal().dot(&g),
            frame.binormal().dot(&g),
        ])
    }

    /// `Omega_n = eta^d eta`, `Omega_nb = eta^d beta + beta^d eta`,
    /// `Omega_b = beta^d beta` with `eta = flat(n)`, `beta = flat(b)`.
    pub fn obstruction_forms(&self) -> [Form; 3] {
        let eta = flat(&self.normal);
        let beta = flat(&self.binormal);
        let d_eta = ext_d(&eta).expect("1-form");
        let d_beta = ext_d(&beta).expect("1-form");
        [
            wedge(&eta, &d_eta),
            wedge(&eta, &d_beta).add(&wedge(&beta, &d_eta)),
            wedge(&beta, &d_beta),
        ]
    }
}

pub fn frame_at(field: &VectorField3, point: [f64; 3]) -> Result<FrameSample, FrameError> {
    FrameFields::new(field).frame_at(point)
}

pub fn helicities_at(field: &VectorField3, point: [f64; 3]) -> Result<HelicitySample, FrameError> {
    FrameFields::new(field).helicities_at(point)
}

pub fn directional_derivatives_at(
    field: &VectorField3,
    f: &Expr,
    point: [f64; 3],
) -> Result<[f64; 3], FrameError> {
    FrameFields::new(field).directional_derivatives_at(f, point)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    GlobalCandidate,
    LocalOnly,
    FrameDegenerate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::GlobalCandidate => "GLOBAL_CANDIDATE",
            Verdict::LocalOnly => "LOCAL_ONLY",
            Verdict::FrameDegenerate => "FRAME_DEGENERATE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneratePoint {
    pub point: [f64; 3],
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureClass {
    pub verdict: Verdict,
    pub tolerance: f64,
    pub samples: usize,
    /// Largest `|H|` over the three helicities at points with a frame.
    pub max_helicity: f64,
    pub max_helicity_at: Option<[f64; 3]>,
    pub degenerate: Vec<DegeneratePoint>,
}

impl StructureClass {
    /// Verdict implied by the recorded evidence.
    pub fn decide(samples: usize, degenerate: usize, max_helicity: f64, tolerance: f64) -> Verdict {
        if samples == 0 || 2 * degenerate > samples {
            Verdict::FrameDegenerate
        } else if max_helicity < tolerance {
            Verdict::GlobalCandidate
        } else {
            Verdict::LocalOnly
        }
    }

    pub fn is_consistent(&self) -> bool {
        StructureClass::decide(self.samples, self.degenerate.len(), self.max_helicity, self.tolerance)
            == self.verdict
    }
}

pub fn classify_structure(frames: &FrameFields, points: &[[f64; 3]], tolerance: f64) -> StructureClass {
    let mut max_helicity = 0.0f64;
    let mut max_helicity_at = None;
    let mut degenerate = Vec::new();
    for &p in points {
        match frames.helicities_at(p) {
            Ok(h) => {
                // A NaN must surface as "not below tolerance".
                let m = h.max_abs();
                if m.is_nan() || m > max_helicity {
                    max_helicity = if m.is_nan() { f64::INFINITY } else { m };
                    max_helicity_at = Some(p);
                }
            }
            Err(e) => degenerate.push(DegeneratePoint {
                point: p,
                reason: e.kind().to_string(),
            }),
        }
    }
    StructureClass {
        verdict: StructureClass::decide(points.len(), degenerate.len(), max_helicity, tolerance),
        tolerance,
        samples: points.len(),
        max_helicity,
        max_helicity_at,
        degenerate,
    }
}
