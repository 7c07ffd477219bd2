use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::riccati::{riccati_integrate, RiccatiCoefficients, RiccatiError, RiccatiPath};
use super::PencilMember;
use crate::check::ResidualStats;
use crate::exterior::Vec3;
use crate::frenet::{curl_of_jacobian, FrameFields, FrameJet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeOptions {
    /// Distance of the two neighbouring seeds from the start point.
    pub offset: f64,
    /// Samples on each side of a point used by the local fit.
    pub half_window: usize,
}

impl Default for TubeOptions {
    fn default() -> Self {
        TubeOptions {
            offset: 1e-3,
            half_window: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonSample {
    pub s: f64,
    pub point: [f64; 3],
    pub mu: Option<f64>,
    /// `true` when `J = lambda n + b` was used near a pole of `mu`.
    pub b_gauge: bool,
    pub j: [f64; 3],
    pub curl_j: [f64; 3],
    /// `J . curl J`.
    pub jacobi: f64,
    /// Volume coefficient of `flat(J) ^ d flat(J)` from the Jacobian of `J`.
    pub frobenius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonVectorReport {
    pub mu0: f64,
    pub options: TubeOptions,
    pub samples: Vec<PoissonSample>,
    pub jacobi: ResidualStats,
    pub frobenius: ResidualStats,
    /// Largest `|jacobi - frobenius| / (1 + |jacobi|)`.
    pub agreement: f64,
}

/// Least-squares value and gradient of a scalar sampled near `center`,
/// in the frame at `center`; features `1, ds, dn, db, ds^2, ds dn, ds db`.
fn local_fit(center: &FrameJet, pts: &[(Vec3, f64)]) -> Option<(f64, Vec3)> {
    let f = &center.frame;
    let (x0, t, n, b) = (Vec3::from(f.point), f.tangent(), f.normal(), f.binormal());
    let rows = pts.len();
    let mut a = DMatrix::<f64>::zeros(rows, 7);
    let mut y = DVector::<f64>::zeros(rows);
    for (r, (p, v)) in pts.iter().enumerate() {
        let d = p - x0;
        let (ds, dn, db) = (t.dot(&d), n.dot(&d), b.dot(&d));
        for (c, val) in [1.0, ds, dn, db, ds * ds, ds * dn, ds * db].into_iter().enumerate() {
            a[(r, c)] = val;
        }
        y[r] = *v;
    }
    // Column scaling keeps the SVD well conditioned for tiny offsets.
    let scales: Vec<f64> = (0..7)
        .map(|c| a.column(c).amax().max(f64::MIN_POSITIVE))
        .collect();
    for (c, s) in scales.iter().enumerate() {
        a.column_mut(c).scale_mut(1.0 / s);
    }
    let svd = a.svd(true, true);
    let beta = svd.solve(&y, 1e-12).ok()?;
    let coef = |c: usize| beta[c] / scales[c];
    Some((coef(0), coef(1) * t + coef(2) * n + coef(3) * b))
}

struct Ratio {
    value: f64,
    b_gauge: bool,
}

fn ratio(p: f64, q: f64, b_gauge: bool) -> Ratio {
    if b_gauge {
        Ratio { value: q / p, b_gauge }
    } else {
        Ratio { value: p / q, b_gauge }
    }
}

/// Samples `J = n + mu b` along `path` and evaluates its Jacobi residual,
/// extending `mu` off the path by a least-squares fit over a tube of three
/// streamlines (the path and two seeds displaced along `n` and `b`).
pub fn poisson_from_riccati(
    frames: &FrameFields,
    path: &RiccatiPath,
    options: TubeOptions,
) -> Result<PoissonVectorReport, RiccatiError> {
    let first = path.samples[0];
    let mu0 = first.mu().unwrap_or(f64::INFINITY);
    let s_max = path.final_sample().s;
    let lost = |s: f64, point: [f64; 3]| {
        move |source| RiccatiError::FrameLost { s, point, source }
    };
    let start = frames.frame_at(first.x).map_err(lost(0.0, first.x))?;
    let x0 = Vec3::from(first.x);
    let coeffs = RiccatiCoefficients::FieldDriven(frames);
    let mut tube = vec![path.clone()];
    for dir in [start.normal(), start.binormal()] {
        let seed: [f64; 3] = (x0 + options.offset * dir).into();
        tube.push(riccati_integrate(&coeffs, seed, mu0, s_max, path.step)?);
    }
    let len = tube.iter().map(|p| p.samples.len()).min().unwrap_or(0);
    let w = options.half_window;

    let mut samples = Vec::with_capacity(len);
    let mut jacobi = ResidualStats::default();
    let mut frobenius = ResidualStats::default();
    let mut agreement = 0.0f64;
    for k in 0..len {
        let here = path.samples[k];
        let jet = frames.jet_at(here.x).map_err(lost(here.s, here.x))?;
        let lo = k.saturating_sub(w);
        let hi = (k + w).min(len - 1);
        let b_gauge = tube
            .iter()
            .flat_map(|p| &p.samples[lo..=hi])
            .any(|r| r.q.abs() < 0.1 * r.p.abs());
        let pts: Vec<(Vec3, f64)> = tube
            .iter()
            .flat_map(|p| &p.samples[lo..=hi])
            .map(|r| (Vec3::from(r.x), ratio(r.p, r.q, b_gauge).value))
            .collect();
        let own = ratio(here.p, here.q, b_gauge);
        let Some((_, grad)) = local_fit(&jet, &pts) else {
            jacobi.push(f64::NAN);
            continue;
        };
        // J = a n + c b with (a, c) = (1, mu) or (lambda, 1).
        let (a, da, c, dc) = if own.b_gauge {
            (own.value, grad, 1.0, Vec3::zeros())
        } else {
            (1.0, Vec3::zeros(), own.value, grad)
        };
        let (n, b) = (jet.frame.normal(), jet.frame.binormal());
        let j = a * n + c * b;
        let curl_j = a * jet.curl_normal() + da.cross(&n) + c * jet.curl_binormal() + dc.cross(&b);
        // Independent route: antisymmetrize the full Jacobian of J.
        let dj = a * jet.dn + n * da.transpose() + c * jet.db + b * dc.transpose();
        let frob = j.dot(&curl_of_jacobian(&dj));
        let jac = j.dot(&curl_j);
        jacobi.push(jac);
        frobenius.push(frob);
        agreement = agreement.max((jac - frob).abs() / (1.0 + jac.abs()));
        samples.push(PoissonSample {
            s: here.s,
            point: here.x,
            mu: here.mu(),
            b_gauge: own.b_gauge,
            j: j.into(),
            curl_j: curl_j.into(),
            jacobi: jac,
            frobenius: frob,
        });
    }
    Ok(PoissonVectorReport {
        mu0,
        options,
        samples,
        jacobi,
        frobenius,
        agreement,
    })
}

fn matched<'a>(
    r1: &'a PoissonVectorReport,
    r2: &'a PoissonVectorReport,
) -> impl Iterator<Item = (&'a PoissonSample, &'a PoissonSample)> {
    r1.samples
        .iter()
        .zip(&r2.samples)
        .filter(|(a, b)| (Vec3::from(a.point) - Vec3::from(b.point)).amax() <= 1e-9)
}

/// Smallest angle between the two Poisson vectors over common sample points.
pub fn min_angle(r1: &PoissonVectorReport, r2: &PoissonVectorReport) -> Option<f64> {
    matched(r1, r2)
        .map(|(a, b)| Vec3::from(a.j).angle(&Vec3::from(b.j)))
        .reduce(f64::min)
}

/// Jacobi residual of `J1 + c J2` along two reports sharing a streamline.
pub fn pencil_along_paths(
    r1: &PoissonVectorReport,
    r2: &PoissonVectorReport,
    cs: &[f64],
) -> Vec<PencilMember> {
    cs.iter()
        .map(|&c| {
            let mut stats = ResidualStats::default();
            for (a, b) in matched(r1, r2) {
                let j = Vec3::from(a.j) + c * Vec3::from(b.j);
                let cj = Vec3::from(a.curl_j) + c * Vec3::from(b.curl_j);
                stats.push(j.dot(&cj));
            }
            let skipped = r1.samples.len().max(r2.samples.len()) - stats.samples;
            PencilMember { c, stats, skipped }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::VectorField3;

    fn rotation_report(mu0: f64, s_max: f64) -> PoissonVectorReport {
        let v = VectorField3::parse("rot", ["-y", "x", "0"]).unwrap();
        let ff = FrameFields::new(&v);
        let path = riccati_integrate(&RiccatiCoefficients::FieldDriven(&ff), [1.0, 0.0, 0.0], mu0, s_max, 1e-2).unwrap();
        poisson_from_riccati(&ff, &path, TubeOptions::default()).unwrap()
    }

    #[test]
    fn rotation_poisson_vectors() {
        let r1 = rotation_report(1.0, 2.0);
        let s = &r1.samples[0];
        assert!((Vec3::from(s.j) - Vec3::new(-1.0, 0.0, 1.0)).amax() < 1e-12);
        assert!(r1.jacobi.within(1e-8), "{:?}", r1.jacobi);
        assert!(r1.agreement < 1e-9);
        let r0 = rotation_report(0.0, 2.0);
        assert!(r0.jacobi.within(1e-10));
        assert!(min_angle(&r0, &r1).unwrap() > 1e-6);
        for m in pencil_along_paths(&r1, &r0, &[-2.0, -1.0, 1.0, 2.0]) {
            assert!(m.stats.within(1e-8) && m.skipped == 0, "{m:?}");
        }
    }

    #[test]
    fn fit_recovers_linear_gradient() {
        let v = VectorField3::parse("rot", ["-y", "x", "0"]).unwrap();
        let ff = FrameFields::new(&v);
        let jet = ff.jet_at([1.0, 0.5, 0.0]).unwrap();
        let g = Vec3::new(0.3, -1.2, 2.0);
        let c = Vec3::new(1.0, 0.5, 0.0);
        let pts: Vec<_> = (0..12)
            .map(|i| {
                let f = i as f64;
                let p = c + 1e-3 * Vec3::new((f * 1.3).sin(), (f * 0.7).cos(), (f * 2.1).sin());
                (p, 4.0 + g.dot(&(p - c)))
            })
            .collect();
        let (v0, grad) = local_fit(&jet, &pts).unwrap();
        assert!((v0 - 4.0).abs() < 1e-10);
        assert!((grad - g).amax() < 1e-7, "{grad:?}");
    }
}
