//! Poisson vectors on R^3: Jacobi residuals, Riccati construction along
//! streamlines, Hamiltonian checks, integrating factors and potentials.

mod potential;
mod riccati;
mod tube;

pub use potential::{
    homotopy_potential, integrating_factor, reconstruct_casimir, CasimirReport, Gauge,
    HomotopyOptions, IntegratingFactor, Potential, PotentialError, ReconstructError,
};
pub use riccati::{
    riccati_integrate, RiccatiCoefficients, RiccatiError, RiccatiPath, RiccatiSample,
};
pub use tube::{
    min_angle, pencil_along_paths, poisson_from_riccati, PoissonSample, PoissonVectorReport,
    TubeOptions,
};

use serde::{Deserialize, Serialize};

use crate::check::ResidualStats;
use crate::exterior::{curl, ext_d, flat, grad, wedge, VectorField3};
use crate::expr::{Expr, Tape};

/// `J . curl J`, which vanishes exactly when `J` defines a Poisson bracket.
pub fn jacobi_residual(j: &VectorField3) -> Expr {
    j.dot(&curl(j))
}

/// Volume coefficient of `flat(J) ^ d flat(J)`.
pub fn frobenius_coefficient(j: &VectorField3) -> Expr {
    let a = flat(j);
    let da = ext_d(&a).expect("1-form");
    wedge(&a, &da).coefficient().expect("3-form").clone()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilMember {
    pub c: f64,
    pub stats: ResidualStats,
    /// Points where the pencil member could not be evaluated.
    pub skipped: usize,
}

/// Jacobi residual of `J1 + c J2` for each `c`, sampled at `points`.
pub fn pencil_compatibility(
    j1: &VectorField3,
    j2: &VectorField3,
    cs: &[f64],
    points: &[[f64; 3]],
) -> Vec<PencilMember> {
    cs.iter()
        .map(|&c| {
            let member = j1.add(&j2.scale(&Expr::constant(c)));
            let tape = Tape::compile(&[jacobi_residual(&member)]);
            let mut stats = ResidualStats::default();
            let mut skipped = 0;
            for &p in points {
                match tape.eval(p, 0.0) {
                    Ok(v) => stats.push(v[0]),
                    Err(_) => skipped += 1,
                }
            }
            PencilMember { c, stats, skipped }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianReport {
    /// `|V - J x grad H|`.
    pub residual: ResidualStats,
    /// `J . V`.
    pub j_dot_v: ResidualStats,
    /// `grad H . V`.
    pub grad_h_dot_v: ResidualStats,
    pub skipped: usize,
}

pub fn hamiltonian_residual(
    v: &VectorField3,
    j: &VectorField3,
    h: &Expr,
    points: &[[f64; 3]],
) -> HamiltonianReport {
    let gh = grad(h);
    let diff = v.sub(&j.cross(&gh));
    let mut outs = diff.components.to_vec();
    outs.push(j.dot(v));
    outs.push(gh.dot(v));
    let tape = Tape::compile(&outs);
    let mut report = HamiltonianReport {
        residual: ResidualStats::default(),
        j_dot_v: ResidualStats::default(),
        grad_h_dot_v: ResidualStats::default(),
        skipped: 0,
    };
    for &p in points {
        match tape.eval(p, 0.0) {
            Ok(r) => {
                report.residual.push(r[..3].iter().map(|c| c * c).sum::<f64>().sqrt());
                report.j_dot_v.push(r[3]);
                report.grad_h_dot_v.push(r[4]);
            }
            Err(_) => report.skipped += 1,
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::sampling::SampleBox;

    fn field(c: [&str; 3]) -> VectorField3 {
        VectorField3::parse("J", c).unwrap()
    }

    #[test]
    fn jacobi_examples() {
        let p = [1.0, 2.0, 4.0];
        assert_eq!(jacobi_residual(&field(["-x", "-y", "0"])).eval(p, 0.0).unwrap(), 0.0);
        assert_eq!(jacobi_residual(&field(["y", "z", "x"])).eval(p, 0.0).unwrap(), -7.0);
        let g = grad(&parse("x^2*y + sin(z)*x").unwrap());
        assert!(jacobi_residual(&g).eval(p, 0.0).unwrap().abs() < 1e-12);
        let j = field(["y*z", "x^2", "x - z"]);
        let a = jacobi_residual(&j).eval(p, 0.0).unwrap();
        let b = frobenius_coefficient(&j).eval(p, 0.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn pencil_examples() {
        let pts = SampleBox::cube(2.0).sample(30, 3, 0);
        let j1 = grad(&parse("x^2 - y^2").unwrap());
        let j2 = grad(&parse("y^2 - z^2").unwrap());
        for m in pencil_compatibility(&j1, &j2, &[-2.0, -1.0, 0.0, 1.0, 2.0], &pts) {
            assert!(m.stats.within(1e-10), "{m:?}");
        }
        let j = field(["y", "z", "x"]);
        let m = &pencil_compatibility(&j, &VectorField3::zero(), &[1.0], &pts)[0];
        let want: ResidualStats = pts.iter().map(|p| p[0] + p[1] + p[2]).collect();
        assert!((m.stats.max_abs - want.max_abs).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_examples() {
        let pts = SampleBox::cube(2.0).sample(40, 5, 0);
        let rot = field(["-y", "x", "0"]);
        let j = field(["-x", "-y", "0"]);
        let r = hamiltonian_residual(&rot, &j, &Expr::z(), &pts);
        assert!(r.residual.within(1e-12) && r.j_dot_v.within(1e-12) && r.grad_h_dot_v.within(1e-12));
        let wrong = hamiltonian_residual(&rot, &j, &Expr::x(), &pts);
        assert!(wrong.residual.max_abs > 0.1);

        let euler = field(["y*z", "z*x", "x*y"]);
        let j = grad(&parse("x^2 - y^2").unwrap()).scale(&Expr::constant(0.25));
        let r = hamiltonian_residual(&euler, &j, &parse("y^2 - z^2").unwrap(), &pts);
        assert!(r.residual.within(1e-12), "{r:?}");
    }
}
