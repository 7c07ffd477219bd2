use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::ResidualStats;
use crate::frenet::{FrameError, FrameFields};

/// Helicity coefficients driving `d mu/ds = H_n + mu H_nb + mu^2 H_b`.
pub enum RiccatiCoefficients<'a> {
    /// `(H_n, H_nb, H_b)` as functions of arclength; the position stays put.
    Explicit(&'a dyn Fn(f64) -> [f64; 3]),
    /// Helicities of the field, sampled along its own streamline.
    FieldDriven(&'a FrameFields),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiccatiError {
    #[error("frame lost at s = {s} ({source})")]
    FrameLost {
        s: f64,
        point: [f64; 3],
        #[source]
        source: FrameError,
    },
    #[error("invalid step: h = {h}, s_max = {s_max}")]
    InvalidStep { h: f64, s_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSample {
    pub s: f64,
    pub x: [f64; 3],
    pub p: f64,
    pub q: f64,
    /// `(H_n, H_nb, H_b)` at this sample.
    pub helicities: [f64; 3],
}

impl RiccatiSample {
    /// `p / q`, undefined at poles.
    pub fn mu(&self) -> Option<f64> {
        (self.q != 0.0).then(|| self.p / self.q)
    }

    fn rhs_mu(&self, mu: f64) -> f64 {
        let [hn, hnb, hb] = self.helicities;
        hn + mu * hnb + mu * mu * hb
    }
}

/// Projective solution `(p, q)` of the Riccati equation, `mu = p/q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiPath {
    pub step: f64,
    /// Scale `A` in `J = A (n + mu b)`.
    pub gauge: f64,
    pub samples: Vec<RiccatiSample>,
}

impl RiccatiPath {
    pub fn final_sample(&self) -> &RiccatiSample {
        self.samples.last().expect("paths have at least one sample")
    }

    /// Writes `s,x,y,z,p,q,mu`; `mu` is empty at poles.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "s,x,y,z,p,q,mu")?;
        for r in &self.samples {
            let mu = r.mu().map(|m| format!("{m:e}")).unwrap_or_default();
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{mu}",
                r.s, r.x[0], r.x[1], r.x[2], r.p, r.q
            )?;
        }
        Ok(())
    }

    /// Central-difference `d mu/ds` against the Riccati right-hand side at
    /// interior samples with `|mu| <= 2`. The difference error is `O(step^2)`.
    pub fn consistency_residual(&self) -> ResidualStats {
        let mut stats = ResidualStats::default();
        for w in self.samples.windows(3) {
            if w.iter().any(|r| r.p.abs() > 2.0 * r.q.abs()) {
                continue;
            }
            let mu = |r: &RiccatiSample| r.p / r.q;
            let d = (mu(&w[2]) - mu(&w[0])) / (w[2].s - w[0].s);
            stats.push(d - w[1].rhs_mu(mu(&w[1])));
        }
        stats
    }
}

struct Deriv {
    dx: [f64; 3],
    h: [f64; 3],
}

fn projective(h: [f64; 3], p: f64, q: f64) -> (f64, f64) {
    let [hn, hnb, hb] = h;
    (0.5 * hnb * p + hn * q, -hb * p - 0.5 * hnb * q)
}

/// Integrates `p' = H_nb p/2 + H_n q`, `q' = -H_b p - H_nb q/2` together with
/// `x' = t(x)` by classical RK4, so `mu = p/q` passes through its poles.
pub fn riccati_integrate(
    coeffs: &RiccatiCoefficients<'_>,
    x0: [f64; 3],
    mu0: f64,
    s_max: f64,
    h: f64,
) -> Result<RiccatiPath, RiccatiError> {
    if !(h > 0.0 && s_max >= 0.0 && s_max.is_finite()) {
        return Err(RiccatiError::InvalidStep { h, s_max });
    }
    let steps = ((s_max / h).round() as usize).max(1);
    let step = s_max / steps as f64;
    let eval = |s: f64, x: [f64; 3]| -> Result<Deriv, RiccatiError> {
        match coeffs {
            RiccatiCoefficients::Explicit(f) => Ok(Deriv { dx: [0.0; 3], h: f(s) }),
            RiccatiCoefficients::FieldDriven(ff) => {
                let (frame, hel) = ff
                    .sample_at(x)
                    .map_err(|source| RiccatiError::FrameLost { s, point: x, source })?;
                Ok(Deriv {
                    dx: frame.t,
                    h: [hel.h_n, hel.h_nb, hel.h_b],
                })
            }
        }
    };
    let (mut p, mut q) = if mu0.is_infinite() {
        (1.0, 0.0)
    } else {
        let r = mu0.hypot(1.0);
        (mu0 / r, 1.0 / r)
    };
    let mut x = x0;
    let mut d = eval(0.0, x)?;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(RiccatiSample { s: 0.0, x, p, q, helicities: d.h });
    let shift = |x: [f64; 3], k: [f64; 3], f: f64| [x[0] + f * k[0], x[1] + f * k[1], x[2] + f * k[2]];
    for i in 0..steps {
        let s = i as f64 * step;
        let k1 = (d.dx, projective(d.h, p, q));
        let d2 = eval(s + 0.5 * step, shift(x, k1.0, 0.5 * step))?;
        let k2 = (
            d2.dx,
            projective(d2.h, p + 0.5 * step * k1.1 .0, q + 0.5 * step * k1.1 .1),
        );
        let d3 = eval(s + 0.5 * step, shift(x, k2.0, 0.5 * step))?;
        let k3 = (
            d3.dx,
            projective(d3.h, p + 0.5 * step * k2.1 .0, q + 0.5 * step * k2.1 .1),
        );
        let d4 = eval(s + step, shift(x, k3.0, step))?;
        let k4 = (d4.dx, projective(d4.h, p + step * k3.1 .0, q + step * k3.1 .1));
        let w = step / 6.0;
        for c in 0..3 {
            x[c] += w * (k1.0[c] + 2.0 * k2.0[c] + 2.0 * k3.0[c] + k4.0[c]);
        }
        p += w * (k1.1 .0 + 2.0 * k2.1 .0 + 2.0 * k3.1 .0 + k4.1 .0);
        q += w * (k1.1 .1 + 2.0 * k2.1 .1 + 2.0 * k3.1 .1 + k4.1 .1);
        let r = p.hypot(q);
        // Skipping round-off-sized corrections keeps constant solutions bit-exact.
        if (r - 1.0).abs() > 1e-15 {
            p /= r;
            q /= r;
        }
        let s_next = (i + 1) as f64 * step;
        d = eval(s_next, x)?;
        samples.push(RiccatiSample {
            s: s_next,
            x,
            p,
            q,
            helicities: d.h,
        });
    }
    Ok(RiccatiPath {
        step,
        gauge: 1.0,
        samples,
    })
}
