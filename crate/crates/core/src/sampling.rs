//! Seeded sample points in an admissible box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Tape};

/// Deterministic generator for one purpose. Distinct `stream`s drawn from
/// the same seed are independent, so adding a consumer does not perturb
/// the points other consumers see.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Axis-aligned box minus a margin around the zero sets of `exclusions`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    #[serde(skip)]
    pub exclusions: Vec<Expr>,
    pub margin: f64,
}

impl SampleBox {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Self {
        SampleBox {
            lo,
            hi,
            exclusions: Vec::new(),
            margin: 0.0,
        }
    }

    pub fn cube(half_width: f64) -> Self {
        SampleBox::new([-half_width; 3], [half_width; 3])
    }

    /// Rejects points where `|e| < margin`, or where `e` cannot be evaluated.
    pub fn excluding(mut self, exclusions: Vec<Expr>, margin: f64) -> Self {
        self.exclusions = exclusions;
        self.margin = margin;
        self
    }

    pub fn admissible(&self, p: [f64; 3]) -> bool {
        if self.exclusions.is_empty() {
            return true;
        }
        match Tape::compile(&self.exclusions).eval(p, 0.0) {
            Ok(vals) => vals.iter().all(|v| v.abs() >= self.margin),
            Err(_) => false,
        }
    }

    /// Draws `n` admissible points by rejection. Returns fewer points only
    /// if the admissible set is nearly empty.
    pub fn sample(&self, n: usize, seed: u64, stream: u64) -> Vec<[f64; 3]> {
        let mut r = rng(seed, stream);
        let tape = Tape::compile(&self.exclusions);
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n && attempts < 1000 * n.max(1) {
            attempts += 1;
            let p = [0, 1, 2].map(|i| r.random_range(self.lo[i]..=self.hi[i]));
            let ok = self.exclusions.is_empty()
                || tape
                    .eval(p, 0.0)
                    .map(|v| v.iter().all(|e| e.abs() >= self.margin))
                    .unwrap_or(false);
            if ok {
                out.push(p);
            }
        }
        out
    }
}

/// Uniform reals in `[lo, hi]`.
pub fn uniform(n: usize, lo: f64, hi: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut r = rng(seed, stream);
    (0..n).map(|_| r.random_range(lo..=hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn deterministic_and_admissible() {
        let b = SampleBox::cube(2.0).excluding(vec![parse("x-y").unwrap()], 0.5);
        let a = b.sample(50, 7, 1);
        assert_eq!(a, b.sample(50, 7, 1));
        assert_ne!(a, b.sample(50, 7, 2));
        assert_eq!(a.len(), 50);
        assert!(a.iter().all(|p| (p[0] - p[1]).abs() >= 0.5));
        assert!(a.iter().flatten().all(|c| c.abs() <= 2.0));
    }
}
