//! Gauss-Legendre quadrature, fixed-order and adaptive.

use std::sync::OnceLock;

/// Nodes and weights on `[-1, 1]`, computed by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n(x) and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn_1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn_1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static GL16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static GL32: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        16 => GL16.get_or_init(|| gauss_legendre(16)),
        32 => GL32.get_or_init(|| gauss_legendre(32)),
        _ => panic!("only the 16- and 32-point rules are cached"),
    }
}

/// Points of the 32-node rule mapped to `[a, b]`, with weights.
pub fn gl32_points(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (nodes, weights) = rule(32);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(move |(x, w)| (mid + half * x, half * w))
}

fn gl16<E>(f: &mut impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<f64, E> {
    let (nodes, weights) = rule(16);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x)?;
    }
    Ok(acc * half)
}

/// Fixed 32-node rule on `[a, b]`.
pub fn gl32<E>(mut f: impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<f64, E> {
    let mut acc = 0.0;
    for (s, w) in gl32_points(a, b) {
        acc += w * f(s)?;
    }
    Ok(acc)
}

/// Adaptive bisection with the 16-node rule until two levels agree to `tol`.
pub fn adaptive<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, E> {
    let whole = gl16(&mut f, a, b)?;
    refine(&mut f, a, b, whole, tol, 0)
}

fn refine<E>(
    f: &mut impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, E> {
    let m = 0.5 * (a + b);
    let left = gl16(f, a, m)?;
    let right = gl16(f, m, b)?;
    if (left + right - whole).abs() <= tol || depth >= 24 {
        return Ok(left + right);
    }
    Ok(refine(f, a, m, left, 0.5 * tol, depth + 1)? + refine(f, m, b, right, 0.5 * tol, depth + 1)?)
}
