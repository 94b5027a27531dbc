//! Gauss–Legendre quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

pub const GL_NODES: usize = 64;

/// Nodes and weights on [-1, 1] for an `n`-point rule, by Newton iteration
/// on `P_n` from the Chebyshev-like initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_NODES))
}

/// 64-node rule mapped to `[a, b]`, as `(node, weight)` pairs.
pub fn gl64_on(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = rule64();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    x.iter().zip(w).map(move |(x, w)| (mid + half * x, half * w))
}

/// `∫_a^b f` with the 64-node rule.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    gl64_on(a, b).map(|(t, w)| w * f(t)).sum()
}

/// Fallible variant of [`integrate`].
pub fn try_integrate<E, F: FnMut(f64) -> Result<f64, E>>(a: f64, b: f64, mut f: F) -> Result<f64, E> {
    let mut acc = 0.0;
    for (t, w) in gl64_on(a, b) {
        acc += w * f(t)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        let (_, w) = gauss_legendre(64);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        // ∫_0^1 x^127 = 1/128
        let v = integrate(0.0, 1.0, |x| x.powi(127));
        assert!((v - 1.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn small_rules_match_known_nodes() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, _) = gauss_legendre(3);
        assert!(x[1].abs() < 1e-15);
    }

    #[test]
    fn smooth_exponential() {
        let v = integrate(0.0, 2.0, |x| (3.0 * x).exp());
        let exact = ((6.0f64).exp() - 1.0) / 3.0;
        assert!((v - exact).abs() < 1e-12 * exact);
    }
}
