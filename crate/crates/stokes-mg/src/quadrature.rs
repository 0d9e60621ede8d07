//! Gauss-Legendre quadrature on the reference interval [0, 1].

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Quadrature points in (0, 1), ascending.
    pub points: Vec<f64>,
    /// Matching weights; they sum to 1.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// n-point Gauss-Legendre rule on [0, 1], exact for polynomials of degree 2n-1.
///
/// Roots of the Legendre polynomial P_n on [-1, 1] are found by Newton
/// iteration from the Chebyshev initial guess, then mapped to [0, 1].
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    assert!(n >= 1, "quadrature rule needs at least one point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    // Roots are symmetric; compute the lower half and mirror.
    for i in 0..(n + 1) / 2 {
        let mut x = -(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (x + 1.0);
        weights[i] = 0.5 * w;
        points[n - 1 - i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = 0.5 * w;
    }
    QuadratureRule { points, weights }
}

/// Evaluate (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_monomial(rule: &QuadratureRule, p: u32) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * x.powi(p as i32))
            .sum()
    }

    #[test]
    fn exactness_up_to_degree() {
        for n in 1..=8 {
            let rule = gauss_legendre(n);
            assert_eq!(rule.len(), n);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for p in 0..(2 * n as u32) {
                let exact = 1.0 / (p as f64 + 1.0);
                let approx = integrate_monomial(&rule, p);
                assert!(
                    (approx - exact).abs() < 1e-13,
                    "n={n} p={p}: {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn two_point_rule_matches_closed_form() {
        let rule = gauss_legendre(2);
        let d = 0.5 / 3.0_f64.sqrt();
        assert!((rule.points[0] - (0.5 - d)).abs() < 1e-15);
        assert!((rule.points[1] - (0.5 + d)).abs() < 1e-15);
        assert!((rule.weights[0] - 0.5).abs() < 1e-15);
    }
}
