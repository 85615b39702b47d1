//! Gauss–Legendre rules and composite rules graded toward `x = 0`.
//!
//! A graded rule is built in the stretched coordinate `t = x^(1/g)`, where
//! eigenfunctions of the degenerate operator oscillate uniformly, and mapped
//! back with the Jacobian `g t^(g-1)`.

use crate::error::{LabError, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A positive-weight quadrature rule on a subset of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Grading exponent `g` of the construction (1 for an ungraded rule).
    pub grading: f64,
    /// Polynomial degree integrated exactly on each panel of the stretched coordinate.
    pub degree: usize,
}

impl QuadratureRule {
    /// Composite Gauss–Legendre rule with `order` points on each `[breaks[k], breaks[k+1]]`.
    pub fn composite(breaks: &[f64], order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(breaks.len() * order);
        let mut weights = Vec::with_capacity(breaks.len() * order);
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Self {
            nodes,
            weights,
            grading: 1.0,
            degree: 2 * order - 1,
        }
    }

    /// Graded composite rule on `[a, b] ⊂ [0, 1]`.
    ///
    /// `panels` uniform panels in `t = x^(1/g)`; when `a == 0` the first panel is
    /// split geometrically (ratio 0.25) into `levels` further pieces.
    pub fn graded(
        a: f64,
        b: f64,
        grading: f64,
        panels: usize,
        order: usize,
        levels: usize,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || b <= a {
            return Err(LabError::InvalidArgument(format!(
                "graded rule needs 0 <= a < b <= 1, got ({a}, {b})"
            )));
        }
        if grading < 1.0 || panels == 0 || order == 0 {
            return Err(LabError::InvalidArgument(
                "graded rule needs grading >= 1 and positive sizes".into(),
            ));
        }
        let inv = 1.0 / grading;
        let (ta, tb) = (a.powf(inv), b.powf(inv));
        let h = (tb - ta) / panels as f64;
        let mut breaks: Vec<f64> = Vec::with_capacity(panels + levels + 1);
        if a == 0.0 && levels > 0 {
            let mut inner: Vec<f64> = (0..=levels).map(|k| h * 0.25f64.powi(k as i32)).collect();
            inner.push(0.0);
            inner.reverse();
            breaks.extend(inner);
            breaks.extend((2..=panels).map(|k| ta + h * k as f64));
        } else {
            breaks.extend((0..=panels).map(|k| ta + h * k as f64));
        }
        *breaks.last_mut().unwrap() = tb;
        let base = Self::composite(&breaks, order);
        let mut nodes = Vec::with_capacity(base.nodes.len());
        let mut weights = Vec::with_capacity(base.nodes.len());
        for (t, w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(t.powf(grading));
            weights.push(w * grading * t.powf(grading - 1.0));
        }
        Ok(Self {
            nodes,
            weights,
            grading,
            degree: 2 * order - 1,
        })
    }

    /// Concatenate rules on disjoint, increasing supports.
    pub fn concat(rules: &[QuadratureRule]) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for r in rules {
            nodes.extend_from_slice(&r.nodes);
            weights.extend_from_slice(&r.weights);
        }
        let grading = rules.first().map_or(1.0, |r| r.grading);
        let degree = rules.iter().map(|r| r.degree).min().unwrap_or(1);
        Self {
            nodes,
            weights,
            grading,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Adaptive Simpson integration, used only as an independent cross-check.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 40] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_exact_for_degree() {
        let (x, w) = gauss_legendre(8);
        for k in 0..16 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            assert!((q - exact).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn graded_rule_integrates_polynomials() {
        let rule = QuadratureRule::graded(0.0, 1.0, 4.0, 20, 12, 20).unwrap();
        assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
        assert!(rule.nodes.iter().all(|&x| x > 0.0 && x < 1.0));
        for k in 0..10 {
            let q = rule.integrate(|x| x.powi(k));
            let exact = 1.0 / (k as f64 + 1.0);
            assert!(((q - exact) / exact).abs() < 1e-12, "k={k}: {q} vs {exact}");
        }
    }

    #[test]
    fn graded_rule_handles_weak_singularity() {
        let rule = QuadratureRule::graded(0.0, 1.0, 2.0, 16, 12, 30).unwrap();
        let q = rule.integrate(|x| x.powf(-0.7));
        assert!((q - 1.0 / 0.3).abs() < 1e-10);
    }

    #[test]
    fn graded_subinterval() {
        let rule = QuadratureRule::graded(0.2, 0.45, 4.0 / 3.0, 8, 10, 0).unwrap();
        let q = rule.integrate(|x| x * x);
        assert!((q - (0.45f64.powi(3) - 0.2f64.powi(3)) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn simpson_matches() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-13);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
    }
}
