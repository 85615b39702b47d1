//! Closed-form eigenpairs.
//!
//! With `κ = (2−α)/2`, `ν = |1−α|/(2−α)`, `p = (1−α)/2` and `j_n` the n-th
//! positive zero of `J_ν`:
//! `λ_n = κ² j_n²`, `Φ_n(x) = c_n x^p J_ν(j_n x^κ)`, `c_n = √(2κ)/J_{ν+1}(j_n)`.
//! The normalization follows from `∫₀¹ y J_ν(j y)² dy = J_{ν+1}(j)²/2` after
//! the substitution `y = x^κ`; the sign of `c_n` makes `Φ_n′(1) < 0`.

use super::{Backend, BesselData, DegenerateOperator, Provenance, SpectralModel};
use crate::bessel::{bessel_j, bessel_j_pair, bessel_zeros};
use crate::error::{LabError, Result};

pub fn build_analytic_model(op: DegenerateOperator, j_max: usize) -> Result<SpectralModel> {
    if j_max == 0 {
        return Err(LabError::InvalidArgument("J_max must be at least 1".into()));
    }
    let nu = op.bessel_order();
    let kappa = op.kappa();
    let zeros = bessel_zeros(nu, j_max)?;
    let scales: Vec<f64> = zeros
        .iter()
        .map(|&j| (2.0 * kappa).sqrt() / bessel_j_pair(nu, j).1)
        .collect();
    let lambdas = zeros.iter().map(|j| kappa * kappa * j * j).collect();
    let data = BesselData {
        nu,
        kappa,
        p: 0.5 * (1.0 - op.alpha()),
        zeros,
        scales,
    };
    Ok(SpectralModel::from_parts(
        op,
        lambdas,
        Provenance::AnalyticBessel,
        Backend::Bessel(data),
    ))
}

pub fn build_laplacian_oracle(j_max: usize) -> Result<SpectralModel> {
    if j_max == 0 {
        return Err(LabError::InvalidArgument("J_max must be at least 1".into()));
    }
    let lambdas = (1..=j_max)
        .map(|k| (k as f64 * std::f64::consts::PI).powi(2))
        .collect();
    Ok(SpectralModel::from_parts(
        DegenerateOperator::laplacian(),
        lambdas,
        Provenance::Laplacian,
        Backend::Laplacian,
    ))
}

impl BesselData {
    pub(crate) fn value(&self, j: usize, x: f64) -> f64 {
        if x <= 0.0 {
            // x^p J_ν(j x^κ) ~ x^{p+κν}: zero when p+κν > 0, finite otherwise.
            let lead = self.p + self.kappa * self.nu;
            if lead > 1e-12 {
                return 0.0;
            }
            let zj = self.zeros[j];
            return self.scales[j] * (0.5 * zj).powf(self.nu)
                / statrs::function::gamma::gamma(self.nu + 1.0);
        }
        let z = self.zeros[j] * x.powf(self.kappa);
        self.scales[j] * x.powf(self.p) * bessel_j(self.nu, z)
    }

    pub(crate) fn derivative(&self, j: usize, x: f64) -> f64 {
        let z = self.zeros[j] * x.powf(self.kappa);
        let (jn, jn1) = bessel_j_pair(self.nu, z);
        self.scales[j]
            * x.powf(self.p - 1.0)
            * ((self.p + self.kappa * self.nu) * jn - self.kappa * z * jn1)
    }

    /// `(x^α Φ′)′ = c x^{q−1}[((p+κν)(q+κν) − κ²z²) J_ν − κ z (p+q) J_{ν+1}]`, `q = (α−1)/2`.
    pub(crate) fn flux_derivative(&self, alpha: f64, j: usize, x: f64) -> f64 {
        let q = 0.5 * (alpha - 1.0);
        let z = self.zeros[j] * x.powf(self.kappa);
        let (jn, jn1) = bessel_j_pair(self.nu, z);
        let kn = self.kappa * self.nu;
        let bracket = ((self.p + kn) * (q + kn) - self.kappa * self.kappa * z * z) * jn
            - self.kappa * z * (self.p + q) * jn1;
        self.scales[j] * x.powf(q - 1.0) * bracket
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureRule;

    #[test]
    fn alpha_one_first_eigenvalue() {
        let m = build_analytic_model(DegenerateOperator::new(1.0).unwrap(), 3).unwrap();
        assert!((m.lambda(0) - 0.25 * 2.404_825_557_695_773f64.powi(2)).abs() < 1e-12);
        assert!((m.lambda(0) - 1.44580).abs() < 1e-5);
    }

    #[test]
    fn small_alpha_approaches_laplacian() {
        let m = build_analytic_model(DegenerateOperator::new(1e-6).unwrap(), 5).unwrap();
        for k in 0..5 {
            let exact = ((k + 1) as f64 * std::f64::consts::PI).powi(2);
            assert!((m.lambda(k) - exact).abs() / exact < 1e-5);
        }
    }

    #[test]
    fn orthonormal_and_signed() {
        for alpha in [0.25, 0.5, 1.0, 1.5, 1.75] {
            let m = build_analytic_model(DegenerateOperator::new(alpha).unwrap(), 12).unwrap();
            let g = m.operator().grading();
            let rule = QuadratureRule::graded(0.0, 1.0, g, 40, 16, 40).unwrap();
            for i in 0..12 {
                assert!(m.boundary_slope(i) < 0.0);
                assert!(m.eval(i, 1.0).abs() < 1e-12);
                for j in 0..=i {
                    let v = rule.integrate(|x| m.eval(i, x) * m.eval(j, x));
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (v - target).abs() < 1e-10,
                        "alpha={alpha} i={i} j={j} v={v}"
                    );
                }
            }
        }
    }

    #[test]
    fn flux_derivative_matches_eigen_relation() {
        for alpha in [0.3, 1.0, 1.6] {
            let m = build_analytic_model(DegenerateOperator::new(alpha).unwrap(), 6).unwrap();
            for j in 0..6 {
                for &x in &[0.05, 0.3, 0.77] {
                    let lhs = m.flux_derivative(j, x).unwrap();
                    let rhs = -m.lambda(j) * m.eval(j, x);
                    assert!(
                        (lhs - rhs).abs() < 1e-9 * (1.0 + m.lambda(j)),
                        "alpha={alpha} j={j} x={x}"
                    );
                }
            }
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let m = build_analytic_model(DegenerateOperator::new(0.7).unwrap(), 4).unwrap();
        let h = 1e-6;
        for &x in &[0.2, 0.5, 0.9] {
            let fd = (m.eval(3, x + h) - m.eval(3, x - h)) / (2.0 * h);
            assert!((fd - m.deriv(3, x)).abs() < 1e-5);
        }
    }
}
