//! Spectral decomposition of `P u = −(x^α u′)′` on `(0, 1)`.
//!
//! Boundary conditions: `u(1) = 0` always; at the degenerate end `u(0) = 0`
//! when `α < 1` and `(x^α u′)(0) = 0` when `α ≥ 1`.
//!
//! Three backends share one evaluator interface: a P1 Galerkin solver on a
//! graded mesh, the closed Bessel form, and the Dirichlet Laplacian (the
//! `α = 0` member of the family).

mod analytic;
mod galerkin;
mod state;

pub use analytic::{build_analytic_model, build_laplacian_oracle};
pub use galerkin::{build_galerkin_model, mesh_grading};
pub use state::ModalState;

use crate::error::{LabError, Result};
use crate::io::sig17;
use crate::quadrature::QuadratureRule;
use crate::window::IntervalSet;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegenerateOperator {
    alpha: f64,
}

impl DegenerateOperator {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(LabError::AlphaOutOfRange(alpha));
        }
        Ok(Self { alpha })
    }

    /// The non-degenerate member `α = 0`: the Dirichlet Laplacian.
    pub fn laplacian() -> Self {
        Self { alpha: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `α ≥ 1`: weighted Neumann condition at `x = 0`.
    pub fn is_strongly_degenerate(&self) -> bool {
        self.alpha >= 1.0
    }

    /// `κ = (2 − α)/2`.
    pub fn kappa(&self) -> f64 {
        0.5 * (2.0 - self.alpha)
    }

    /// Bessel order `ν = |1 − α|/(2 − α)`.
    pub fn bessel_order(&self) -> f64 {
        (1.0 - self.alpha).abs() / (2.0 - self.alpha)
    }

    /// Mesh grading exponent `g = 2/(2 − α)`.
    pub fn grading(&self) -> f64 {
        2.0 / (2.0 - self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Galerkin,
    AnalyticBessel,
    Laplacian,
}

#[derive(Debug, Clone)]
pub(crate) struct GalerkinData {
    pub nodes: Vec<f64>,
    /// Nodal values per mode, including both endpoints.
    pub values: Vec<Vec<f64>>,
    pub slopes: Vec<f64>,
    pub residuals: Vec<f64>,
    pub mesh_size: usize,
    pub grading: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BesselData {
    pub nu: f64,
    pub kappa: f64,
    pub p: f64,
    pub zeros: Vec<f64>,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) enum Backend {
    Galerkin(GalerkinData),
    Bessel(BesselData),
    Laplacian,
}

/// Eigenvalues and eigenfunction evaluators for the first `J_max` modes.
/// Mode indices are zero-based throughout the API.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    operator: DegenerateOperator,
    lambdas: Vec<f64>,
    provenance: Provenance,
    backend: Backend,
}

impl SpectralModel {
    pub(crate) fn from_parts(
        operator: DegenerateOperator,
        lambdas: Vec<f64>,
        provenance: Provenance,
        backend: Backend,
    ) -> Self {
        Self {
            operator,
            lambdas,
            provenance,
            backend,
        }
    }

    pub fn operator(&self) -> DegenerateOperator {
        self.operator
    }

    pub fn alpha(&self) -> f64 {
        self.operator.alpha
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, j: usize) -> f64 {
        self.lambdas[j]
    }

    /// Number of modes `J_max`.
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Number of modes with `λ_j ≤ Λ`.
    pub fn count_below(&self, lambda_cap: f64) -> usize {
        self.lambdas
            .iter()
            .take_while(|&&l| l <= lambda_cap)
            .count()
    }

    /// Estimated absolute accuracy of eigenfunction values.
    pub fn value_accuracy(&self) -> f64 {
        match &self.backend {
            Backend::Laplacian => 1e-15,
            Backend::Bessel(_) => 1e-12,
            Backend::Galerkin(g) => {
                let gr = g.grading;
                let n = g.mesh_size as f64;
                (gr * gr * self.lambdas.last().copied().unwrap_or(1.0) / (n * n)).clamp(1e-12, 1.0)
            }
        }
    }

    /// `Φ_j(x)`.
    pub fn eval(&self, j: usize, x: f64) -> f64 {
        match &self.backend {
            Backend::Laplacian => laplacian_value(j, x),
            Backend::Bessel(b) => b.value(j, x),
            Backend::Galerkin(g) => g.value(j, x),
        }
    }

    /// `Φ_j′(x)`; piecewise constant for the Galerkin backend.
    pub fn deriv(&self, j: usize, x: f64) -> f64 {
        match &self.backend {
            Backend::Laplacian => {
                let k = (j + 1) as f64 * std::f64::consts::PI;
                std::f64::consts::SQRT_2 * k * (k * x).cos()
            }
            Backend::Bessel(b) => b.derivative(j, x),
            Backend::Galerkin(g) => g.derivative(j, x),
        }
    }

    /// `(x^α Φ_j′)′(x)` from a closed form; unavailable for Galerkin models.
    pub fn flux_derivative(&self, j: usize, x: f64) -> Option<f64> {
        match &self.backend {
            Backend::Laplacian => {
                let k = (j + 1) as f64 * std::f64::consts::PI;
                Some(-std::f64::consts::SQRT_2 * k * k * (k * x).sin())
            }
            Backend::Bessel(b) => Some(b.flux_derivative(self.operator.alpha, j, x)),
            Backend::Galerkin(_) => None,
        }
    }

    /// `Φ_j′(1)`; negative by the sign convention (except the Laplacian oracle,
    /// which keeps the textbook form `√2 sin(kπx)`).
    pub fn boundary_slope(&self, j: usize) -> f64 {
        match &self.backend {
            Backend::Galerkin(g) => g.slopes[j],
            _ => self.deriv(j, 1.0),
        }
    }

    /// Relative Rayleigh residuals `‖Kφ − λMφ‖/‖Kφ‖` of the discrete problem.
    pub fn galerkin_residuals(&self) -> Option<&[f64]> {
        match &self.backend {
            Backend::Galerkin(g) => Some(&g.residuals),
            _ => None,
        }
    }

    pub fn mesh_nodes(&self) -> Option<&[f64]> {
        match &self.backend {
            Backend::Galerkin(g) => Some(&g.nodes),
            _ => None,
        }
    }

    pub fn bessel_zeros(&self) -> Option<&[f64]> {
        match &self.backend {
            Backend::Bessel(b) => Some(&b.zeros),
            _ => None,
        }
    }

    /// Quadrature rule over a union of intervals of `[0, 1]`, resolving all
    /// `J_max` modes.
    pub fn window_rule(&self, set: &IntervalSet) -> QuadratureRule {
        match &self.backend {
            Backend::Galerkin(g) => {
                // Two-point Gauss is exact for products of P1 functions.
                let mut breaks_all = Vec::new();
                let mut rules = Vec::new();
                for &(a, b) in set.intervals() {
                    breaks_all.clear();
                    breaks_all.push(a);
                    let start = g.nodes.partition_point(|&x| x <= a);
                    for &x in &g.nodes[start..] {
                        if x >= b {
                            break;
                        }
                        breaks_all.push(x);
                    }
                    breaks_all.push(b);
                    rules.push(QuadratureRule::composite(&breaks_all, 2));
                }
                QuadratureRule::concat(&rules)
            }
            _ => {
                let grading = if self.operator.alpha == 0.0 {
                    1.0
                } else {
                    self.operator.grading()
                };
                let top = match &self.backend {
                    Backend::Bessel(b) => b.zeros.last().copied().unwrap_or(1.0),
                    _ => self.len() as f64 * std::f64::consts::PI,
                };
                let rules: Vec<QuadratureRule> = set
                    .intervals()
                    .iter()
                    .map(|&(a, b)| {
                        let span = b.powf(1.0 / grading) - a.powf(1.0 / grading);
                        let panels = (top * span / std::f64::consts::PI).ceil() as usize + 4;
                        let levels = if a == 0.0 { 40 } else { 0 };
                        QuadratureRule::graded(a, b, grading, panels, 16, levels)
                            .expect("valid interval inside [0,1]")
                    })
                    .collect();
                QuadratureRule::concat(&rules)
            }
        }
    }

    /// Matrix of values `Φ_j(x_i)` for the rule's nodes and the first `n` modes.
    pub fn sample(&self, nodes: &[f64], n: usize) -> DMatrix<f64> {
        assert!(
            n <= self.len(),
            "requested {n} modes from a model with {}",
            self.len()
        );
        let mut m = DMatrix::zeros(nodes.len(), n);
        for (i, &x) in nodes.iter().enumerate() {
            for j in 0..n {
                m[(i, j)] = self.eval(j, x);
            }
        }
        m
    }

    pub fn to_document(&self) -> ModelDocument {
        let (mesh, zeros) = match &self.backend {
            Backend::Galerkin(g) => (
                Some(MeshDescription {
                    elements: g.mesh_size,
                    grading: g.grading,
                }),
                None,
            ),
            Backend::Bessel(b) => (None, Some(b.zeros.clone())),
            Backend::Laplacian => (None, None),
        };
        ModelDocument {
            alpha: self.operator.alpha,
            provenance: self.provenance,
            lambdas: self.lambdas.clone(),
            mesh,
            bessel_zeros: zeros,
        }
    }

    /// Rebuild a model from its document, checking the eigenvalues reproduce.
    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let n = doc.lambdas.len();
        let model = match doc.provenance {
            Provenance::Laplacian => build_laplacian_oracle(n)?,
            Provenance::AnalyticBessel => {
                build_analytic_model(DegenerateOperator::new(doc.alpha)?, n)?
            }
            Provenance::Galerkin => {
                let mesh = doc.mesh.as_ref().ok_or_else(|| {
                    LabError::InvalidArgument("galerkin document lacks a mesh".into())
                })?;
                build_galerkin_model(DegenerateOperator::new(doc.alpha)?, mesh.elements, n)?
            }
        };
        for (a, b) in model.lambdas.iter().zip(&doc.lambdas) {
            if (a - b).abs() > 1e-12 * b.abs() {
                return Err(LabError::InvalidArgument(format!(
                    "document eigenvalue {b} does not reproduce ({a})"
                )));
            }
        }
        Ok(model)
    }
}

fn laplacian_value(j: usize, x: f64) -> f64 {
    let k = (j + 1) as f64 * std::f64::consts::PI;
    std::f64::consts::SQRT_2 * (k * x).sin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDescription {
    pub elements: usize,
    #[serde(with = "sig17")]
    pub grading: f64,
}

/// Serializable description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(with = "sig17")]
    pub alpha: f64,
    pub provenance: Provenance,
    #[serde(with = "sig17::vec")]
    pub lambdas: Vec<f64>,
    pub mesh: Option<MeshDescription>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_opt_vec",
        deserialize_with = "de_opt_vec"
    )]
    pub bessel_zeros: Option<Vec<f64>>,
}

fn ser_opt_vec<S: serde::Serializer>(
    v: &Option<Vec<f64>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(xs) => sig17::vec::serialize(xs, s),
        None => s.serialize_none(),
    }
}

fn de_opt_vec<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<Vec<f64>>, D::Error> {
    Ok(Some(sig17::vec::deserialize(d)?))
}

/// Modes used for Weyl fits: the slope over the upper half of the first 15 is
/// still ≈ `2k/(k + ν/2 − 1/4)`, far from 2 for large Bessel orders.
pub const WEYL_FIT_MODES: usize = 200;

/// Least-squares slope and prefactor of `ln λ_k` against `ln k` over the
/// upper half of the spectrum.
pub fn weyl_fit(model: &SpectralModel) -> Result<(f64, f64)> {
    let n = model.len();
    if n < 10 {
        return Err(LabError::InvalidArgument(format!(
            "Weyl fit needs at least 10 eigenvalues, got {n}"
        )));
    }
    let pts: Vec<(f64, f64)> = (n / 2..n)
        .map(|j| (((j + 1) as f64).ln(), model.lambda(j).ln()))
        .collect();
    let (slope, intercept) = linear_fit(&pts);
    Ok((slope, intercept.exp()))
}

/// Ordinary least squares `y ≈ a·x + b`, returning `(a, b)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (a, my - a * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_validation() {
        assert!(DegenerateOperator::new(0.0).is_err());
        assert!(DegenerateOperator::new(2.0).is_err());
        assert!(DegenerateOperator::new(f64::NAN).is_err());
        let op = DegenerateOperator::new(0.5).unwrap();
        assert!(!op.is_strongly_degenerate());
        assert!((op.kappa() - 0.75).abs() < 1e-15);
        assert!((op.bessel_order() - 1.0 / 3.0).abs() < 1e-15);
        assert!(DegenerateOperator::new(1.0)
            .unwrap()
            .is_strongly_degenerate());
    }

    #[test]
    fn laplacian_weyl_law() {
        let m = build_laplacian_oracle(40).unwrap();
        let (e, c) = weyl_fit(&m).unwrap();
        assert!((e - 2.0).abs() < 1e-3);
        assert!((c - std::f64::consts::PI.powi(2)).abs() < 1e-6);
    }

    #[test]
    fn document_round_trip() {
        let m = build_analytic_model(DegenerateOperator::new(1.5).unwrap(), 8).unwrap();
        let doc = m.to_document();
        let text = crate::io::to_json(&doc).unwrap();
        let back: ModelDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        let rebuilt = SpectralModel::from_document(&back).unwrap();
        assert_eq!(rebuilt.lambdas(), m.lambdas());
    }
}
