//! Windowed Gram matrices, empirical spectral-inequality constants and the
//! explicit constant chain linking the four equivalent observability
//! statements:
//!
//! * (i)   `Σ_{λ_j≤Λ} a_j² ≤ e^{C₁(1+Λ^σ)} ∫_ω |Σ a_j Φ_j|²`
//! * (ii)  `‖u(t)‖ ≤ e^{C₂(1+(θt)^{-s})} ‖u(0)‖^θ ‖u(t)‖_ω^{1−θ}`
//! * (iii) `‖u(t)‖² ≤ p_σ(t,ε) ‖u(t)‖_ω² + ε ‖u(0)‖²`
//! * (iv)  `‖u(t)‖ ≤ e^{C₄(1+t^{-s})} e^{((C₄/t) ln(‖u(0)‖/‖u(t)‖))^σ} ‖u(t)‖_ω`
//!
//! with `s = σ/(1−σ)` and `p_σ(t,ε) = e^{C₃(1+t^{-s})} e^{((C₃/t) ln(e+1/ε))^σ}`.
//! All checks run in log space since the constants are astronomically large.

use crate::error::{LabError, Result};
use crate::io::{fmt17, sig17, CsvTable};
use crate::linalg::{jacobi_eigen, jacobi_svd};
use crate::spectral::{linear_fit, ModalState, SpectralModel};
use crate::window::ObservationWindow;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Rows `√w_i Φ_j(x_i)` over the window's quadrature rule, first `n` modes.
pub fn weighted_samples(
    model: &SpectralModel,
    window: &ObservationWindow,
    n: usize,
) -> DMatrix<f64> {
    let rule = model.window_rule(&window.0);
    let mut m = model.sample(&rule.nodes, n);
    for (i, w) in rule.weights.iter().enumerate() {
        let s = w.sqrt();
        m.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    m
}

/// `G_ij = ∫_ω Φ_i Φ_j`, `i, j < n`.
pub fn gram_matrix(
    model: &SpectralModel,
    window: &ObservationWindow,
    n: usize,
) -> Result<DMatrix<f64>> {
    if n == 0 || n > model.len() {
        return Err(LabError::InvalidArgument(format!(
            "Gram size {n} must lie in 1..={}",
            model.len()
        )));
    }
    let b = weighted_samples(model, window, n);
    let g = b.transpose() * &b;
    Ok((&g + g.transpose()) * 0.5)
}

/// `‖Σ c_j Φ_j‖_ω²` for coefficients `c` (length ≤ Gram size).
pub fn window_norm_sq(gram: &DMatrix<f64>, c: &[f64]) -> f64 {
    let n = c.len();
    let v = DVector::from_column_slice(c);
    let g = gram.view((0, 0), (n, n));
    (v.transpose() * g * &v)[(0, 0)].max(0.0)
}

/// Smallest eigenvalues `μ_min` of the nested leading Gram blocks of sizes
/// `sizes`, computed as squared smallest singular values of the triangular
/// factor of the weighted sample matrix (resolves `μ` far below `1e-16`).
pub fn nested_mu_min(
    model: &SpectralModel,
    window: &ObservationWindow,
    sizes: &[usize],
) -> Result<Vec<f64>> {
    let top = sizes.iter().copied().max().unwrap_or(0);
    if top == 0 || top > model.len() {
        return Err(LabError::InvalidArgument(format!(
            "mode counts must lie in 1..={}",
            model.len()
        )));
    }
    let b = weighted_samples(model, window, top);
    let r = if b.nrows() >= top { b.qr().r() } else { b };
    Ok(sizes
        .iter()
        .map(|&k| {
            if k == 0 {
                return 1.0;
            }
            let block = r.view((0, 0), (r.nrows().min(k), k)).clone_owned();
            let (sig, _) = jacobi_svd(&block);
            (sig[0] * sig[0]).min(1.0)
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralConstantReport {
    #[serde(with = "sig17::vec")]
    pub lambda_grid: Vec<f64>,
    pub mode_counts: Vec<usize>,
    #[serde(with = "sig17::vec")]
    pub mu_min: Vec<f64>,
    pub saturated: Vec<bool>,
    /// Floor below which `μ_min` is not resolved by the model's accuracy.
    #[serde(with = "sig17")]
    pub noise_floor: f64,
    #[serde(with = "sig17")]
    pub sigma_fit: f64,
    /// Slope `C` of the fit `ln(1/μ) ≈ c₀ + C Λ^σ`.
    #[serde(with = "sig17")]
    pub c_fit: f64,
    #[serde(with = "sig17")]
    pub intercept_fit: f64,
    #[serde(with = "sig17")]
    pub sigma_target: f64,
}

impl SpectralConstantReport {
    /// Grid points whose `μ_min` is resolved.
    pub fn resolved(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.lambda_grid.len())
            .filter(|&i| !self.saturated[i] && self.mode_counts[i] > 0)
            .map(|i| (self.lambda_grid[i], self.mu_min[i]))
    }

    /// Smallest `C₁` with `ln(1/μ_min(Λ)) ≤ C₁(1+Λ^σ)` on all resolved grid points.
    pub fn envelope_constant(&self, sigma: f64) -> f64 {
        self.resolved()
            .map(|(l, mu)| (1.0 / mu).ln().max(0.0) / (1.0 + l.powf(sigma)))
            .fold(0.0, f64::max)
    }

    /// True if every resolved point satisfies the envelope with the given constants.
    pub fn within_envelope(&self, c: f64, sigma: f64) -> bool {
        self.resolved()
            .all(|(l, mu)| (1.0 / mu).ln() <= c * (1.0 + l.powf(sigma)) * (1.0 + 1e-12))
    }
}

/// Candidate growth exponents of the two-stage fit.
pub fn sigma_grid() -> Vec<f64> {
    (0..14).map(|k| 0.30 + 0.05 * k as f64).collect()
}

/// Sweep `μ_min(Λ)` over the grid and fit `ln(1/μ_min) ≈ c₀ + C Λ^σ`.
pub fn spectral_constant_sweep(
    model: &SpectralModel,
    window: &ObservationWindow,
    lambda_grid: &[f64],
    sigma_target: f64,
) -> Result<SpectralConstantReport> {
    if lambda_grid.is_empty() || lambda_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(LabError::InvalidArgument(
            "Λ grid must be nonempty and increasing".into(),
        ));
    }
    let top = *lambda_grid.last().unwrap();
    if top > model.lambda(model.len() - 1) * (1.0 + 1e-12) {
        return Err(LabError::InvalidArgument(format!(
            "largest Λ = {top} exceeds λ_Jmax = {}",
            model.lambda(model.len() - 1)
        )));
    }
    let counts: Vec<usize> = lambda_grid.iter().map(|&l| model.count_below(l)).collect();
    let mu = if counts.iter().any(|&c| c > 0) {
        nested_mu_min(model, window, &counts)?
    } else {
        vec![1.0; counts.len()]
    };
    let noise_floor = (10.0 * model.value_accuracy()).powi(2).max(1e-300);
    let saturated: Vec<bool> = mu.iter().map(|&m| m < noise_floor).collect();
    let mut report = SpectralConstantReport {
        lambda_grid: lambda_grid.to_vec(),
        mode_counts: counts,
        mu_min: mu,
        saturated,
        noise_floor,
        sigma_fit: f64::NAN,
        c_fit: 0.0,
        intercept_fit: 0.0,
        sigma_target,
    };
    let pts: Vec<(f64, f64)> = report
        .resolved()
        .map(|(l, m)| (l, (1.0 / m).ln()))
        .collect();
    if pts.len() >= 2 {
        let mut best = (f64::INFINITY, f64::NAN, 0.0, 0.0);
        for sigma in sigma_grid() {
            let xy: Vec<(f64, f64)> = pts.iter().map(|&(l, y)| (l.powf(sigma), y)).collect();
            let (c, c0) = linear_fit(&xy);
            let rss: f64 = xy.iter().map(|&(x, y)| (y - c0 - c * x).powi(2)).sum();
            if rss < best.0 * (1.0 - 1e-9) {
                best = (rss, sigma, c, c0);
            }
        }
        report.sigma_fit = best.1;
        report.c_fit = best.2;
        report.intercept_fit = best.3;
    }
    Ok(report)
}

/// Propagated constants for statements (ii)–(iv).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConstants {
    #[serde(with = "sig17")]
    pub c1: f64,
    #[serde(with = "sig17")]
    pub sigma: f64,
    #[serde(with = "sig17")]
    pub c2: f64,
    #[serde(with = "sig17")]
    pub c3: f64,
    #[serde(with = "sig17")]
    pub c4: f64,
}

/// Explicit constants making (ii), (iii), (iv) hold whenever (i) holds with `(C₁, σ)`.
///
/// * (i)→(ii): splitting at `Λ = ln(‖u(0)‖/‖u(t)‖_ω)/t` and Young's inequality give
///   `C₂ = ln 4 + C₁/2 + ½ C₁^{1/(1−σ)} 2^{−s}`.
/// * (ii)→(iii): with `θ = β/(1+β)` the exponent is bounded by
///   `2C₂(1+β)(1+((1+β)/(βt))^s) + β ln(e+1/ε)`; taking `β = min(1, (A/L)^{1−σ})`,
///   `A = C₂ 2^{s+2} t^{−s}`, `L = ln(e+1/ε)` yields
///   `C₃ = max(C₂ 2^{s+3}, 2^{1/σ} (C₂ 2^{s+2})^{(1−σ)/σ})`.
/// * (iii)→(iv): `ε = ‖u(t)‖²/(2‖u(0)‖²)`, `e + 2R² ≤ (e+2)R²` and
///   `t^{−σ} ≤ 1 + t^{−s}` give
///   `C₄ = max(ln2/2 + C₃/2 + ½ (C₃ ln(e+2))^σ, 2^{1−1/σ} C₃)`.
pub fn propagate_constants(c1: f64, sigma: f64) -> Result<ChainConstants> {
    if !(c1 > 0.0) || !(sigma > 0.0 && sigma < 1.0) {
        return Err(LabError::InvalidArgument(format!(
            "need C1 > 0 and σ in (0,1), got C1 = {c1}, σ = {sigma}"
        )));
    }
    let s = sigma / (1.0 - sigma);
    let c2 = 4f64.ln() + 0.5 * c1 + 0.5 * c1.powf(1.0 / (1.0 - sigma)) * 2f64.powf(-s);
    let c3 = (c2 * 2f64.powf(s + 3.0))
        .max(2f64.powf(1.0 / sigma) * (c2 * 2f64.powf(s + 2.0)).powf((1.0 - sigma) / sigma));
    let e2 = std::f64::consts::E + 2.0;
    let c4 = (0.5 * 2f64.ln() + 0.5 * c3 + 0.5 * (c3 * e2.ln()).powf(sigma))
        .max(2f64.powf(1.0 - 1.0 / sigma) * c3);
    Ok(ChainConstants {
        c1,
        sigma,
        c2,
        c3,
        c4,
    })
}

/// `ln p_σ(t, ε)`.
pub fn ln_p_sigma(c3: f64, sigma: f64, t: f64, epsilon: f64) -> f64 {
    let s = sigma / (1.0 - sigma);
    c3 * (1.0 + t.powf(-s)) + (c3 / t * (std::f64::consts::E + 1.0 / epsilon).ln()).powf(sigma)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Norms of a free solution at time `t`: `(ln‖u(0)‖, ln‖u(t)‖, ln‖u(t)‖_ω)`.
pub fn free_solution_log_norms(
    model: &SpectralModel,
    gram: &DMatrix<f64>,
    u0: &ModalState,
    t: f64,
) -> (f64, f64, f64) {
    let n = gram.nrows().min(u0.buffer());
    let c: Vec<f64> = (0..n)
        .map(|j| u0.coeffs()[j] * (-model.lambda(j) * t).exp())
        .collect();
    let l0 = u0.coeffs()[..n]
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
        .ln();
    let lt = c.iter().map(|a| a * a).sum::<f64>().sqrt().ln();
    let lw = 0.5 * window_norm_sq(gram, &c).ln();
    (l0, lt, lw)
}

/// Log-margin of statement (ii): `RHS − LHS` in logs (nonnegative when it holds).
pub fn statement_ii_margin(k: &ChainConstants, theta: f64, t: f64, norms: (f64, f64, f64)) -> f64 {
    let s = k.sigma / (1.0 - k.sigma);
    let (l0, lt, lw) = norms;
    k.c2 * (1.0 + (theta * t).powf(-s)) + theta * l0 + (1.0 - theta) * lw - lt
}

/// Log-margin of statement (iii).
pub fn statement_iii_margin(
    k: &ChainConstants,
    epsilon: f64,
    t: f64,
    norms: (f64, f64, f64),
) -> f64 {
    let (l0, lt, lw) = norms;
    log_add_exp(
        ln_p_sigma(k.c3, k.sigma, t, epsilon) + 2.0 * lw,
        epsilon.ln() + 2.0 * l0,
    ) - 2.0 * lt
}

/// Log-margin of statement (iv).
pub fn statement_iv_margin(k: &ChainConstants, t: f64, norms: (f64, f64, f64)) -> f64 {
    let s = k.sigma / (1.0 - k.sigma);
    let (l0, lt, lw) = norms;
    let ratio = (l0 - lt).max(0.0);
    k.c4 * (1.0 + t.powf(-s)) + (k.c4 / t * ratio).powf(k.sigma) + lw - lt
}

pub const CHAIN_TIMES: [f64; 2] = [0.05, 0.2];
/// Interpolation exponents tried in statement (ii).
pub const CHAIN_THETAS: [f64; 3] = [0.25, 0.5, 0.75];
/// Accuracies tried in statement (iii).
pub const CHAIN_EPSILONS: [f64; 3] = [1e-2, 1e-5, 1e-10];

/// Violations and smallest log-margins of statements (ii), (iii), (iv).
#[derive(Debug, Clone, Default, Serialize)]
pub struct ChainTally {
    pub checks: usize,
    pub violations: [usize; 3],
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub min_margin: [f64; 3],
}

impl ChainTally {
    pub fn total_violations(&self) -> usize {
        self.violations.iter().sum()
    }
}

/// Checks (ii) for every θ in [`CHAIN_THETAS`], (iii) for every ε in
/// [`CHAIN_EPSILONS`] and (iv), on each free solution at each time. Also returns
/// one CSV row per check.
pub fn check_chain(
    model: &SpectralModel,
    gram: &DMatrix<f64>,
    k: &ChainConstants,
    states: &[ModalState],
    times: &[f64],
) -> (ChainTally, CsvTable) {
    let mut rows = CsvTable::new(&["sample", "time", "statement", "parameter", "log_margin"]);
    let mut tally = ChainTally {
        min_margin: [f64::INFINITY; 3],
        ..Default::default()
    };
    for (i, u0) in states.iter().enumerate() {
        for &t in times {
            let norms = free_solution_log_norms(model, gram, u0, t);
            let tol = 1e-12 * (1.0 + norms.0.abs() + norms.1.abs());
            let mut record = |which: usize, param: f64, margin: f64| {
                tally.checks += 1;
                if margin < -tol {
                    tally.violations[which] += 1;
                }
                tally.min_margin[which] = tally.min_margin[which].min(margin);
                rows.push_cells(vec![
                    i.to_string(),
                    fmt17(t),
                    ["ii", "iii", "iv"][which].to_string(),
                    fmt17(param),
                    fmt17(margin),
                ]);
            };
            for &th in &CHAIN_THETAS {
                record(0, th, statement_ii_margin(k, th, t, norms));
            }
            for &e in &CHAIN_EPSILONS {
                record(1, e, statement_iii_margin(k, e, t, norms));
            }
            record(2, f64::NAN, statement_iv_margin(k, t, norms));
        }
    }
    (tally, rows)
}

/// Sharp constant of the rank-one boundary observation `|Σ a_j Φ_j′(1)|²` on
/// the complement of its kernel: `1/Σ_{λ_j≤Λ} Φ_j′(1)²`.
pub fn boundary_observation_constant(model: &SpectralModel, lambda_cap: f64) -> Result<f64> {
    let n = model.count_below(lambda_cap);
    if n == 0 {
        return Err(LabError::InvalidArgument(format!(
            "no eigenvalue below Λ = {lambda_cap}"
        )));
    }
    let s: f64 = (0..n).map(|j| model.boundary_slope(j).powi(2)).sum();
    if s == 0.0 {
        return Err(LabError::InvalidArgument(
            "all boundary slopes vanish".into(),
        ));
    }
    Ok(1.0 / s)
}

/// Smallest eigenvalue of a symmetric matrix (Jacobi).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    jacobi_eigen(m).0[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_analytic_model, build_laplacian_oracle, DegenerateOperator};
    use std::f64::consts::PI;

    #[test]
    fn laplacian_gram_closed_forms() {
        let m = build_laplacian_oracle(8).unwrap();
        let w = ObservationWindow::interval(0.0, 0.5).unwrap();
        let g = gram_matrix(&m, &w, 3).unwrap();
        assert!((g[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((g[(0, 1)] - 4.0 / (3.0 * PI)).abs() < 1e-14);
        let full = gram_matrix(&m, &ObservationWindow::full(), 8).unwrap();
        assert!((full - DMatrix::identity(8, 8)).norm() < 1e-12);
    }

    #[test]
    fn sum_rule_degenerate() {
        let m = build_analytic_model(DegenerateOperator::new(0.5).unwrap(), 10).unwrap();
        let w = ObservationWindow::interval(0.2, 0.45).unwrap();
        let g1 = gram_matrix(&m, &w, 10).unwrap();
        let g2 = gram_matrix(&m, &w.complement().unwrap(), 10).unwrap();
        assert!((g1 + g2 - DMatrix::identity(10, 10)).abs().max() < 1e-10);
    }

    #[test]
    fn nested_mu_agrees_with_eigenvalues() {
        let m = build_laplacian_oracle(6).unwrap();
        let w = ObservationWindow::interval(0.2, 0.45).unwrap();
        let mu = nested_mu_min(&m, &w, &[1, 3, 6]).unwrap();
        for (k, &v) in [1usize, 3, 6].iter().zip(&mu) {
            let g = gram_matrix(&m, &w, *k).unwrap();
            assert!((min_eigenvalue(&g) - v).abs() < 1e-12);
        }
        assert!(mu[0] >= mu[1] && mu[1] >= mu[2]);
    }

    #[test]
    fn full_window_has_unit_mu() {
        let m = build_laplacian_oracle(10).unwrap();
        let grid: Vec<f64> = (1..=10).map(|k| m.lambda(k - 1)).collect();
        let r = spectral_constant_sweep(&m, &ObservationWindow::full(), &grid, 0.5).unwrap();
        assert!(r.mu_min.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(r.c_fit.abs() < 1e-8);
    }

    #[test]
    fn propagation_example() {
        let k = propagate_constants(2.0, 0.5).unwrap();
        assert!((k.c2 - (4f64.ln() + 1.0 + 0.5 * 4.0 * 0.5)).abs() < 1e-12);
        assert!(k.c3 >= 4.0 * k.c2 && k.c4 > 0.0);
        assert!(propagate_constants(1.0, 1.0).is_err());
    }

    #[test]
    fn boundary_constant_single_and_pair() {
        let m = build_laplacian_oracle(4).unwrap();
        let c1 = boundary_observation_constant(&m, m.lambda(0)).unwrap();
        assert!((c1 - 1.0 / (2.0 * PI * PI)).abs() < 1e-12);
        let c2 = boundary_observation_constant(&m, m.lambda(1)).unwrap();
        assert!((c2 - 1.0 / (2.0 * PI * PI + 8.0 * PI * PI)).abs() < 1e-12);
    }
}
