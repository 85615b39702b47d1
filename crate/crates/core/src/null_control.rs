//! Null control supported on `ω × E` for a finite union of time intervals `E`.
//!
//! With `w(s) = e^{−sP} w₀` the control is `f(·,t) = −K 1_ω w(T−t)` on `E`; the
//! minimizer of the regularized functional solves `(K M_E + ε I) w₀ = D(T) y⁰`,
//! `M_E = ∫_E D(T−t) G D(T−t) dt`. All time integrals are exponential
//! antiderivatives, so the controlled evolution carries no time-stepping error.

use crate::error::{LabError, Result};
use crate::io::{sig17, CsvTable};
use crate::linalg::{cholesky_solve, pencil_threshold, spd_condition};
use crate::observability::gram_matrix;
use crate::spectral::{ModalState, SpectralModel};
use crate::window::{ObservationWindow, TimeSet};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// `∫_a^b e^{−μ(T−t)} dt`, `μ ≥ 0`.
pub fn exp_integral(mu: f64, a: f64, b: f64, horizon: f64) -> f64 {
    if mu == 0.0 {
        return b - a;
    }
    -(-mu * (horizon - b)).exp() * (-mu * (b - a)).exp_m1() / mu
}

/// Rows `0..rows`, columns `0..cols` of `∫_E D(T−t) G D(T−t) dt` with `G` given.
fn time_weighted(
    model: &SpectralModel,
    gram: &DMatrix<f64>,
    set: &TimeSet,
    rows: usize,
    cols: usize,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        let mu = model.lambda(i) + model.lambda(j);
        let t: f64 = set
            .intervals()
            .iter()
            .map(|&(a, b)| exp_integral(mu, a, b, set.horizon))
            .sum();
        gram[(i, j)] * t
    })
}

/// `M_E` on the first `active` modes.
pub fn hum_time_operator(
    model: &SpectralModel,
    window: &ObservationWindow,
    set: &TimeSet,
    active: usize,
) -> Result<DMatrix<f64>> {
    let g = gram_matrix(model, window, active)?;
    Ok(time_weighted(model, &g, set, active, active))
}

/// `f(·,t) = −K 1_ω Σ_j e^{−λ_j(T−t)} w₀_j Φ_j` for `t ∈ E`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributedControl {
    #[serde(with = "sig17")]
    pub amplitude: f64,
    #[serde(with = "sig17::vec")]
    pub w_coeffs: Vec<f64>,
    pub time_set: Vec<(f64, f64)>,
    #[serde(with = "sig17")]
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullControlReport {
    #[serde(with = "sig17")]
    pub epsilon: f64,
    #[serde(with = "sig17")]
    pub k: f64,
    /// `‖y(T)‖` at the buffer.
    #[serde(with = "sig17")]
    pub terminal_norm: f64,
    #[serde(with = "sig17")]
    pub initial_norm: f64,
    /// `∫_E ‖f‖_ω² dt`.
    #[serde(with = "sig17")]
    pub cost: f64,
    /// `(1/K) cost + (2/ε) ‖y(T)‖²`, compared against `‖y⁰‖²`.
    #[serde(with = "sig17")]
    pub step_lhs: f64,
    #[serde(with = "sig17")]
    pub w0_norm: f64,
    /// `‖ε w₀ − y(T)‖` on the active modes.
    #[serde(with = "sig17")]
    pub truncated_relation_error: f64,
    #[serde(with = "sig17")]
    pub spillover_norm: f64,
    #[serde(with = "sig17")]
    pub condition: f64,
    pub ill_conditioned: bool,
    pub holds: bool,
}

/// Gram data for repeated solves on one `(model, ω, E)`.
#[derive(Debug, Clone)]
pub struct NullControlProblem<'a> {
    model: &'a SpectralModel,
    set: TimeSet,
    active: usize,
    /// Buffer rows, active columns.
    coupling: DMatrix<f64>,
}

impl<'a> NullControlProblem<'a> {
    pub fn new(
        model: &'a SpectralModel,
        window: &ObservationWindow,
        set: &TimeSet,
        active: usize,
        buffer: usize,
    ) -> Result<Self> {
        if active == 0 || active > buffer || buffer > model.len() {
            return Err(LabError::InvalidArgument(format!(
                "need 1 <= J ({active}) <= J_buf ({buffer}) <= J_max ({})",
                model.len()
            )));
        }
        let g = gram_matrix(model, window, buffer)?;
        let coupling = time_weighted(model, &g, set, buffer, active);
        Ok(Self {
            model,
            set: set.clone(),
            active,
            coupling,
        })
    }

    pub fn operator(&self) -> DMatrix<f64> {
        self.coupling
            .view((0, 0), (self.active, self.active))
            .clone_owned()
    }

    /// `1/μ_min(M_E)`: the constant of `‖u(0)‖² ≤ K ∫_E ‖u(T−t)‖_ω² dt`. It overflows
    /// the double range once high modes are active.
    pub fn inverse_mu_min(&self) -> Result<f64> {
        pencil_threshold(
            &self.operator(),
            &DMatrix::identity(self.active, self.active),
            1e-300,
        )
    }

    /// Minimal `K` of `‖u(T)‖² ≤ K ∫_E ‖u(T−t)‖_ω² dt` on the active modes; the default.
    pub fn default_k(&self) -> Result<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_fn(self.active, |j, _| {
            (-2.0 * self.model.lambda(j) * self.set.horizon).exp()
        }));
        pencil_threshold(&self.operator(), &d, 1e-300)
    }

    pub fn solve(
        &self,
        k: f64,
        epsilon: f64,
        y0: &ModalState,
    ) -> Result<(DistributedControl, NullControlReport)> {
        if !(k > 0.0 && epsilon > 0.0 && k.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "need K > 0 and epsilon > 0, got K = {k}, epsilon = {epsilon}"
            )));
        }
        let buffer = self.coupling.nrows();
        if y0.buffer() != buffer {
            return Err(LabError::InvalidArgument(format!(
                "initial state buffer {} differs from {buffer}",
                y0.buffer()
            )));
        }
        let n = self.active;
        let t = self.set.horizon;
        let m = self.operator();
        let mut a = &m * k;
        for i in 0..n {
            a[(i, i)] += epsilon;
        }
        let rhs = DVector::from_fn(n, |j, _| (-self.model.lambda(j) * t).exp() * y0.coeffs()[j]);
        let w0 = cholesky_solve(&a, &rhs)?;
        let cond = spd_condition(&a);

        let push = &self.coupling * &w0;
        let y_t: Vec<f64> = (0..buffer)
            .map(|j| (-self.model.lambda(j) * t).exp() * y0.coeffs()[j] - k * push[j])
            .collect();
        let terminal_sq: f64 = y_t.iter().map(|v| v * v).sum();
        let cost = k * k * w0.dot(&(&m * &w0));
        let initial_sq = y0.l2_norm().powi(2);
        let step_lhs = cost / k + 2.0 / epsilon * terminal_sq;
        let rel: f64 = (0..n)
            .map(|j| (epsilon * w0[j] - y_t[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        let report = NullControlReport {
            epsilon,
            k,
            terminal_norm: terminal_sq.sqrt(),
            initial_norm: initial_sq.sqrt(),
            cost,
            step_lhs,
            w0_norm: w0.norm(),
            truncated_relation_error: rel,
            spillover_norm: y_t[n..].iter().map(|v| v * v).sum::<f64>().sqrt(),
            condition: cond,
            ill_conditioned: cond > 1e14,
            holds: step_lhs <= initial_sq * (1.0 + 1e-10),
        };
        let control = DistributedControl {
            amplitude: -k,
            w_coeffs: w0.as_slice().to_vec(),
            time_set: self.set.intervals().to_vec(),
            horizon: t,
        };
        Ok((control, report))
    }
}

/// One-shot solve with a fresh problem.
pub fn solve_null_control(
    model: &SpectralModel,
    window: &ObservationWindow,
    set: &TimeSet,
    active: usize,
    k: f64,
    epsilon: f64,
    y0: &ModalState,
) -> Result<(DistributedControl, NullControlReport)> {
    NullControlProblem::new(model, window, set, active, y0.buffer())?.solve(k, epsilon, y0)
}

/// Solves along a decreasing `ε` grid.
/// The sweep `1e−2, 1e−3, …, 1e−8`.
pub const DEFAULT_EPSILONS: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

pub fn epsilon_sweep(
    problem: &NullControlProblem<'_>,
    k: f64,
    y0: &ModalState,
    eps_grid: &[f64],
) -> Result<Vec<NullControlReport>> {
    if eps_grid.windows(2).any(|p| p[1] >= p[0]) {
        return Err(LabError::InvalidArgument(
            "epsilon grid must be strictly decreasing".into(),
        ));
    }
    eps_grid
        .iter()
        .map(|&e| problem.solve(k, e, y0).map(|r| r.1))
        .collect()
}

/// True if `‖y(T)‖` never increases along the sweep (relative slack for rounding).
pub fn sweep_is_monotone(rows: &[NullControlReport]) -> bool {
    rows.windows(2)
        .all(|p| p[1].terminal_norm <= p[0].terminal_norm * (1.0 + 1e-9))
}

pub fn sweep_table(rows: &[NullControlReport]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "epsilon",
        "terminal_norm",
        "cost",
        "eps_w0_norm",
        "step_lhs",
        "step_rhs",
    ]);
    for r in rows {
        t.push_reals(&[
            r.epsilon,
            r.terminal_norm,
            r.cost,
            r.epsilon * r.w0_norm,
            r.step_lhs,
            r.initial_norm.powi(2),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;
    use crate::spectral::build_laplacian_oracle;

    #[test]
    fn closed_form_time_integral() {
        for &(mu, a, b) in &[
            (3.7f64, 0.1f64, 0.4f64),
            (250.0, 0.6, 0.85),
            (0.0, 0.2, 0.3),
        ] {
            // Normalize by the value at `b` so the absolute tolerance is also relative.
            let scale = (-mu * (1.0 - b)).exp();
            let q = scale * adaptive_simpson(&|t: f64| (-mu * (b - t)).exp(), a, b, 1e-15);
            let rel = (exp_integral(mu, a, b, 1.0) - q).abs() / q.abs().max(1e-300);
            assert!(rel < 1e-12, "mu {mu}: relative error {rel:e}");
        }
    }

    #[test]
    fn full_window_full_time_is_diagonal() {
        let m = build_laplacian_oracle(5).unwrap();
        let e = TimeSet::new(vec![(0.0, 1.0)], 1.0).unwrap();
        let op = hum_time_operator(&m, &ObservationWindow::full(), &e, 5).unwrap();
        for i in 0..5 {
            let l = m.lambda(i);
            assert!((op[(i, i)] - (1.0 - (-2.0 * l).exp()) / (2.0 * l)).abs() < 1e-14);
            for j in 0..5 {
                if i != j {
                    assert!(op[(i, j)].abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn operator_is_additive_over_intervals() {
        let m = build_laplacian_oracle(4).unwrap();
        let w = ObservationWindow::interval(0.2, 0.5).unwrap();
        let both = hum_time_operator(
            &m,
            &w,
            &TimeSet::new(vec![(0.1, 0.3), (0.5, 0.7)], 1.0).unwrap(),
            4,
        )
        .unwrap();
        let a =
            hum_time_operator(&m, &w, &TimeSet::new(vec![(0.1, 0.3)], 1.0).unwrap(), 4).unwrap();
        let b =
            hum_time_operator(&m, &w, &TimeSet::new(vec![(0.5, 0.7)], 1.0).unwrap(), 4).unwrap();
        assert!((both - a - b).abs().max() < 1e-15);
    }

    #[test]
    fn single_mode_relation_and_zero_state() {
        let m = build_laplacian_oracle(3).unwrap();
        let e = TimeSet::new(vec![(0.0, 0.5)], 0.5).unwrap();
        let p = NullControlProblem::new(&m, &ObservationWindow::full(), &e, 1, 3).unwrap();
        let (c, r) = p.solve(2.0, 1e-3, &ModalState::unit(0, 1, 3)).unwrap();
        assert!((r.terminal_norm - 1e-3 * c.w_coeffs[0].abs()).abs() < 1e-15);
        assert!(r.holds || 2.0 < p.default_k().unwrap());
        let (c0, r0) = p.solve(2.0, 1e-3, &ModalState::zeros(1, 3)).unwrap();
        assert!(c0.w_coeffs.iter().all(|&w| w == 0.0) && r0.terminal_norm == 0.0);
    }
}
