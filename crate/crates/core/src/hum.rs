//! Single-impulse controls by minimizing the HUM functional
//! `J(ϑ) = (ℓ/2)‖u(T₀+T₂−T₁)‖_ω² + (ε/2)‖ϑ‖² − ⟨y_e, u(T₂)⟩`
//! (or `+ ⟨y_d, ϑ⟩` for target tracking) over the active modes.
//!
//! The minimizer solves `(ℓ D₂₁ G D₂₁ + ε I) w₀ = rhs` with `D_ab = diag(e^{−λ_j (T_a−T_b)})`
//! and `G` the window Gram matrix. The control is `f = −ℓ w(T₀+T₂−T₁)` restricted to ω.
//! Forward simulation and certificates always run at the buffer size.

use crate::error::{LabError, Result};
use crate::io::sig17;
use crate::linalg::{cholesky_solve, pencil_threshold, spd_condition};
use crate::observability::{gram_matrix, ln_p_sigma, window_norm_sq};
use crate::semigroup::{evolve, Trajectory};
use crate::spectral::{ModalState, SpectralModel};
use crate::window::ObservationWindow;
use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

/// One impulse `y(T₁) = y(T₁₋) + 1_ω f`, `f = amplitude · Σ w_k Φ_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpulsePlan {
    #[serde(with = "sig17")]
    pub time: f64,
    #[serde(with = "sig17")]
    pub amplitude: f64,
    #[serde(with = "sig17::vec")]
    pub w_coeffs: Vec<f64>,
    #[serde(serialize_with = "window_text")]
    pub window: ObservationWindow,
    #[serde(with = "sig17")]
    pub ell: f64,
    /// NaN for plans not produced by a regularized synthesis.
    #[serde(with = "sig17")]
    pub epsilon: f64,
}

fn window_text<S: Serializer>(w: &ObservationWindow, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&w.to_string())
}

impl ImpulsePlan {
    /// A plan with a prescribed modal function and amplitude.
    pub fn direct(
        time: f64,
        amplitude: f64,
        w_coeffs: Vec<f64>,
        window: ObservationWindow,
    ) -> Self {
        Self {
            time,
            amplitude,
            w_coeffs,
            window,
            ell: amplitude.abs(),
            epsilon: f64::NAN,
        }
    }

    /// Modal coefficients of `f` before restriction to ω.
    pub fn control_coeffs(&self) -> Vec<f64> {
        self.w_coeffs.iter().map(|w| self.amplitude * w).collect()
    }
}

/// `T₀ < T₁ < T₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpulseTimes {
    #[serde(with = "sig17")]
    pub t0: f64,
    #[serde(with = "sig17")]
    pub t1: f64,
    #[serde(with = "sig17")]
    pub t2: f64,
}

impl ImpulseTimes {
    pub fn new(t0: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(t0 >= 0.0 && t0 < t1 && t1 < t2 && t2.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "need 0 <= T0 < T1 < T2, got ({t0}, {t1}, {t2})"
            )));
        }
        Ok(Self { t0, t1, t2 })
    }

    /// Time the adjoint is observed after its start, `T₂ − T₁`.
    pub fn gap(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn span(&self) -> f64 {
        self.t2 - self.t0
    }
}

/// Which dual inequality the regularized problem corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualForm {
    /// `‖u(T₂)‖² ≤ ℓ‖u(T₀+T₂−T₁)‖_ω² + ε‖u(T₀)‖²`
    NullTarget,
    /// `⟨P⁻¹u(T₀),u(T₀)⟩ ≤ ℓ‖u(T₀+T₂−T₁)‖_ω² + ε‖u(T₀)‖²`
    Tracking,
}

/// How `ℓ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EllChoice {
    /// Minimal `ℓ` making the dual inequality hold on the active modes.
    Empirical,
    /// `ℓ = p_σ(T₂−T₁, ε)` from the propagated constant `C₃`.
    Formula {
        c3: f64,
        sigma: f64,
    },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumCertificate {
    /// `(1/ℓ)‖f‖_ω²`
    #[serde(with = "sig17")]
    pub cost_omega: f64,
    /// `(1/ε)‖y(T₂) − y_d‖²` at the buffer (`y_d = 0` for null targets).
    #[serde(with = "sig17")]
    pub terminal: f64,
    /// `‖y_e‖²` or `⟨P y_d, y_d⟩`.
    #[serde(with = "sig17")]
    pub budget: f64,
    /// `|ℓ‖w‖_ω² + ε‖w₀‖² − cost − terminal|` with the active-mode terminal.
    #[serde(with = "sig17")]
    pub identity_residual: f64,
    /// `‖∇J(w₀)‖ / ‖rhs‖`.
    #[serde(with = "sig17")]
    pub optimality_residual: f64,
    /// `‖ε w₀ − (ŷ(T₂) − y_d)‖` over the active modes.
    #[serde(with = "sig17")]
    pub truncated_relation_error: f64,
    /// Same defect over the whole buffer (includes spillover).
    #[serde(with = "sig17")]
    pub spillover_defect: f64,
    /// `‖y(T₂)‖` on the modes beyond the active truncation.
    #[serde(with = "sig17")]
    pub spillover_norm: f64,
    /// `‖y(T₂)‖` on the upper half of the buffer: what halving the buffer would miss.
    #[serde(with = "sig17")]
    pub spillover_tail: f64,
    #[serde(with = "sig17")]
    pub condition: f64,
    pub ill_conditioned: bool,
    pub holds: bool,
}

/// Relative slack allowed in `cost + terminal ≤ budget`.
pub const CERTIFICATE_SLACK: f64 = 1e-8;

/// Window Gram matrix at the buffer size, shared by many syntheses.
#[derive(Debug, Clone)]
pub struct HumContext<'a> {
    model: &'a SpectralModel,
    window: ObservationWindow,
    gram: DMatrix<f64>,
    active: usize,
}

/// State and control of one synthesis.
#[derive(Debug, Clone)]
pub struct HumSolution {
    pub plan: ImpulsePlan,
    pub certificate: HumCertificate,
    /// Minimizer `w₀` on the active modes.
    pub w0: Vec<f64>,
    pub terminal_state: ModalState,
}

impl<'a> HumContext<'a> {
    pub fn new(
        model: &'a SpectralModel,
        window: &ObservationWindow,
        active: usize,
        buffer: usize,
    ) -> Result<Self> {
        if active == 0 || active > buffer || buffer > model.len() {
            return Err(LabError::InvalidArgument(format!(
                "need 1 <= J ({active}) <= J_buf ({buffer}) <= J_max ({})",
                model.len()
            )));
        }
        let gram = gram_matrix(model, window, buffer)?;
        Ok(Self {
            model,
            window: window.clone(),
            gram,
            active,
        })
    }

    pub fn model(&self) -> &SpectralModel {
        self.model
    }

    pub fn window(&self) -> &ObservationWindow {
        &self.window
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn buffer(&self) -> usize {
        self.gram.nrows()
    }

    fn decay(&self, t: f64) -> Vec<f64> {
        (0..self.active)
            .map(|j| (-self.model.lambda(j) * t).exp())
            .collect()
    }

    /// `D₂₁ G D₂₁` on the active modes: the observed quadratic form.
    pub fn observation_form(&self, times: &ImpulseTimes) -> DMatrix<f64> {
        let d = self.decay(times.gap());
        DMatrix::from_fn(self.active, self.active, |i, j| {
            d[i] * self.gram[(i, j)] * d[j]
        })
    }

    fn system(&self, times: &ImpulseTimes, ell: f64, epsilon: f64) -> DMatrix<f64> {
        let mut a = self.observation_form(times) * ell;
        for i in 0..self.active {
            a[(i, i)] += epsilon;
        }
        a
    }

    /// Minimal `ℓ` for which the chosen dual inequality holds on the active modes.
    pub fn empirical_ell(&self, times: &ImpulseTimes, epsilon: f64, form: DualForm) -> Result<f64> {
        let a = self.observation_form(times);
        let d = self.decay(times.span());
        let b = DMatrix::from_fn(self.active, self.active, |i, j| {
            if i != j {
                0.0
            } else {
                match form {
                    DualForm::NullTarget => d[i] * d[i] - epsilon,
                    DualForm::Tracking => 1.0 / self.model.lambda(i) - epsilon,
                }
            }
        });
        pencil_threshold(&a, &b, 1e-12)
    }

    pub fn choose_ell(
        &self,
        times: &ImpulseTimes,
        epsilon: f64,
        choice: EllChoice,
        form: DualForm,
    ) -> Result<f64> {
        check_positive(epsilon, "epsilon")?;
        match choice {
            EllChoice::Empirical => self.empirical_ell(times, epsilon, form),
            EllChoice::Formula { c3, sigma } => formula_ell(c3, sigma, times.gap(), epsilon),
            EllChoice::Fixed(ell) => check_positive(ell, "ell").map(|_| ell),
        }
    }

    fn solve(
        &self,
        times: &ImpulseTimes,
        ell: f64,
        epsilon: f64,
        rhs: &[f64],
    ) -> Result<(Vec<f64>, f64, f64)> {
        check_positive(ell, "ell")?;
        check_positive(epsilon, "epsilon")?;
        let a = self.system(times, ell, epsilon);
        let b = DVector::from_column_slice(rhs);
        let w0 = cholesky_solve(&a, &b)?;
        let resid = (&a * &w0 - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
        Ok((w0.as_slice().to_vec(), resid, spd_condition(&a)))
    }

    fn plan_from(&self, times: &ImpulseTimes, ell: f64, epsilon: f64, w0: &[f64]) -> ImpulsePlan {
        let d = self.decay(times.gap());
        let w: Vec<f64> = w0.iter().zip(&d).map(|(a, b)| a * b).collect();
        ImpulsePlan {
            time: times.t1,
            amplitude: -ell,
            w_coeffs: w,
            window: self.window.clone(),
            ell,
            epsilon,
        }
    }

    /// Free flow `T₀ → T₁`, impulse, free flow `T₁ → T₂`, at the buffer.
    pub fn simulate(
        &self,
        times: &ImpulseTimes,
        y0: &ModalState,
        plan: &ImpulsePlan,
    ) -> Result<Trajectory> {
        let mut tr = Trajectory::new(times.t0, y0.clone());
        tr.advance_to(self.model, times.t1)?;
        tr.impulse(plan.clone(), &self.gram)?;
        tr.advance_to(self.model, times.t2)?;
        Ok(tr)
    }

    fn certify(
        &self,
        times: &ImpulseTimes,
        y0: &ModalState,
        target: Option<&ModalState>,
        plan: ImpulsePlan,
        w0: Vec<f64>,
        resid: f64,
        cond: f64,
        budget: f64,
    ) -> Result<HumSolution> {
        let (ell, epsilon) = (plan.ell, plan.epsilon);
        let y_end = {
            let tr = self.simulate(times, y0, &plan)?;
            tr.current().1.clone()
        };
        let n = self.active;
        let zero = vec![0.0; self.buffer()];
        let yd = target.map_or(&zero[..], |t| t.coeffs());
        let defect: Vec<f64> = (0..self.buffer())
            .map(|j| y_end.coeffs()[j] - yd[j] - if j < n { epsilon * w0[j] } else { 0.0 })
            .collect();
        let miss_sq: Vec<f64> = (0..self.buffer())
            .map(|j| (y_end.coeffs()[j] - yd[j]).powi(2))
            .collect();
        let w_omega = window_norm_sq(&self.gram, &plan.w_coeffs);
        let cost_omega = ell * w_omega;
        let terminal = miss_sq.iter().sum::<f64>() / epsilon;
        let terminal_active = miss_sq[..n].iter().sum::<f64>() / epsilon;
        let w0_sq: f64 = w0.iter().map(|a| a * a).sum();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let half = self.buffer() / 2;
        let certificate = HumCertificate {
            cost_omega,
            terminal,
            budget,
            identity_residual: (ell * w_omega + epsilon * w0_sq - cost_omega - terminal_active)
                .abs(),
            optimality_residual: resid,
            truncated_relation_error: norm(&defect[..n]),
            spillover_defect: norm(&defect),
            spillover_norm: y_end.spillover_norm(),
            spillover_tail: norm(&y_end.coeffs()[half.max(n)..]),
            condition: cond,
            ill_conditioned: cond > 1e14,
            holds: cost_omega + terminal <= budget * (1.0 + CERTIFICATE_SLACK),
        };
        Ok(HumSolution {
            plan,
            certificate,
            w0,
            terminal_state: y_end,
        })
    }

    /// Null-target synthesis from `y(T₀) = y_e`.
    pub fn solve_impulse(
        &self,
        times: &ImpulseTimes,
        ell: f64,
        epsilon: f64,
        y_e: &ModalState,
    ) -> Result<HumSolution> {
        self.check_state(y_e)?;
        let d = self.decay(times.span());
        let rhs: Vec<f64> = (0..self.active).map(|j| d[j] * y_e.coeffs()[j]).collect();
        let (w0, resid, cond) = self.solve(times, ell, epsilon, &rhs)?;
        let plan = self.plan_from(times, ell, epsilon, &w0);
        let budget = y_e.l2_norm().powi(2);
        self.certify(times, y_e, None, plan, w0, resid, cond, budget)
    }

    /// Target tracking from `y(T₀) = 0` towards `y_d`.
    pub fn solve_target(
        &self,
        times: &ImpulseTimes,
        ell: f64,
        epsilon: f64,
        y_d: &ModalState,
    ) -> Result<HumSolution> {
        self.check_state(y_d)?;
        let rhs: Vec<f64> = y_d.coeffs()[..self.active].iter().map(|a| -a).collect();
        let (w0, resid, cond) = self.solve(times, ell, epsilon, &rhs)?;
        let plan = self.plan_from(times, ell, epsilon, &w0);
        let budget: f64 = y_d
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, a)| self.model.lambda(j) * a * a)
            .sum();
        let zero = ModalState::zeros(y_d.active(), y_d.buffer());
        self.certify(times, &zero, Some(y_d), plan, w0, resid, cond, budget)
    }

    /// Relative residual of `⟨y(T₂),u(T₀)⟩ − ⟨y(T₀),u(T₂)⟩ = ⟨f, u(T₀+T₂−T₁)⟩_ω`,
    /// the right side evaluated by spatial quadrature over the window.
    pub fn duality_residual(
        &self,
        times: &ImpulseTimes,
        y0: &ModalState,
        plan: &ImpulsePlan,
        u0: &ModalState,
    ) -> Result<f64> {
        self.check_state(y0)?;
        self.check_state(u0)?;
        let tr = self.simulate(times, y0, plan)?;
        let y2 = tr.current().1;
        let u2 = evolve(self.model, u0, times.span())?;
        let um = evolve(self.model, u0, times.gap())?;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let lhs = dot(y2.coeffs(), u0.coeffs()) - dot(y0.coeffs(), u2.coeffs());
        let rule = self.model.window_rule(&self.window.0);
        let f = plan.control_coeffs();
        let (mut rhs, mut ff, mut uu) = (0.0, 0.0, 0.0);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let fx: f64 = f
                .iter()
                .enumerate()
                .map(|(k, c)| c * self.model.eval(k, x))
                .sum();
            let ux: f64 = um
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| c * self.model.eval(k, x))
                .sum();
            rhs += w * fx * ux;
            ff += w * fx * fx;
            uu += w * ux * ux;
        }
        let scale = (ff * uu).sqrt();
        Ok(if scale == 0.0 {
            (lhs - rhs).abs()
        } else {
            (lhs - rhs).abs() / scale
        })
    }

    fn check_state(&self, s: &ModalState) -> Result<()> {
        if s.buffer() != self.buffer() {
            return Err(LabError::InvalidArgument(format!(
                "state buffer {} differs from the context buffer {}",
                s.buffer(),
                self.buffer()
            )));
        }
        Ok(())
    }
}

fn check_positive(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "{name} must be positive and finite, got {x}"
        )));
    }
    Ok(())
}

/// `ℓ = p_σ(gap, ε)`; fails when it exceeds the double range.
pub fn formula_ell(c3: f64, sigma: f64, gap: f64, epsilon: f64) -> Result<f64> {
    let ln_ell = ln_p_sigma(c3, sigma, gap, epsilon);
    if ln_ell > 700.0 || !ln_ell.is_finite() {
        return Err(LabError::Overflow(format!(
            "ln ell = {ln_ell:e} is beyond the double range"
        )));
    }
    Ok(ln_ell.exp())
}

/// `ln ℓ` for target tracking from the constant `C₄`:
/// `ℓ = (1/λ₁) e^{2NT} e^{2C₄(1+gap^{−s})} e^{2((C₄/gap) ln(√(N/λ₁) e^{2NT}))^σ}`
/// with `N = N(0)` when `N(0) ≤ 1/ε` and `N = 1/ε` otherwise.
pub fn tracking_log_ell(
    c4: f64,
    sigma: f64,
    lambda1: f64,
    horizon: f64,
    gap: f64,
    epsilon: f64,
    n0: f64,
) -> f64 {
    let s = sigma / (1.0 - sigma);
    let n = if n0 <= 1.0 / epsilon {
        n0
    } else {
        1.0 / epsilon
    };
    let inner = (0.5 * (n / lambda1).ln() + 2.0 * n * horizon).max(0.0);
    -lambda1.ln()
        + 2.0 * n * horizon
        + 2.0 * c4 * (1.0 + gap.powf(-s))
        + 2.0 * (c4 / gap * inner).powf(sigma)
}

/// Convenience wrapper with a fresh context whose buffer is `y_e`'s.
pub fn solve_hum_impulse(
    model: &SpectralModel,
    window: &ObservationWindow,
    times: &ImpulseTimes,
    active: usize,
    ell: f64,
    epsilon: f64,
    y_e: &ModalState,
) -> Result<HumSolution> {
    HumContext::new(model, window, active, y_e.buffer())?.solve_impulse(times, ell, epsilon, y_e)
}

pub fn solve_hum_target(
    model: &SpectralModel,
    window: &ObservationWindow,
    times: &ImpulseTimes,
    active: usize,
    ell: f64,
    epsilon: f64,
    y_d: &ModalState,
) -> Result<HumSolution> {
    HumContext::new(model, window, active, y_d.buffer())?.solve_target(times, ell, epsilon, y_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_laplacian_oracle;

    fn times() -> ImpulseTimes {
        ImpulseTimes::new(0.0, 0.05, 0.1).unwrap()
    }

    #[test]
    fn scalar_full_window() {
        let m = build_laplacian_oracle(4).unwrap();
        let ctx = HumContext::new(&m, &ObservationWindow::full(), 1, 4).unwrap();
        let (ell, eps) = (2.0, 0.3);
        let s = ctx
            .solve_impulse(&times(), ell, eps, &ModalState::unit(0, 1, 4))
            .unwrap();
        let l = m.lambda(0);
        let expect = (-l * 0.1).exp() / (ell * (-2.0 * l * 0.05).exp() + eps);
        assert!((s.w0[0] - expect).abs() < 1e-14);
        assert!(s.certificate.truncated_relation_error < 1e-12);
        assert!(s.certificate.spillover_norm < 1e-14);
    }

    #[test]
    fn large_epsilon_kills_control() {
        let m = build_laplacian_oracle(4).unwrap();
        let ctx =
            HumContext::new(&m, &ObservationWindow::interval(0.3, 0.6).unwrap(), 2, 4).unwrap();
        let s = ctx
            .solve_impulse(&times(), 1.0, 1e12, &ModalState::unit(0, 2, 4))
            .unwrap();
        assert!(s.w0.iter().all(|w| w.abs() < 1e-11));
    }

    #[test]
    fn zero_target_gives_zero_control() {
        let m = build_laplacian_oracle(6).unwrap();
        let ctx =
            HumContext::new(&m, &ObservationWindow::interval(0.3, 0.6).unwrap(), 3, 6).unwrap();
        let s = ctx
            .solve_target(&times(), 1.0, 1e-3, &ModalState::zeros(3, 6))
            .unwrap();
        assert!(s.w0.iter().all(|&w| w == 0.0));
        assert!(s.terminal_state.is_zero());
    }

    #[test]
    fn empirical_ell_full_window_closed_form() {
        let m = build_laplacian_oracle(5).unwrap();
        let ctx = HumContext::new(&m, &ObservationWindow::full(), 5, 5).unwrap();
        let t = ImpulseTimes::new(0.0, 0.01, 0.02).unwrap();
        let eps = 1e-3;
        let ell = ctx.empirical_ell(&t, eps, DualForm::NullTarget).unwrap();
        let exact = (0..5)
            .map(|j| {
                let l = m.lambda(j);
                (-2.0 * l * 0.01).exp() - eps * (2.0 * l * 0.01).exp()
            })
            .fold(0.0, f64::max);
        assert!((ell - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn formula_ell_example() {
        let ell = formula_ell(1.0, 0.5, 1.0, 1.0).unwrap();
        let expect = (2.0f64).exp() * ((std::f64::consts::E + 1.0).ln().sqrt()).exp();
        assert!((ell - expect).abs() < 1e-12 * expect);
        assert!(formula_ell(1.0, 0.5, 1.0, 1e-6).unwrap() > ell);
    }

    #[test]
    fn rejects_bad_times_and_parameters() {
        assert!(ImpulseTimes::new(0.2, 0.1, 0.3).is_err());
        let m = build_laplacian_oracle(4).unwrap();
        let ctx = HumContext::new(&m, &ObservationWindow::full(), 2, 4).unwrap();
        assert!(ctx
            .solve_impulse(&times(), -1.0, 1.0, &ModalState::unit(0, 2, 4))
            .is_err());
        assert!(ctx
            .solve_impulse(&times(), 1.0, 1.0, &ModalState::unit(0, 2, 3))
            .is_err());
    }
}
