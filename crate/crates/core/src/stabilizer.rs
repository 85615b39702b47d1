//! Finite-time stabilization by a sequence of impulse feedbacks.
//!
//! Stage `m` runs on `[t_m, t_{m+1}]`, `t_m = T(1 − b^{−m})`, and applies at the
//! midpoint the impulse `1_ω F_m(z(t_m))`, where `F_m ϑ = Σ_{λ_j≤Λ_m} ⟨ϑ,Φ_j⟩ f_j`
//! and `f_j` is a HUM impulse steering `Φ_j` to `‖y_j(t_{m+1})‖² ≤ e^{−ηb^{βm}}/Card`.
//! Quantities like `b^{βm}` overflow quickly, so the schedule works in logs.

use crate::error::{LabError, Result};
use crate::hum::{DualForm, HumContext, ImpulsePlan, ImpulseTimes};
use crate::io::{sig17, CsvTable};
use crate::linalg::jacobi_eigen;
use crate::observability::window_norm_sq;
use crate::semigroup::{evolve, Trajectory};
use crate::spectral::{linear_fit, ModalState};
use nalgebra::DMatrix;
use serde::Serialize;

/// How the geometric ratio `b` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatioChoice {
    /// Iterate `η ← η(b)`, `b ← e^{32/(βη)}` from `b₀ = 2`; use `fallback` if it fails.
    FixedPoint { fallback: Option<f64> },
    /// Use this `b` directly, `η` from its formula.
    Given(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub horizon: f64,
    pub sigma: f64,
    pub c3: f64,
    /// Weyl exponent `ρ` of `Card{λ_i ≤ Λ} ≤ c Λ^{1/ρ}`.
    pub rho: f64,
    pub card_prefactor: f64,
    /// Free exponent in the control-norm constant; defaults to `β`.
    pub theta: Option<f64>,
    pub ratio: RatioChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizationSchedule {
    #[serde(with = "sig17")]
    pub horizon: f64,
    #[serde(with = "sig17")]
    pub sigma: f64,
    #[serde(with = "sig17")]
    pub beta: f64,
    #[serde(with = "sig17")]
    pub c3: f64,
    #[serde(with = "sig17")]
    pub b: f64,
    #[serde(with = "sig17")]
    pub eta: f64,
    #[serde(with = "sig17")]
    pub rho: f64,
    #[serde(with = "sig17")]
    pub card_prefactor: f64,
    #[serde(with = "sig17")]
    pub theta: f64,
    #[serde(with = "sig17")]
    pub lambda1: f64,
    pub fixed_point_converged: bool,
    pub fixed_point_iterations: usize,
    pub used_fallback: bool,
}

fn eta_of(c3: f64, beta: f64, horizon: f64, b: f64) -> f64 {
    1.0 + 4.0 * (c3 + (2.0 * c3).powf(beta)) * (2.0 / horizon * b / (b - 1.0)).powf(beta)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn build_schedule(params: &ScheduleParams, lambda1: f64) -> Result<StabilizationSchedule> {
    let ScheduleParams {
        horizon,
        sigma,
        c3,
        rho,
        card_prefactor,
        theta,
        ratio,
    } = *params;
    if !(horizon > 0.0
        && sigma > 0.0
        && sigma < 1.0
        && c3 > 0.0
        && rho > 0.0
        && card_prefactor > 0.0
        && lambda1 > 0.0)
    {
        return Err(LabError::Schedule(format!("need T > 0, σ in (0,1), C3 > 0, ρ > 0, c > 0, λ1 > 0; got T={horizon}, σ={sigma}, C3={c3}, ρ={rho}, c={card_prefactor}, λ1={lambda1}")));
    }
    let beta = sigma / (1.0 - sigma);
    let mut out = StabilizationSchedule {
        horizon,
        sigma,
        beta,
        c3,
        b: f64::NAN,
        eta: f64::NAN,
        rho,
        card_prefactor,
        theta: theta.unwrap_or(beta),
        lambda1,
        fixed_point_converged: false,
        fixed_point_iterations: 0,
        used_fallback: false,
    };
    let given = |b: f64| -> Result<f64> {
        if !(b > 1.0 && b.is_finite()) {
            return Err(LabError::Schedule(format!(
                "ratio b must exceed 1, got {b}"
            )));
        }
        Ok(b)
    };
    match ratio {
        RatioChoice::Given(b) => {
            out.b = given(b)?;
        }
        RatioChoice::FixedPoint { fallback } => {
            let mut b = 2.0f64;
            for it in 1..=100 {
                let eta = eta_of(c3, beta, horizon, b);
                let next = (32.0 / (beta * eta)).exp();
                out.fixed_point_iterations = it;
                if !(next > 1.0 && next.is_finite() && eta.is_finite()) {
                    break;
                }
                if (next - b).abs() <= 1e-14 * b.max(1.0)
                    && ((next - 1.0) - (b - 1.0)).abs() <= 1e-12 * (b - 1.0)
                {
                    out.fixed_point_converged = true;
                    b = next;
                    break;
                }
                b = next;
            }
            if out.fixed_point_converged {
                out.b = b;
            } else {
                let fb = fallback.ok_or_else(|| {
                    LabError::Schedule(format!("fixed point η = η(b), b = e^{{32/(βη)}} did not converge after {} iterations (last b = {b:e}); supply a fallback b", out.fixed_point_iterations))
                })?;
                out.b = given(fb)?;
                out.used_fallback = true;
            }
        }
    }
    out.eta = eta_of(c3, beta, horizon, out.b);
    if !out.eta.is_finite() {
        return Err(LabError::Overflow(format!("η overflows for b = {}", out.b)));
    }
    Ok(out)
}

impl StabilizationSchedule {
    pub fn t(&self, m: usize) -> f64 {
        self.horizon * (1.0 - self.b.powi(-(m as i32)))
    }

    /// `t_{m+1} − t_m = T(b−1)/b^{m+1}`.
    pub fn stage_length(&self, m: usize) -> f64 {
        self.horizon * (self.b - 1.0) * self.b.powi(-(m as i32) - 1)
    }

    pub fn midpoint(&self, m: usize) -> f64 {
        0.5 * (self.t(m) + self.t(m + 1))
    }

    /// `ln(η b^{βm})`.
    pub fn ln_decay_exponent(&self, m: usize) -> f64 {
        self.eta.ln() + self.beta * m as f64 * self.b.ln()
    }

    /// `η b^{βm}` (may be infinite).
    pub fn decay_exponent(&self, m: usize) -> f64 {
        self.ln_decay_exponent(m).exp()
    }

    /// `ln Λ_m`, `Λ_m = λ₁ + (η/T · b/(b−1)) b^{(β+1)m}`.
    pub fn ln_lambda_cap(&self, m: usize) -> f64 {
        let lead = (self.eta / self.horizon * self.b / (self.b - 1.0)).ln()
            + (self.beta + 1.0) * m as f64 * self.b.ln();
        log_add_exp(self.lambda1.ln(), lead)
    }

    pub fn lambda_cap(&self, m: usize) -> f64 {
        self.ln_lambda_cap(m).exp()
    }

    /// `ln(e^{−ηb^{βm}}/card)`.
    pub fn ln_accuracy_target(&self, m: usize, card: usize) -> f64 {
        -self.decay_exponent(m) - (card as f64).ln()
    }

    /// Relative slack `(Λ_m Δ_m − η b^{βm}) / (η b^{βm}) = λ₁Δ_m/(ηb^{βm})`, computed in logs.
    /// The flag also requires the direct comparison of both sides whenever the slack is
    /// resolvable in double precision; below that the two products agree to rounding.
    pub fn stage_length_margin(&self, m: usize) -> (f64, bool) {
        let ln_len = self.horizon.ln() + (self.b - 1.0).ln() - (m as f64 + 1.0) * self.b.ln();
        let ln_lhs = self.ln_decay_exponent(m);
        let slack = (self.lambda1.ln() + ln_len - ln_lhs).exp();
        let direct = if slack > 1e-12 {
            let (l, r) = (ln_lhs.exp(), self.lambda_cap(m) * self.stage_length(m));
            !(l.is_finite() && r.is_finite()) || l <= r
        } else {
            true
        };
        (slack, direct && slack > 0.0)
    }

    /// `−½ηb^{βm} + (C₃+(2C₃)^β)(2b/(T(b−1)))^β b^{βm} ≤ −¼ηb^{βm}`, divided by `b^{βm}`.
    pub fn eta_requirement_holds(&self) -> bool {
        let x = (self.c3 + (2.0 * self.c3).powf(self.beta))
            * (2.0 / self.horizon * self.b / (self.b - 1.0)).powf(self.beta);
        -0.5 * self.eta + x <= -0.25 * self.eta
    }

    /// `C₅ = (c(λ₁ + (η/T)(b/(b−1))))^{(θ+1)/ρ}`.
    pub fn c5(&self) -> f64 {
        (self.card_prefactor * (self.lambda1 + self.eta / self.horizon * self.b / (self.b - 1.0)))
            .powf((self.theta + 1.0) / self.rho)
    }

    /// Largest `m` whose stage only involves modes up to `active` (and below the model's top),
    /// or `None` when even stage 0 does not fit.
    pub fn honest_m_max(&self, lambdas: &[f64], active: usize) -> Option<usize> {
        let mut best = None;
        for m in 0..64 {
            let cap = self.lambda_cap(m);
            let count = lambdas.iter().take_while(|&&l| l <= cap).count();
            if !cap.is_finite() || count > active || count == lambdas.len() {
                break;
            }
            best = Some(m);
        }
        best
    }

    pub fn table(&self, m_max: usize) -> CsvTable {
        let mut t = CsvTable::new(&[
            "m",
            "t_m",
            "midpoint",
            "lambda_cap",
            "ln_decay_exponent",
            "stage_length_slack",
        ]);
        for m in 0..=m_max {
            t.push_reals(&[
                m as f64,
                self.t(m),
                self.midpoint(m),
                self.lambda_cap(m),
                self.ln_decay_exponent(m),
                self.stage_length_margin(m).0,
            ]);
        }
        t
    }
}

/// `ϑ ↦ Σ_{λ_j≤Λ_m} ⟨ϑ,Φ_j⟩ f_j` with `f_j` as modal functions on the active modes.
#[derive(Debug, Clone)]
pub struct FeedbackOperator {
    pub stage: usize,
    pub controls: Vec<Vec<f64>>,
    /// `‖f_j‖_ω²`.
    pub omega_norms_sq: Vec<f64>,
    /// `‖y_j(t_{m+1})‖²` at the buffer.
    pub achieved: Vec<f64>,
    pub target: f64,
    pub ells: Vec<f64>,
    /// `‖F_m‖²` as a map into `L²(ω)`.
    pub operator_norm_sq: f64,
}

impl FeedbackOperator {
    pub fn card(&self) -> usize {
        self.controls.len()
    }

    /// Modal coefficients of `F_m ϑ` before restriction.
    pub fn apply(&self, state: &ModalState) -> Vec<f64> {
        let n = self.controls.first().map_or(0, |c| c.len());
        let mut out = vec![0.0; n];
        for (j, f) in self.controls.iter().enumerate() {
            let a = state.coeffs()[j];
            out.iter_mut().zip(f).for_each(|(o, v)| *o += a * v);
        }
        out
    }

    /// `‖F_m‖² ≤ Σ_j ‖f_j‖_ω²`.
    pub fn norm_bound_holds(&self) -> bool {
        self.operator_norm_sq <= self.omega_norms_sq.iter().sum::<f64>() * (1.0 + 1e-12)
    }
}

pub fn build_feedback(
    ctx: &HumContext<'_>,
    schedule: &StabilizationSchedule,
    m: usize,
) -> Result<FeedbackOperator> {
    let model = ctx.model();
    let cap = schedule.lambda_cap(m);
    let card = model.count_below(cap);
    if card == model.len() || !cap.is_finite() {
        return Err(LabError::Schedule(format!(
            "Λ_{m} = {cap:e} is beyond λ_Jmax = {:e}",
            model.lambda(model.len() - 1)
        )));
    }
    if card > ctx.active() {
        return Err(LabError::Schedule(format!(
            "stage {m} needs {card} modes but only {} are active",
            ctx.active()
        )));
    }
    let times = ImpulseTimes::new(schedule.t(m), schedule.midpoint(m), schedule.t(m + 1))?;
    let ln_target = schedule.ln_accuracy_target(m, card.max(1));
    let target = ln_target.exp();
    if target < f64::MIN_POSITIVE {
        return Err(LabError::Overflow(format!(
            "stage {m} accuracy target e^{ln_target:.3} is below the double range"
        )));
    }
    let mut fb = FeedbackOperator {
        stage: m,
        controls: Vec::new(),
        omega_norms_sq: Vec::new(),
        achieved: Vec::new(),
        target,
        ells: Vec::new(),
        operator_norm_sq: 0.0,
    };
    let ell = if card > 0 {
        ctx.empirical_ell(&times, target, DualForm::NullTarget)?
    } else {
        0.0
    };
    let solved: Vec<Result<(Vec<f64>, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..card)
            .map(|j| {
                let times = &times;
                scope.spawn(move || -> Result<(Vec<f64>, f64)> {
                    let y_e = ModalState::unit(j, ctx.active(), ctx.buffer());
                    let sol = ctx.solve_impulse(times, ell, target, &y_e)?;
                    Ok((
                        sol.plan.control_coeffs(),
                        sol.terminal_state.l2_norm().powi(2),
                    ))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("feedback synthesis thread panicked"))
            .collect()
    });
    for (j, r) in solved.into_iter().enumerate() {
        let (f, achieved) = r?;
        if !(achieved <= target) {
            return Err(LabError::TargetUnreachable {
                mode: j + 1,
                achieved,
                target,
            });
        }
        fb.omega_norms_sq.push(window_norm_sq(ctx.gram(), &f));
        fb.controls.push(f);
        fb.achieved.push(achieved);
        fb.ells.push(ell);
    }
    if card > 0 {
        let n = ctx.active();
        let c = DMatrix::from_fn(n, card, |i, j| fb.controls[j][i]);
        let g = ctx.gram().view((0, 0), (n, n)).clone_owned();
        let form = c.transpose() * g * &c;
        fb.operator_norm_sq = jacobi_eigen(&((&form + form.transpose()) * 0.5))
            .0
            .last()
            .copied()
            .unwrap_or(0.0)
            .max(0.0);
    }
    Ok(fb)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub m: usize,
    #[serde(with = "sig17")]
    pub t_m: f64,
    #[serde(with = "sig17")]
    pub lambda_cap: f64,
    pub card: usize,
    #[serde(with = "sig17")]
    pub z_norm: f64,
    #[serde(with = "sig17")]
    pub feedback_omega_norm: f64,
    #[serde(with = "sig17")]
    pub operator_norm_sq: f64,
    #[serde(with = "sig17")]
    pub target: f64,
    /// Largest `‖y_j(t_{m+1})‖²` over the stage's modes.
    #[serde(with = "sig17")]
    pub achieved: f64,
    #[serde(with = "sig17")]
    pub next_norm: f64,
    #[serde(with = "sig17")]
    pub high_part: f64,
    #[serde(with = "sig17")]
    pub low_part: f64,
    /// `‖z(t_{m+1})‖ ≤ e^{1−½ηb^{βm}} ‖z(t_m)‖`.
    pub stage_bound: bool,
    /// `‖z(t_m)‖² ≤ e^{2m−ηb^{βm}} ‖z₀‖²`.
    pub induction_bound: bool,
    /// Free-flow part above `Λ_m` and controlled part below it.
    pub split_bounds: bool,
    /// `‖z(t)‖² ≤ 2(1+C₅+‖F₀‖²) e^{−ηb^{βm}/16} ‖z₀‖²` at the stage's samples.
    pub envelope: bool,
    pub norm_bound: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilizationReport {
    pub schedule: StabilizationSchedule,
    pub stages: Vec<StageRecord>,
    #[serde(with = "sig17")]
    pub c5: f64,
    /// Slope of `ln‖z(t_m)‖` against `(T/(T−t_m))^β`, i.e. `−1/K` of the envelope.
    #[serde(with = "sig17")]
    pub envelope_slope: f64,
    #[serde(with = "sig17")]
    pub envelope_intercept: f64,
    pub all_bounds_hold: bool,
}

impl StabilizationReport {
    pub fn stage_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "m",
            "t_m",
            "lambda_cap",
            "z_norm",
            "feedback_norm",
            "target",
            "achieved",
        ]);
        for s in &self.stages {
            t.push_reals(&[
                s.m as f64,
                s.t_m,
                s.lambda_cap,
                s.z_norm,
                s.feedback_omega_norm,
                s.target,
                s.achieved,
            ]);
        }
        t
    }

    /// `‖F_m(z(t_m))‖_ω` non-increasing from stage `from` on.
    pub fn feedback_decreasing_from(&self, from: usize) -> bool {
        self.stages
            .iter()
            .skip(from)
            .collect::<Vec<_>>()
            .windows(2)
            .all(|p| p[1].feedback_omega_norm <= p[0].feedback_omega_norm)
    }
}

/// Closed loop over stages `0..=m_max`.
pub fn run_stabilization(
    ctx: &HumContext<'_>,
    schedule: &StabilizationSchedule,
    z0: &ModalState,
    m_max: usize,
) -> Result<(Trajectory, StabilizationReport)> {
    let model = ctx.model();
    if z0.buffer() != ctx.buffer() {
        return Err(LabError::InvalidArgument(format!(
            "initial state buffer {} differs from {}",
            z0.buffer(),
            ctx.buffer()
        )));
    }
    let z0_norm = z0.l2_norm();
    let mut tr = Trajectory::new(0.0, z0.clone());
    let mut stages = Vec::with_capacity(m_max + 1);
    let c5 = schedule.c5();
    let mut f0_sq = 0.0;
    for m in 0..=m_max {
        let fb = build_feedback(ctx, schedule, m)?;
        if m == 0 {
            f0_sq = fb.operator_norm_sq;
        }
        let tm = schedule.t(m);
        tr.advance_to(model, tm)?;
        let z_m = tr.current().1.clone();
        let z_norm = z_m.l2_norm();
        let push = fb.apply(&z_m);
        let plan = ImpulsePlan::direct(
            schedule.midpoint(m),
            1.0,
            push.clone(),
            ctx.window().clone(),
        );
        let before = tr.advance_to(model, schedule.midpoint(m))?.l2_norm();
        let after = tr.impulse(plan, ctx.gram())?.l2_norm();
        let next = tr.advance_to(model, schedule.t(m + 1))?.clone();
        let next_norm = next.l2_norm();

        let card = fb.card();
        let mut high = z_m.clone();
        high.coeffs_mut()[..card].iter_mut().for_each(|a| *a = 0.0);
        let high = evolve(model, &high, schedule.stage_length(m))?;
        let low: f64 = next
            .coeffs()
            .iter()
            .zip(high.coeffs())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let decay = schedule.decay_exponent(m);
        let tol = 1.0 + 1e-12;
        let envelope_cap =
            |x: f64| x <= (2.0 * (1.0 + c5 + f0_sq)).sqrt() * (-decay / 32.0).exp() * z0_norm * tol;
        stages.push(StageRecord {
            m,
            t_m: tm,
            lambda_cap: schedule.lambda_cap(m),
            card,
            z_norm,
            feedback_omega_norm: window_norm_sq(ctx.gram(), &push).sqrt(),
            operator_norm_sq: fb.operator_norm_sq,
            target: fb.target,
            achieved: fb.achieved.iter().copied().fold(0.0, f64::max),
            next_norm,
            high_part: high.l2_norm(),
            low_part: low,
            stage_bound: next_norm <= (1.0 - 0.5 * decay).exp() * z_norm * tol,
            induction_bound: z_norm.powi(2)
                <= (2.0 * m as f64 - decay).exp() * z0_norm.powi(2) * tol
                || m == 0,
            split_bounds: high.l2_norm() <= (-decay).exp() * z_norm * tol
                && low <= (-0.5 * decay).exp() * z_norm * tol,
            envelope: m == 0
                || [z_norm, before, after, next_norm]
                    .into_iter()
                    .all(envelope_cap),
            norm_bound: fb.norm_bound_holds(),
        });
    }
    let pts: Vec<(f64, f64)> = stages
        .iter()
        .filter(|s| s.z_norm > 0.0)
        .map(|s| {
            (
                (schedule.horizon / (schedule.horizon - s.t_m)).powf(schedule.beta),
                s.z_norm.ln(),
            )
        })
        .collect();
    let (slope, intercept) = if pts.len() >= 2 {
        linear_fit(&pts)
    } else {
        (f64::NAN, f64::NAN)
    };
    let all = stages.iter().all(|s| {
        s.stage_bound && s.induction_bound && s.split_bounds && s.envelope && s.norm_bound
    });
    let report = StabilizationReport {
        schedule: schedule.clone(),
        stages,
        c5,
        envelope_slope: slope,
        envelope_intercept: intercept,
        all_bounds_hold: all,
    };
    Ok((tr, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(ratio: RatioChoice) -> ScheduleParams {
        ScheduleParams {
            horizon: 1.0,
            sigma: 0.75,
            c3: 1.0,
            rho: 2.0,
            card_prefactor: 1.0,
            theta: None,
            ratio,
        }
    }

    #[test]
    fn beta_from_sigma() {
        let mut p = params(RatioChoice::Given(2.0));
        p.sigma = 0.5;
        assert_eq!(build_schedule(&p, 1.0).unwrap().beta, 1.0);
    }

    #[test]
    fn fixed_point_needs_fallback_when_it_diverges() {
        assert!(build_schedule(&params(RatioChoice::FixedPoint { fallback: None }), 1.0).is_err());
        let s = build_schedule(
            &params(RatioChoice::FixedPoint {
                fallback: Some(1.5),
            }),
            1.0,
        )
        .unwrap();
        assert!(s.used_fallback && !s.fixed_point_converged && s.b == 1.5);
        assert!(s.eta_requirement_holds());
    }

    #[test]
    fn schedule_identities() {
        let s = build_schedule(&params(RatioChoice::Given(1.3)), 2.0).unwrap();
        for m in 0..12 {
            let len = s.t(m + 1) - s.t(m);
            assert!((len - s.stage_length(m)).abs() < 1e-14);
            assert!(s.t(m) < s.midpoint(m) && s.midpoint(m) < s.t(m + 1));
            assert!(s.lambda_cap(m + 1) > s.lambda_cap(m));
            assert!(s.stage_length_margin(m).1);
        }
    }

    #[test]
    fn converged_schedule_in_logs() {
        let p = ScheduleParams {
            horizon: 10.0,
            sigma: 0.75,
            c3: 0.1,
            rho: 2.0,
            card_prefactor: 1.0,
            theta: None,
            ratio: RatioChoice::FixedPoint { fallback: None },
        };
        let s = build_schedule(&p, 4.0).unwrap();
        assert!(s.fixed_point_converged);
        assert!(((32.0 / (s.beta * s.eta)).exp() - s.b).abs() < 1e-9 * s.b);
        assert!((0..=12).all(|m| s.stage_length_margin(m).1));
    }

    fn loop_setup() -> (crate::spectral::SpectralModel, StabilizationSchedule) {
        use crate::spectral::{build_analytic_model, DegenerateOperator};
        let model = build_analytic_model(DegenerateOperator::new(0.5).unwrap(), 32).unwrap();
        let p = ScheduleParams {
            horizon: 1.0,
            sigma: 0.5,
            c3: 0.03,
            rho: 2.0,
            card_prefactor: 1.0,
            theta: None,
            ratio: RatioChoice::Given(1.25),
        };
        let s = build_schedule(&p, model.lambda(0)).unwrap();
        (model, s)
    }

    #[test]
    fn zero_state_stays_zero() {
        let (model, s) = loop_setup();
        let ctx = HumContext::new(
            &model,
            &crate::window::ObservationWindow::interval(0.2, 0.5).unwrap(),
            12,
            24,
        )
        .unwrap();
        let (tr, rep) = run_stabilization(&ctx, &s, &ModalState::zeros(12, 24), 2).unwrap();
        assert!(tr.current().1.is_zero());
        assert!(rep.stages.iter().all(|st| st.feedback_omega_norm == 0.0) && rep.all_bounds_hold);
    }

    #[test]
    fn first_mode_full_window_meets_stage_bounds() {
        let (model, s) = loop_setup();
        let ctx =
            HumContext::new(&model, &crate::window::ObservationWindow::full(), 12, 24).unwrap();
        let fb = build_feedback(&ctx, &s, 0).unwrap();
        assert!(s.lambda_cap(0) < model.lambda(2));
        assert!(fb.norm_bound_holds());
        let (_, rep) = run_stabilization(&ctx, &s, &ModalState::unit(0, 12, 24), 4).unwrap();
        assert!(rep
            .stages
            .iter()
            .all(|st| st.stage_bound && st.split_bounds && st.induction_bound));
    }

    #[test]
    fn single_column_below_second_eigenvalue() {
        let (model, _) = loop_setup();
        let p = ScheduleParams {
            horizon: 4.0,
            sigma: 0.5,
            c3: 0.03,
            rho: 2.0,
            card_prefactor: 1.0,
            theta: None,
            ratio: RatioChoice::Given(1.25),
        };
        let s = build_schedule(&p, model.lambda(0)).unwrap();
        assert!(s.lambda_cap(0) < model.lambda(1));
        let ctx = HumContext::new(
            &model,
            &crate::window::ObservationWindow::interval(0.2, 0.5).unwrap(),
            12,
            24,
        )
        .unwrap();
        assert_eq!(build_feedback(&ctx, &s, 0).unwrap().card(), 1);
    }
}
