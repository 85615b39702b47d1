//! Exact modal evolution of `u′ + Pu = 0`, impulses, and the energy functionals.

use crate::error::{LabError, Result};
use crate::hum::ImpulsePlan;
use crate::io::CsvTable;
use crate::observability::gram_matrix;
use crate::spectral::{ModalState, SpectralModel};
use nalgebra::DMatrix;
use rand::Rng;

fn check_buffer(model: &SpectralModel, state: &ModalState) -> Result<()> {
    if state.buffer() > model.len() {
        return Err(LabError::InvalidArgument(format!(
            "state buffer {} exceeds model size {}",
            state.buffer(),
            model.len()
        )));
    }
    Ok(())
}

/// `a_j ← a_j e^{−λ_j dt}` over the whole buffer.
pub fn evolve(model: &SpectralModel, state: &ModalState, dt: f64) -> Result<ModalState> {
    if !(dt >= 0.0) {
        return Err(LabError::InvalidArgument(format!(
            "evolution time must be nonnegative, got {dt}"
        )));
    }
    check_buffer(model, state)?;
    let mut out = state.clone();
    for (j, a) in out.coeffs_mut().iter_mut().enumerate() {
        *a *= (-model.lambda(j) * dt).exp();
    }
    Ok(out)
}

/// `(Σ a_j², Σ λ_j a_j², Σ a_j²/λ_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    pub l2: f64,
    pub dirichlet: f64,
    pub inverse: f64,
}

pub fn energies(model: &SpectralModel, state: &ModalState) -> Result<Energies> {
    check_buffer(model, state)?;
    let mut e = Energies {
        l2: 0.0,
        dirichlet: 0.0,
        inverse: 0.0,
    };
    for (j, &a) in state.coeffs().iter().enumerate() {
        let l = model.lambda(j);
        e.l2 += a * a;
        e.dirichlet += l * a * a;
        e.inverse += a * a / l;
    }
    Ok(e)
}

/// `N(t) = ‖u(t)‖² / ⟨P⁻¹u(t), u(t)⟩` along the free flow; non-increasing in `t`.
pub fn frequency_quotient_trace(
    model: &SpectralModel,
    state: &ModalState,
    times: &[f64],
) -> Result<Vec<f64>> {
    if state.is_zero() {
        return Err(LabError::ZeroState);
    }
    if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|p| p[1] < p[0]) {
        return Err(LabError::InvalidArgument(
            "times must be nonnegative and nondecreasing".into(),
        ));
    }
    check_buffer(model, state)?;
    // Weights relative to the slowest occupied mode keep e^{−2λt} representable.
    let j0 = state.coeffs().iter().position(|&a| a != 0.0).unwrap();
    let l0 = model.lambda(j0);
    Ok(times
        .iter()
        .map(|&t| {
            let (mut num, mut den) = (0.0, 0.0);
            for (j, &a) in state.coeffs().iter().enumerate().skip(j0) {
                let l = model.lambda(j);
                let w = a * a * (-2.0 * (l - l0) * t).exp();
                num += w;
                den += w / l;
            }
            num / den
        })
        .collect())
}

/// `a ← a + ⟨1_ω f, Φ_j⟩` with the Gram matrix of the plan's window built at the state's buffer.
pub fn apply_impulse(
    model: &SpectralModel,
    state: &ModalState,
    plan: &ImpulsePlan,
) -> Result<ModalState> {
    let n = state.buffer().max(plan.w_coeffs.len());
    let g = gram_matrix(model, &plan.window, n)?;
    apply_impulse_with_gram(state, plan, &g)
}

/// As [`apply_impulse`] with a precomputed Gram matrix of at least `buffer × len(w)`.
pub fn apply_impulse_with_gram(
    state: &ModalState,
    plan: &ImpulsePlan,
    gram: &DMatrix<f64>,
) -> Result<ModalState> {
    let k = plan.w_coeffs.len();
    if gram.nrows() < state.buffer() || gram.ncols() < k {
        return Err(LabError::InvalidArgument(format!(
            "Gram matrix {}x{} too small for buffer {} and {k} control modes",
            gram.nrows(),
            gram.ncols(),
            state.buffer()
        )));
    }
    if plan.window.measure() <= 0.0 {
        return Err(LabError::InvalidIntervals("impulse window is empty".into()));
    }
    let f = plan.control_coeffs();
    let mut out = state.clone();
    for (j, a) in out.coeffs_mut().iter_mut().enumerate() {
        *a += (0..k).map(|i| gram[(j, i)] * f[i]).sum::<f64>();
    }
    Ok(out)
}

/// Uniform random coefficients in `[−1, 1]`, scaled by `(j+1)^{−decay}`, on the active modes.
pub fn random_state<R: Rng>(rng: &mut R, active: usize, buffer: usize, decay: f64) -> ModalState {
    let c: Vec<f64> = (0..active)
        .map(|j| rng.gen_range(-1.0..=1.0) * ((j + 1) as f64).powf(-decay))
        .collect();
    ModalState::padded(&c, buffer)
}

/// Append-only record of a piecewise free evolution with impulses.
#[derive(Debug, Clone)]
pub struct Trajectory {
    samples: Vec<(f64, ModalState, bool)>,
    impulses: Vec<(f64, ImpulsePlan)>,
}

impl Trajectory {
    pub fn new(t0: f64, state: ModalState) -> Self {
        Self {
            samples: vec![(t0, state, false)],
            impulses: Vec::new(),
        }
    }

    pub fn current(&self) -> (f64, &ModalState) {
        let (t, s, _) = self.samples.last().unwrap();
        (*t, s)
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &ModalState, bool)> {
        self.samples.iter().map(|(t, s, f)| (*t, s, *f))
    }

    pub fn impulses(&self) -> &[(f64, ImpulsePlan)] {
        &self.impulses
    }

    /// Free flow to absolute time `t`.
    pub fn advance_to(&mut self, model: &SpectralModel, t: f64) -> Result<&ModalState> {
        let (t_now, s) = self.current();
        if t < t_now {
            return Err(LabError::InvalidArgument(format!(
                "cannot move back in time from {t_now} to {t}"
            )));
        }
        let next = evolve(model, s, t - t_now)?;
        self.samples.push((t, next, false));
        Ok(&self.samples.last().unwrap().1)
    }

    /// Jump by `1_ω f` at the current time (recorded as a second sample at that time).
    pub fn impulse(&mut self, plan: ImpulsePlan, gram: &DMatrix<f64>) -> Result<&ModalState> {
        let (t, s) = self.current();
        let next = apply_impulse_with_gram(s, &plan, gram)?;
        self.samples.push((t, next, true));
        self.impulses.push((t, plan));
        Ok(&self.samples.last().unwrap().1)
    }

    pub fn to_csv(&self, model: &SpectralModel) -> Result<CsvTable> {
        let mut table = CsvTable::new(&["time", "l2_norm", "dirichlet_energy", "impulse_flag"]);
        for (t, s, flag) in &self.samples {
            let e = energies(model, s)?;
            table.push_reals(&[*t, e.l2.sqrt(), e.dirichlet, if *flag { 1.0 } else { 0.0 }]);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_laplacian_oracle;
    use crate::window::ObservationWindow;

    #[test]
    fn evolve_single_mode() {
        let m = build_laplacian_oracle(4).unwrap();
        let s = ModalState::unit(0, 2, 4);
        assert_eq!(evolve(&m, &s, 0.0).unwrap(), s);
        let e = evolve(&m, &s, 1.0 / m.lambda(0)).unwrap();
        assert!((e.coeffs()[0] - (-1f64).exp()).abs() < 1e-15);
        assert!(evolve(&m, &s, -1.0).is_err());
    }

    #[test]
    fn energies_of_unit_and_zero() {
        let m = build_laplacian_oracle(4).unwrap();
        let e = energies(&m, &ModalState::unit(0, 2, 4)).unwrap();
        assert_eq!((e.l2, e.dirichlet), (1.0, m.lambda(0)));
        assert!((e.inverse - 1.0 / m.lambda(0)).abs() < 1e-16);
        let z = energies(&m, &ModalState::zeros(2, 4)).unwrap();
        assert_eq!((z.l2, z.dirichlet, z.inverse), (0.0, 0.0, 0.0));
    }

    #[test]
    fn quotient_of_eigenmode_is_constant() {
        let m = build_laplacian_oracle(12).unwrap();
        let n =
            frequency_quotient_trace(&m, &ModalState::unit(9, 10, 12), &[0.0, 0.1, 1.0]).unwrap();
        assert!(n
            .iter()
            .all(|&v| (v - m.lambda(9)).abs() < 1e-9 * m.lambda(9)));
        assert!(frequency_quotient_trace(&m, &ModalState::zeros(1, 2), &[0.0]).is_err());
    }

    #[test]
    fn full_window_impulse_cancels_mode() {
        let m = build_laplacian_oracle(6).unwrap();
        let plan = ImpulsePlan::direct(0.0, -1.0, vec![1.0], ObservationWindow::full());
        let out = apply_impulse(&m, &ModalState::unit(0, 3, 6), &plan).unwrap();
        assert!(out.coeffs().iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn trajectory_csv_flags() {
        let m = build_laplacian_oracle(4).unwrap();
        let g = gram_matrix(&m, &ObservationWindow::full(), 4).unwrap();
        let mut tr = Trajectory::new(0.0, ModalState::unit(0, 2, 4));
        tr.advance_to(&m, 0.1).unwrap();
        tr.impulse(
            ImpulsePlan::direct(0.1, 0.5, vec![1.0], ObservationWindow::full()),
            &g,
        )
        .unwrap();
        tr.advance_to(&m, 0.2).unwrap();
        let csv = tr.to_csv(&m).unwrap().render();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv
            .lines()
            .nth(3)
            .unwrap()
            .ends_with("1.0000000000000000e0"));
        assert!(tr.advance_to(&m, 0.1).is_err());
    }
}
