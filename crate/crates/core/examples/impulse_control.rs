//! One impulse on a window steers a random state close to zero, and a
//! tracking impulse steers zero close to a target.

use degen_lab::hum::{DualForm, HumContext, ImpulseTimes};
use degen_lab::semigroup::random_state;
use degen_lab::spectral::{build_analytic_model, DegenerateOperator, ModalState};
use degen_lab::window::ObservationWindow;
use rand::SeedableRng;

fn main() -> degen_lab::Result<()> {
    let model = build_analytic_model(DegenerateOperator::new(0.5)?, 32)?;
    let ctx = HumContext::new(&model, &ObservationWindow::interval(0.3, 0.6)?, 16, 32)?;
    let times = ImpulseTimes::new(0.0, 0.18, 0.2)?;
    let eps = 1e-4;

    let ell = ctx.empirical_ell(&times, eps, DualForm::NullTarget)?;
    let ye = random_state(&mut rand_chacha::ChaCha8Rng::seed_from_u64(3), 16, 32, 0.0);
    let sol = ctx.solve_impulse(&times, ell, eps, &ye)?;
    let c = &sol.certificate;
    println!("null target: ell = {ell:.4e}");
    println!(
        "  cost/ell + ||y(T2)||^2/eps = {:.6e} <= ||y_e||^2 = {:.6e}: {}",
        c.cost_omega + c.terminal,
        c.budget,
        c.holds
    );
    println!(
        "  ||y(T2)|| = {:.3e} from ||y_e|| = {:.3e}",
        sol.terminal_state.l2_norm(),
        ye.l2_norm()
    );

    // Tracking weighs every active mode by 1/lambda_j instead of its decay, so
    // the dual constant grows much faster with J; keep the truncation small.
    // The control also excites the buffer modes above J, and at small epsilon
    // that spillover alone breaks the certificate, so use a moderate one.
    let small = HumContext::new(&model, &ObservationWindow::interval(0.3, 0.6)?, 6, 32)?;
    let mut target = vec![0.0; 32];
    target[0] = 0.5;
    target[1] = -0.25;
    let yd = ModalState::new(target, 6)?;
    let eps = 1e-2;
    let ell = small.empirical_ell(&times, eps, DualForm::Tracking)?;
    let sol = small.solve_target(&times, ell, eps, &yd)?;
    let miss: f64 = sol
        .terminal_state
        .coeffs()
        .iter()
        .zip(yd.coeffs())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let c = &sol.certificate;
    println!(
        "tracking: ell = {ell:.4e}, ||y(T2) - y_d|| = {miss:.3e}, spillover {:.3e}",
        c.spillover_norm
    );
    println!(
        "  cost/ell + ||y(T2) - y_d||^2/eps = {:.6e} <= <P y_d, y_d> = {:.6e}: {}",
        c.cost_omega + c.terminal,
        c.budget,
        c.holds
    );
    Ok(())
}
