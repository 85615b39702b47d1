//! Impulse feedback on the geometric schedule t_m = T(1 - b^{-m}) drives the
//! state to zero before the horizon.

use degen_lab::hum::HumContext;
use degen_lab::semigroup::random_state;
use degen_lab::spectral::{build_analytic_model, DegenerateOperator};
use degen_lab::stabilizer::{build_schedule, run_stabilization, RatioChoice, ScheduleParams};
use degen_lab::window::ObservationWindow;
use rand::SeedableRng;

fn main() -> degen_lab::Result<()> {
    let model = build_analytic_model(DegenerateOperator::new(0.5)?, 32)?;
    let params = ScheduleParams {
        horizon: 1.0,
        sigma: 0.5,
        c3: 0.03,
        rho: 2.0,
        card_prefactor: 1.0,
        theta: None,
        ratio: RatioChoice::Given(1.25),
    };
    let schedule = build_schedule(&params, model.lambda(0))?;
    println!(
        "b = {}, eta = {:.4}, honest m_max = {:?}",
        schedule.b,
        schedule.eta,
        schedule.honest_m_max(model.lambdas(), 16)
    );

    let ctx = HumContext::new(&model, &ObservationWindow::interval(0.2, 0.5)?, 16, 32)?;
    let z0 = random_state(&mut rand_chacha::ChaCha8Rng::seed_from_u64(9), 16, 32, 0.0);
    let (trajectory, report) = run_stabilization(&ctx, &schedule, &z0, 6)?;
    println!("m  t_m       modes  ||z(t_m)||     ||F_m z||_omega");
    for s in &report.stages {
        println!(
            "{:<2} {:<9.5} {:<6} {:<14.4e} {:.4e}",
            s.m, s.t_m, s.card, s.z_norm, s.feedback_omega_norm
        );
    }
    let (t, z) = trajectory.current();
    println!(
        "||z({t:.5})|| = {:.3e}; all bounds hold: {}",
        z.l2_norm(),
        report.all_bounds_hold
    );
    Ok(())
}
