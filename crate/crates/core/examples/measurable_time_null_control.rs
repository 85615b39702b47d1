//! Null control acting only on a time set E of positive measure; the terminal
//! norm shrinks as the regularization epsilon goes to zero.

use degen_lab::null_control::{
    epsilon_sweep, sweep_is_monotone, NullControlProblem, DEFAULT_EPSILONS,
};
use degen_lab::semigroup::random_state;
use degen_lab::spectral::{build_analytic_model, DegenerateOperator};
use degen_lab::window::{ObservationWindow, TimeSet};
use rand::SeedableRng;

fn main() -> degen_lab::Result<()> {
    let model = build_analytic_model(DegenerateOperator::new(0.5)?, 32)?;
    let set = TimeSet::parse("0.1,0.35,0.6,0.85", 1.0)?;
    let problem = NullControlProblem::new(
        &model,
        &ObservationWindow::interval(0.2, 0.5)?,
        &set,
        16,
        32,
    )?;
    let k = problem.default_k()?;
    let y0 = random_state(&mut rand_chacha::ChaCha8Rng::seed_from_u64(8), 16, 32, 0.0);
    let rows = epsilon_sweep(&problem, k, &y0, &DEFAULT_EPSILONS)?;
    println!("K = {k:.4e}, |E| = {}", set.measure());
    println!("epsilon   ||y(T)||       cost");
    for r in &rows {
        println!(
            "{:<9.0e} {:<14.4e} {:.4e}",
            r.epsilon, r.terminal_norm, r.cost
        );
    }
    println!("monotone: {}", sweep_is_monotone(&rows));
    Ok(())
}
