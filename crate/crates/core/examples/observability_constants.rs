//! Empirical spectral-inequality constant on a window, and the derived
//! constants checked on random free solutions.

use degen_lab::observability::{
    check_chain, gram_matrix, propagate_constants, spectral_constant_sweep, CHAIN_TIMES,
};
use degen_lab::semigroup::random_state;
use degen_lab::spectral::{build_analytic_model, DegenerateOperator};
use degen_lab::window::ObservationWindow;
use rand::SeedableRng;

fn main() -> degen_lab::Result<()> {
    let model = build_analytic_model(DegenerateOperator::new(0.5)?, 16)?;
    let window = ObservationWindow::interval(0.2, 0.5)?;
    let sweep = spectral_constant_sweep(&model, &window, model.lambdas(), 0.75)?;
    for (l, mu) in sweep.resolved() {
        println!("Lambda = {l:<12.4} ln(1/mu_min) = {:.4}", (1.0 / mu).ln());
    }
    let sigma = sweep.sigma_fit;
    let k = propagate_constants(sweep.envelope_constant(sigma), sigma)?;
    println!(
        "sigma = {sigma:.2}: C1 = {:.4}, C2 = {:.4}, C3 = {:.4}, C4 = {:.4}",
        k.c1, k.c2, k.c3, k.c4
    );

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let states: Vec<_> = (0..20)
        .map(|_| random_state(&mut rng, 16, 16, 0.0))
        .collect();
    let (tally, _) = check_chain(
        &model,
        &gram_matrix(&model, &window, 16)?,
        &k,
        &states,
        &CHAIN_TIMES,
    );
    println!(
        "{} checks, violations {:?}, smallest log-margins {:?}",
        tally.checks, tally.violations, tally.min_margin
    );
    Ok(())
}
