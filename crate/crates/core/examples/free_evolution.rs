//! Free heat flow in modal coordinates: energy decay and the monotone
//! frequency quotient ||u||^2 / <P^{-1}u, u>.

use degen_lab::semigroup::{energies, evolve, frequency_quotient_trace, random_state};
use degen_lab::spectral::{build_analytic_model, DegenerateOperator};
use rand::SeedableRng;

fn main() -> degen_lab::Result<()> {
    let model = build_analytic_model(DegenerateOperator::new(0.5)?, 24)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let u0 = random_state(&mut rng, 16, 24, 0.5);
    let times = [0.0, 0.01, 0.05, 0.1, 0.5];
    let quotient = frequency_quotient_trace(&model, &u0, &times)?;
    println!("t       ||u||^2        <Pu,u>         N(t)");
    for (&t, n) in times.iter().zip(quotient) {
        let e = energies(&model, &evolve(&model, &u0, t)?)?;
        println!("{t:<7} {:<14.6e} {:<14.6e} {n:.6}", e.l2, e.dirichlet);
    }
    println!("N(t) approaches lambda_1 = {:.6}", model.lambda(0));
    Ok(())
}
