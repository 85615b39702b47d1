//! Numerical checks behind the Carleman estimate: the weighted Hardy
//! inequality (and its failure at a = 1), the four integration-by-parts
//! identities, and the Carleman ratio along the large parameter.

use degen_lab::carleman::{
    carleman_probe, check_hardy, check_ibp_identities, hardy_failure_at_one, random_hardy_sample,
    reference_test_function, CarlemanConfig,
};
use rand::SeedableRng;

fn main() -> degen_lab::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for alpha in [0.5, 1.5] {
        let samples: Vec<_> = (0..100)
            .map(|i| random_hardy_sample(&mut rng, alpha, i % 2 == 0))
            .collect();
        let r = check_hardy(alpha, &samples)?;
        println!(
            "Hardy a = {alpha}: max ratio {:.3}; constant 4/(2-a)^2 = {:.3} violated {} times, 4/(1-a)^2 = {:.3} violated {} times",
            r.max_ratio, r.displayed_constant, r.violations_displayed, r.sharp_constant, r.violations_sharp
        );
    }
    let demo = hardy_failure_at_one(8, 0.999);
    println!("a = 1: ratios {:?}", demo.ratios);

    for alpha in [0.5, 1.5] {
        let c = CarlemanConfig::new(alpha, 1.0, 0.5, 20.0, 50.0)?;
        let v = reference_test_function(alpha, 1.0);
        let ibp = check_ibp_identities(&c, &v, 4)?;
        println!("identities a = {alpha}: residuals {:?}", ibp.residuals);
        let taus: Vec<f64> = (0..=8).map(|k| 10f64.powf(1.0 + k as f64 / 4.0)).collect();
        let p = carleman_probe(&c, &v, &taus, 6)?;
        println!(
            "  c(tau) = {:?}, bounded: {}",
            p.ratio
                .iter()
                .map(|x| format!("{x:.3e}"))
                .collect::<Vec<_>>(),
            p.bounded
        );
    }
    Ok(())
}
