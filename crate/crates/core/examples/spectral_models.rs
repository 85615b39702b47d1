//! Eigenvalues of -(x^a u')' from the Bessel closed form and from P1 finite
//! elements, side by side, plus the Weyl growth exponent.

use degen_lab::spectral::{
    build_analytic_model, build_galerkin_model, weyl_fit, DegenerateOperator, WEYL_FIT_MODES,
};

fn main() -> degen_lab::Result<()> {
    for alpha in [0.5, 1.5] {
        let op = DegenerateOperator::new(alpha)?;
        let exact = build_analytic_model(op, 8)?;
        let fem = build_galerkin_model(op, 4096, 8)?;
        println!(
            "alpha = {alpha} (Bessel order {:.3}, strongly degenerate: {})",
            op.bessel_order(),
            op.is_strongly_degenerate()
        );
        println!("  k  analytic           galerkin           rel. gap");
        for k in 0..8 {
            let (a, g) = (exact.lambda(k), fem.lambda(k));
            println!(
                "  {:<2} {a:<18.12} {g:<18.12} {:.1e}",
                k + 1,
                (a - g).abs() / a
            );
        }
        println!(
            "  Phi_1(0.5) = {:.6}, Phi_1'(1) = {:.6}",
            exact.eval(0, 0.5),
            exact.boundary_slope(0)
        );
        let (rho, c) = weyl_fit(&build_analytic_model(op, WEYL_FIT_MODES)?)?;
        println!("  Weyl fit lambda_k ~ {c:.4} k^{rho:.4}\n");
    }
    Ok(())
}
