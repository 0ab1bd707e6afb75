//! Cyclic reduction on the scalar Laurent polynomial `-z⁻¹ + 4 - z`: the
//! middle coefficient converges to `2√3` and `H₀ = 1/√12`.

use qcr::cr::{laurent_coeffs, run_cr, LaurentTriple, StoppingRule};
use qcr::hodlr::TruncationPolicy;

fn main() -> qcr::Result<()> {
    let phi = LaurentTriple::scalar(-1.0, 4.0, -1.0);
    let run = run_cr(&phi, &TruncationPolicy::default(), &StoppingRule::default())?;
    println!("h norm_Aminus norm_Aplus max_offdiag_rank elapsed_seconds");
    for r in &run.state.history {
        println!("{}", r.telemetry_line());
    }
    let state = run.into_converged()?;
    let a0 = state.a0_limit()[(0, 0)];
    println!("\na0 limit {a0:.15}  (2*sqrt(3) = {:.15})", 2.0 * 3f64.sqrt());

    let h0 = state.h0_limit()?[(0, 0)];
    let quad = laurent_coeffs(&phi, 16, None)?;
    println!("H0 from CR         {h0:.15}");
    println!("H0 from quadrature {:.15}", quad.get(0).unwrap()[(0, 0)]);
    println!("1/sqrt(12)         {:.15}", 1.0 / 12f64.sqrt());
    for j in 1..=3 {
        println!("H{j} = {:.3e}", quad.get(j).unwrap()[(0, 0)]);
    }
    Ok(())
}
