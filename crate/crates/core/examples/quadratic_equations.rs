//! Minimal solutions G, Ĝ, R, R̂ of the quadratic matrix equations of a
//! random QBD process, with residuals and the coupling check against
//! quadrature Laurent coefficients.

use qcr::cr::solve_quadratic_equations;
use qcr::hodlr::TruncationPolicy;
use qcr::problems::{random_qbd_detailed, DEFAULT_SEED};

fn main() -> qcr::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let qbd = random_qbd_detailed(m, DEFAULT_SEED)?;
    println!("random QBD m={m}: alpha {} after {} draw(s)", qbd.alpha, qbd.attempts);

    let sol = solve_quadratic_equations(&qbd.phi, &TruncationPolicy::default())?;
    println!("CR steps {}", sol.steps);
    for (name, (res, rad)) in ["G", "G_hat", "R", "R_hat"]
        .iter()
        .zip(sol.residuals.iter().zip(sol.radii))
    {
        println!("{name:>6}: relative residual {res:.2e}, spectral radius {rad:.6}");
    }
    if let Some(e) = sol.coupling_error {
        println!("max |H_j - coupling| / |H_0| over j = ±1, ±2: {e:.2e}");
    }
    Ok(())
}
