//! Elliptic integrals, the closed-form Zolotarev bound and the greedy
//! rational estimate on two real point sets.

use qcr::decay::{elliptic_k, greedy_rational_estimate, mobius_delta, zolotarev_closed_form};
use qcr::linalg::{c64, Eigenvalue};

fn main() -> qcr::Result<()> {
    for x in [0.1, 0.5, 0.9, 0.999] {
        println!("K({x}) = {:.12}", elliptic_k(x)?);
    }

    println!("\ndelta  rho        rho_tilde  Z_8 bound");
    for delta in [0.5, 0.9, 0.99] {
        let z = zolotarev_closed_form(delta, 4)?;
        println!("{delta:<6} {:.3e}  {:.3e}  {:.3e}", z.rho, z.rho_tilde, z.value);
    }

    // E ⊂ [0.05, 0.9] inside the unit disc, F ⊂ [1.1, 20] outside it.
    let e: Vec<c64> = (0..40).map(|k| c64::new(0.05 + 0.85 * k as f64 / 39.0, 0.0)).collect();
    let f: Vec<Eigenvalue> = (0..40)
        .map(|k| Eigenvalue::Finite(c64::new(1.1 + 18.9 * k as f64 / 39.0, 0.0)))
        .collect();
    let delta = mobius_delta(0.05, 0.9, 1.1, 20.0)?;
    let (_, family) = greedy_rational_estimate(&e, &f, e[e.len() - 1], 8)?;
    println!("\nmapped delta {delta:.4}");
    println!("l  greedy     closed form");
    for l in 0..=8 {
        let closed = zolotarev_closed_form(delta, l / 2)?.value.min(1.0);
        println!("{l}  {:.3e}  {closed:.3e}", family.estimates[l]);
    }
    Ok(())
}
