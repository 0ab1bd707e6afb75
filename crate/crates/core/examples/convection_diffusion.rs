//! Convection–diffusion on the unit square as a generalized Sylvester
//! equation, solved by QCR and checked against the Kronecker oracle on a
//! small grid.

use qcr::linalg;
use qcr::problems::{cd_problem, DEFAULT_EPS, DEFAULT_SEED};
use qcr::sylvester::{solve_sylvester, unvec, vec, GeneralizedSylvesterProblem, SylvesterOptions};

fn main() -> qcr::Result<()> {
    let small = cd_problem(31, DEFAULT_EPS, DEFAULT_SEED)?;
    let sol = solve_sylvester(&small, &SylvesterOptions::default())?;
    let k = linalg::lu_solve(small.kronecker().as_ref(), vec(small.c.as_ref()).as_ref())?;
    let oracle = unvec(k.as_ref(), small.m(), small.n())?;
    let diff = linalg::norm_fro((&sol.x - &oracle).as_ref()) / linalg::norm_fro(oracle.as_ref());
    println!(
        "n=31: residual {:.2e}, relative difference to Kronecker LU {diff:.2e}",
        sol.residual
    );

    // Round trip through the text format read by `qcr sylvester --input`.
    let mut text = Vec::new();
    small.write_text(&mut text)?;
    let back = GeneralizedSylvesterProblem::read_text(text.as_slice())?;
    println!("text format: {} bytes, {} terms", text.len(), back.terms.len());

    println!("\nsize seconds residual");
    for n in [127, 255, 511] {
        let p = cd_problem(n, DEFAULT_EPS, DEFAULT_SEED)?;
        let sol = solve_sylvester(&p, &SylvesterOptions::default())?;
        println!("{n} {:.4} {:.2e}", sol.qcr.solve_seconds, sol.residual);
    }
    Ok(())
}
