//! Solve the block tridiagonal block-Toeplitz Poisson system with the dense
//! and HODLR cyclic reduction backends and the dense block LU.

use qcr::block::Backend;
use qcr::linalg::{self, NumericSettings};
use qcr::problems::{poisson_system, DEFAULT_SEED};
use qcr::qcr::{solve, solve_dense_block_lu, QcrOptions};

fn main() -> qcr::Result<()> {
    let size: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(127);
    let sys = poisson_system(size, size, DEFAULT_SEED)?;

    let started = std::time::Instant::now();
    let reference = solve_dense_block_lu(&sys, &NumericSettings::default())?;
    println!("dense block LU   {:>8.4}s", started.elapsed().as_secs_f64());

    for backend in [Backend::Dense, Backend::Hodlr] {
        let opts = QcrOptions {
            backend,
            ..QcrOptions::default()
        };
        let sol = solve(&sys, &opts)?;
        let diff = linalg::norm_fro((&sol.x - &reference).as_ref()) / linalg::norm_fro(reference.as_ref());
        println!(
            "QCR {backend:<5}        {:>8.4}s  residual {:.2e}  vs LU {diff:.2e}  levels {}  max rank {}",
            sol.solve_seconds, sol.residual, sol.stats.levels, sol.stats.max_offdiag_rank
        );
    }

    // n = 10 is not 2^k - 1: the solver falls back to block LU and says so.
    let small = poisson_system(10, 8, DEFAULT_SEED)?;
    let sol = solve(&small, &QcrOptions::default())?;
    println!(
        "n=10: fallback {} ({:?}), residual {:.2e}",
        sol.used_fallback, sol.warnings, sol.residual
    );
    Ok(())
}
