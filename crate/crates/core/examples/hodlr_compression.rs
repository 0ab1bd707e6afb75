//! Compress a kernel matrix into HODLR form, inspect the off-diagonal ranks
//! and compare the truncation error with the discarded singular values.

use faer::Mat;
use qcr::hodlr::{HodlrMatrix, OffDiagBlock, TruncationPolicy};
use qcr::linalg;

fn main() -> qcr::Result<()> {
    let n = 256;
    // Cauchy-like kernel: smooth away from the diagonal, so every
    // off-diagonal block is numerically low rank.
    let a = Mat::from_fn(n, n, |i, j| {
        if i == j {
            4.0
        } else {
            1.0 / (1.0 + (i as f64 - j as f64).abs())
        }
    });

    for tol in [1e-4, 1e-8, 1e-12] {
        let h = HodlrMatrix::from_dense(a.as_ref(), &TruncationPolicy::relative(tol), 32);
        let err = linalg::norm2((&a - h.to_dense()).as_ref()) / linalg::norm2(a.as_ref());
        println!(
            "rel_tol {tol:e}: max rank {:>2}, relative error {err:.2e}",
            h.max_offdiag_rank()
        );
    }

    let h = HodlrMatrix::from_dense(a.as_ref(), &TruncationPolicy::rank(3), 32);
    println!("\nrank profile with max_rank = 3 (level position rank):");
    h.write_rank_profile(std::io::stdout())?;

    let sigma = qcr::hodlr::offdiag_singular_values(a.as_ref(), &OffDiagBlock::default())?;
    println!("\nlargest off-diagonal block, leading singular values:");
    for (l, s) in sigma.iter().take(8).enumerate() {
        println!("  sigma_{} = {s:.3e}", l + 1);
    }
    Ok(())
}
