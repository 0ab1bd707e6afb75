//! Time the Poisson n = m solve over a size sweep and fit the exponent.
//! Pass `--contrast` to time the dense block LU as well.

use qcr::cli::{bench_sweep, loglog_slope};
use qcr::problems::DEFAULT_SEED;
use qcr::qcr::QcrOptions;

fn main() -> qcr::Result<()> {
    let contrast = std::env::args().any(|a| a == "--contrast");
    let sizes = [63, 127, 255, 511];
    let rows = bench_sweep(&sizes, DEFAULT_SEED, &QcrOptions::default(), 3, contrast)?;
    println!("size seconds residual dense_seconds");
    for r in &rows {
        println!("{} {:.4} {:.2e} {:?}", r.size, r.seconds, r.residual, r.dense_seconds);
    }
    let x: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    println!("QCR exponent {:.3}", loglog_slope(&x, &t).unwrap());
    if contrast {
        let d: Vec<f64> = rows.iter().filter_map(|r| r.dense_seconds).collect();
        println!("dense block LU exponent {:.3}", loglog_slope(&x, &d).unwrap());
    }
    Ok(())
}
