#![allow(dead_code)]

use faer::linalg::solvers::Solve;
use faer::Mat;
use qcr::cr::LaurentTriple;
use qcr::hodlr::{HodlrMatrix, OffDiagBlock, Side};
use qcr::linalg::{self, c64, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| rng.random::<f64>() - 0.5)
}

/// Random matrix plus `shift·I`, strictly diagonally dominant for `shift > rows/2`.
pub fn shifted(n: usize, shift: f64, seed: u64) -> Matrix {
    let mut a = random(n, n, seed);
    for i in 0..n {
        a[(i, i)] += shift;
    }
    a
}

pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    linalg::norm_fro((a - b).as_ref()) / linalg::norm_fro(b.as_ref()).max(f64::MIN_POSITIVE)
}

pub fn rel_err2(a: &Matrix, b: &Matrix) -> f64 {
    linalg::norm2((a - b).as_ref()) / linalg::norm2(b.as_ref()).max(f64::MIN_POSITIVE)
}

fn orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = Mat::from_fn(rows, cols, |_, _| rng.random::<f64>() - 0.5);
    linalg::qr_thin(g.as_ref()).0
}

/// Matrix whose every off-diagonal block of the HODLR partition with the
/// given leaf size has singular values `profile(k)`, `k = 0, 1, …`, and whose
/// leaves are `shift·I` plus noise.
pub fn planted(n: usize, leaf: usize, profile: impl Fn(usize) -> f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Mat::<f64>::zeros(n, n);
    fn fill(
        a: &mut Matrix,
        start: usize,
        size: usize,
        leaf: usize,
        profile: &dyn Fn(usize) -> f64,
        rng: &mut ChaCha8Rng,
    ) {
        if size <= leaf {
            for i in 0..size {
                for j in 0..size {
                    a[(start + i, start + j)] = rng.random::<f64>() - 0.5 + if i == j { 4.0 } else { 0.0 };
                }
            }
            return;
        }
        let n1 = size / 2;
        let n2 = size - n1;
        for (r0, c0, rows, cols) in [(start, start + n1, n1, n2), (start + n1, start, n2, n1)] {
            let k = rows.min(cols);
            let u = orthonormal(rows, k, rng);
            let v = orthonormal(cols, k, rng);
            for i in 0..rows {
                for j in 0..cols {
                    a[(r0 + i, c0 + j)] = (0..k).map(|t| u[(i, t)] * profile(t) * v[(j, t)]).sum();
                }
            }
        }
        fill(a, start, n1, leaf, profile, rng);
        fill(a, start + n1, n2, leaf, profile, rng);
    }
    fill(&mut a, 0, n, leaf, &profile, &mut rng);
    a
}

/// Largest `σ_{l+1}` over all off-diagonal blocks of the partition of `h`,
/// computed directly on the dense matrix `a`.
pub fn max_block_sigma(a: &Matrix, h: &HodlrMatrix, l: usize) -> f64 {
    h.rank_profile()
        .iter()
        .map(|b| {
            let block = OffDiagBlock {
                level: b.level,
                node: b.position / 2,
                side: if b.position % 2 == 0 { Side::Upper } else { Side::Lower },
            };
            let s = qcr::hodlr::offdiag_singular_values(a.as_ref(), &block).unwrap();
            s.get(l).copied().unwrap_or(0.0)
        })
        .fold(0.0, f64::max)
}

/// `ψ(z) = φ(z)⁻¹` by full-pivoting LU.
pub fn psi_oracle(phi: &LaurentTriple, z: c64) -> Mat<c64> {
    let m = phi.order();
    let zi = c64::new(1.0, 0.0) / z;
    let a = Mat::from_fn(m, m, |i, j| {
        zi * phi.a_minus[(i, j)] + c64::new(phi.a_zero[(i, j)], 0.0) + z * phi.a_plus[(i, j)]
    });
    a.full_piv_lu().solve(Mat::<c64>::identity(m, m))
}

/// `H_j = (1/N) Σ_k ψ(ω^k) ω^{−jk}` with `ω = e^{2πi/N}`, for each `j` in `js`.
pub fn laurent_oracle(phi: &LaurentTriple, js: &[i64], samples: usize) -> Vec<Matrix> {
    let m = phi.order();
    let mut acc: Vec<Mat<c64>> = js.iter().map(|_| Mat::zeros(m, m)).collect();
    for k in 0..samples {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let p = psi_oracle(phi, c64::from_polar(1.0, theta));
        for (a, &j) in acc.iter_mut().zip(js) {
            let w = c64::from_polar(1.0 / samples as f64, -(j as f64) * theta);
            *a += Mat::from_fn(m, m, |r, c| p[(r, c)] * w);
        }
    }
    acc.iter().map(|a| Mat::from_fn(m, m, |r, c| a[(r, c)].re)).collect()
}

/// `∫₀^{π/2} dθ/√(1 − x² sin²θ)` by adaptive Simpson.
pub fn elliptic_k_quadrature(x: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn simpson(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let f = |t: f64| 1.0 / (1.0 - x * x * t.sin().powi(2)).sqrt();
    let (a, b) = (0.0, std::f64::consts::FRAC_PI_2);
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, 1e-14, 50)
}

/// Random block tridiagonal block-Toeplitz system with a diagonally dominant diagonal block.
pub fn dominant_system(n: usize, m: usize, seed: u64) -> qcr::qcr::BlockTridToeplitzSystem {
    let b = random(m, m, seed);
    let c = random(m, m, seed + 1);
    let a = shifted(m, 2.0 * m as f64, seed + 2);
    let rhs = random(m, n, seed + 3);
    qcr::qcr::BlockTridToeplitzSystem::new(b, a, c, rhs).unwrap()
}
