//! Dense linear-algebra substrate.
//!
//! Thin layer over `faer`: factor/solve with explicit singularity detection,
//! ordered SVD, thin QR and eigenvalues of matrix pencils with infinite
//! eigenvalues reported separately.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, MatRef};

use crate::error::{Error, Result};

pub use faer::c64;

/// Real dense matrix used for every block in the crate.
pub type Matrix = Mat<f64>;

/// Numeric thresholds shared by the solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericSettings {
    /// A pivot is rejected when `|u_ii| < pivot_factor · u · ‖A‖_∞ · rows`.
    pub pivot_factor: f64,
    /// An eigenvalue `α/β` of a pencil is infinite when `|β| ≤ infinite_tol · |α|`.
    pub infinite_tol: f64,
}

impl Default for NumericSettings {
    fn default() -> Self {
        NumericSettings {
            pivot_factor: 1.0,
            infinite_tol: 1e-13,
        }
    }
}

impl NumericSettings {
    fn pivot_threshold(&self, norm_inf: f64, rows: usize) -> f64 {
        self.pivot_factor * f64::EPSILON * norm_inf * rows as f64
    }
}

pub fn check_finite(a: MatRef<'_, f64>) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !a[(i, j)].is_finite() {
                return Err(Error::DomainError(format!("non-finite entry at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Maximum absolute row sum.
pub fn norm_inf(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_fro(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

/// Spectral norm (largest singular value).
pub fn norm2(a: MatRef<'_, f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    singular_values(a)
        .map(|s| s.first().copied().unwrap_or(0.0))
        .unwrap_or_else(|_| norm_fro(a))
}

pub fn norm2_c(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.singular_values()
        .map(|s| s.first().copied().unwrap_or(0.0))
        .unwrap_or_else(|_| a.norm_l2())
}

/// LU factorization with partial pivoting of a square real matrix.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: PartialPivLu<f64>,
    n: usize,
}

impl DenseLu {
    pub fn new(a: MatRef<'_, f64>, settings: &NumericSettings) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "LU of a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let lu = a.partial_piv_lu();
        let threshold = settings.pivot_threshold(norm_inf(a), n);
        let u = lu.U();
        for i in 0..n {
            let pivot = u[(i, i)].abs();
            if !(pivot > threshold) || !pivot.is_finite() {
                return Err(Error::SingularMatrix { pivot, threshold });
            }
        }
        Ok(DenseLu { lu, n })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: MatRef<'_, f64>) -> Matrix {
        assert_eq!(b.nrows(), self.n, "right-hand side has wrong row count");
        if b.ncols() == 0 || self.n == 0 {
            return Mat::zeros(self.n, b.ncols());
        }
        self.lu.solve(b)
    }

    /// Solves `Aᵀ X = B`.
    pub fn solve_transpose(&self, b: MatRef<'_, f64>) -> Matrix {
        assert_eq!(b.nrows(), self.n, "right-hand side has wrong row count");
        if b.ncols() == 0 || self.n == 0 {
            return Mat::zeros(self.n, b.ncols());
        }
        self.lu.solve_transpose(b)
    }
}

/// Solves `A X = B` by partial-pivoting LU.
pub fn lu_solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Matrix> {
    lu_solve_with(a, b, &NumericSettings::default())
}

pub fn lu_solve_with(a: MatRef<'_, f64>, b: MatRef<'_, f64>, settings: &NumericSettings) -> Result<Matrix> {
    if b.nrows() != a.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "rhs has {} rows, matrix has {}",
            b.nrows(),
            a.nrows()
        )));
    }
    Ok(DenseLu::new(a, settings)?.solve(b))
}

/// Inverse of a complex square matrix, used for sampling `φ(z)⁻¹`.
pub fn inverse_c(a: MatRef<'_, c64>, settings: &NumericSettings) -> Result<Mat<c64>> {
    let n = a.nrows();
    let lu = a.partial_piv_lu();
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let threshold = settings.pivot_threshold(norm, n);
    let u = lu.U();
    for i in 0..n {
        let pivot = u[(i, i)].norm();
        if !(pivot > threshold) {
            return Err(Error::SingularMatrix { pivot, threshold });
        }
    }
    Ok(lu.solve(Mat::<c64>::identity(n, n)))
}

/// Thin SVD `A = U diag(S) Vᵀ` with `S` nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

pub fn svd(a: MatRef<'_, f64>) -> Result<Svd> {
    let (r, c) = (a.nrows(), a.ncols());
    let k = r.min(c);
    if k == 0 {
        return Ok(Svd {
            u: Mat::zeros(r, 0),
            s: Vec::new(),
            v: Mat::zeros(c, 0),
        });
    }
    let dec = a
        .thin_svd()
        .map_err(|e| Error::ConvergenceFailure(format!("svd: {e:?}")))?;
    let s: Vec<f64> = (0..k).map(|i| dec.S().column_vector()[i]).collect();
    if s.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::ConvergenceFailure(
            "svd returned unordered singular values".into(),
        ));
    }
    Ok(Svd {
        u: dec.U().to_owned(),
        s,
        v: dec.V().to_owned(),
    })
}

pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::ConvergenceFailure(format!("singular values: {e:?}")))?;
    if s.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::ConvergenceFailure("unordered singular values".into()));
    }
    Ok(s)
}

/// Thin QR: `A = Q R` with `Q` of size rows × min(rows, cols).
pub fn qr_thin(a: MatRef<'_, f64>) -> (Matrix, Matrix) {
    let (r, c) = (a.nrows(), a.ncols());
    if r == 0 || c == 0 {
        let k = r.min(c);
        return (Mat::zeros(r, k), Mat::zeros(k, c));
    }
    let qr = a.qr();
    (qr.compute_thin_Q(), qr.thin_R().to_owned())
}

/// An eigenvalue of a pencil; `Infinite` stands for `β = 0` in the `(α, β)` form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Eigenvalue {
    Finite(c64),
    Infinite,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        match self {
            Eigenvalue::Finite(z) => z.norm(),
            Eigenvalue::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<c64> {
        match self {
            Eigenvalue::Finite(z) => Some(*z),
            Eigenvalue::Infinite => None,
        }
    }
}

/// All eigenvalues `λ` of the pencil `M − λN`.
pub fn generalized_eigvals(m: MatRef<'_, f64>, n: MatRef<'_, f64>) -> Result<Vec<Eigenvalue>> {
    generalized_eigvals_with(m, n, &NumericSettings::default())
}

pub fn generalized_eigvals_with(
    m: MatRef<'_, f64>,
    n: MatRef<'_, f64>,
    settings: &NumericSettings,
) -> Result<Vec<Eigenvalue>> {
    let size = m.nrows();
    if m.ncols() != size || n.nrows() != size || n.ncols() != size {
        return Err(Error::ShapeMismatch(
            "pencil matrices must be square and equal size".into(),
        ));
    }
    if size == 0 {
        return Ok(Vec::new());
    }
    // θ = 1/(λ − σ) are the eigenvalues of (M − σN)⁻¹N; λ = ∞ maps to θ = 0
    let mut last_err = None;
    for sigma in [1.0, -1.0, 0.5, -2.0, 3.0, -0.25, 0.125, 7.0] {
        let shifted = m - sigma * n;
        let lu = match DenseLu::new(shifted.as_ref(), settings) {
            Ok(lu) => lu,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let k = lu.solve(n);
        let scale = norm_fro(k.as_ref());
        let theta = eigvals(k.as_ref())?;
        return Ok(theta
            .into_iter()
            .map(|th| {
                if th.norm() <= settings.infinite_tol * scale {
                    Eigenvalue::Infinite
                } else {
                    Eigenvalue::Finite(c64::new(sigma, 0.0) + th.inv())
                }
            })
            .collect());
    }
    Err(last_err.unwrap_or_else(|| Error::ConvergenceFailure("no regular shift for the pencil".into())))
}

pub fn eigvals(a: MatRef<'_, f64>) -> Result<Vec<c64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.eigenvalues()
        .map_err(|e| Error::ConvergenceFailure(format!("eigenvalues: {e:?}")))
}

pub fn spectral_radius(a: MatRef<'_, f64>) -> Result<f64> {
    Ok(eigvals(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Condition number of the eigenvector matrix of `a`, columns scaled to unit norm.
pub fn eigvec_condition(a: MatRef<'_, f64>) -> Result<f64> {
    let n = a.nrows();
    if n == 0 {
        return Ok(1.0);
    }
    let dec = a
        .eigen()
        .map_err(|e| Error::ConvergenceFailure(format!("eigendecomposition: {e:?}")))?;
    let mut v = dec.U().to_owned();
    for j in 0..n {
        let nrm = v.as_ref().col(j).norm_l2();
        if nrm > 0.0 {
            for i in 0..n {
                v[(i, j)] /= c64::new(nrm, 0.0);
            }
        }
    }
    let s = v
        .singular_values()
        .map_err(|e| Error::ConvergenceFailure(format!("eigenvector svd: {e:?}")))?;
    let smin = s.last().copied().unwrap_or(0.0);
    if smin == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(s[0] / smin)
}

/// Companion pencil `([[0, I], [−A₋₁, −A₀]], diag(I, A₁))` of `A₋₁ + λA₀ + λ²A₁`.
pub fn companion_pencil(
    a_minus: MatRef<'_, f64>,
    a_zero: MatRef<'_, f64>,
    a_plus: MatRef<'_, f64>,
) -> (Matrix, Matrix) {
    let m = a_zero.nrows();
    let mut big_m = Mat::<f64>::zeros(2 * m, 2 * m);
    let mut big_n = Mat::<f64>::zeros(2 * m, 2 * m);
    for i in 0..m {
        big_m[(i, m + i)] = 1.0;
        big_n[(i, i)] = 1.0;
        for j in 0..m {
            big_m[(m + i, j)] = -a_minus[(i, j)];
            big_m[(m + i, m + j)] = -a_zero[(i, j)];
            big_n[(m + i, m + j)] = a_plus[(i, j)];
        }
    }
    (big_m, big_n)
}

pub fn hcat(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Matrix {
    debug_assert_eq!(a.nrows(), b.nrows());
    let (r, ca) = (a.nrows(), a.ncols());
    Mat::from_fn(
        r,
        ca + b.ncols(),
        |i, j| if j < ca { a[(i, j)] } else { b[(i, j - ca)] },
    )
}

pub fn vcat(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Matrix {
    debug_assert_eq!(a.ncols(), b.ncols());
    let ra = a.nrows();
    Mat::from_fn(ra + b.nrows(), a.ncols(), |i, j| {
        if i < ra {
            a[(i, j)]
        } else {
            b[(i - ra, j)]
        }
    })
}

pub fn to_complex(a: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

pub fn tridiagonal(n: usize, sub: f64, diag: f64, sup: f64) -> Matrix {
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else if i == j + 1 {
            sub
        } else if j == i + 1 {
            sup
        } else {
            0.0
        }
    })
}

/// One matrix row per line, entries in `{:e}` form separated by spaces.
pub fn write_dense<W: std::io::Write>(w: &mut W, x: MatRef<'_, f64>) -> std::io::Result<()> {
    use std::fmt::Write as _;
    let mut line = String::new();
    for i in 0..x.nrows() {
        line.clear();
        for j in 0..x.ncols() {
            if j > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{:e}", x[(i, j)]);
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(a: MatRef<'_, f64>) -> f64 {
        a.norm_max()
    }

    #[test]
    fn lu_identity_returns_rhs() {
        let a = Mat::<f64>::identity(3, 3);
        let b = Mat::from_fn(3, 2, |i, j| (i * 2 + j) as f64 - 1.5);
        let x = lu_solve(a.as_ref(), b.as_ref()).unwrap();
        assert!(max_abs((&x - &b).as_ref()) == 0.0);
    }

    #[test]
    fn lu_two_by_two() {
        let a = tridiagonal(2, -1.0, 4.0, -1.0);
        let b = Mat::from_fn(2, 1, |_, _| 1.0);
        let x = lu_solve(a.as_ref(), b.as_ref()).unwrap();
        assert!((x[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((x[(1, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lu_singular_is_reported() {
        let mut a = Mat::<f64>::zeros(2, 2);
        a[(0, 0)] = 1.0;
        let b = Mat::<f64>::zeros(2, 1);
        assert!(matches!(
            lu_solve(a.as_ref(), b.as_ref()),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn lu_shape_mismatch() {
        let a = Mat::<f64>::identity(3, 3);
        let b = Mat::<f64>::zeros(2, 1);
        assert!(matches!(lu_solve(a.as_ref(), b.as_ref()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn svd_zero_diag_and_rank_one() {
        let z = Mat::<f64>::zeros(3, 2);
        assert_eq!(svd(z.as_ref()).unwrap().s, vec![0.0, 0.0]);

        let mut d = Mat::<f64>::zeros(2, 2);
        d[(0, 0)] = 3.0;
        d[(1, 1)] = 1.0;
        let dec = svd(d.as_ref()).unwrap();
        assert!((dec.s[0] - 3.0).abs() < 1e-14 && (dec.s[1] - 1.0).abs() < 1e-14);
        for i in 0..2 {
            assert!((dec.u[(i, i)].abs() - 1.0).abs() < 1e-14);
            assert!((dec.v[(i, i)].abs() - 1.0).abs() < 1e-14);
        }

        let ones = Mat::from_fn(2, 2, |_, _| 1.0);
        let s = svd(ones.as_ref()).unwrap().s;
        assert!((s[0] - 2.0).abs() < 1e-14 && s[1].abs() < 1e-14);
    }

    #[test]
    fn pencil_eigenvalues() {
        let mut m = Mat::<f64>::zeros(2, 2);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 2.0;
        let id = Mat::<f64>::identity(2, 2);
        let mut ev: Vec<f64> = generalized_eigvals(m.as_ref(), id.as_ref())
            .unwrap()
            .iter()
            .map(|e| e.finite().unwrap().re)
            .collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);

        let mut n = Mat::<f64>::zeros(2, 2);
        n[(0, 0)] = 1.0;
        let ev = generalized_eigvals(id.as_ref(), n.as_ref()).unwrap();
        let inf = ev.iter().filter(|e| matches!(e, Eigenvalue::Infinite)).count();
        assert_eq!(inf, 1);
        let fin: Vec<_> = ev.iter().filter_map(|e| e.finite()).collect();
        assert!((fin[0].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn companion_of_scalar_quadratic() {
        let (a, b, c) = (
            Mat::from_fn(1, 1, |_, _| -1.0),
            Mat::from_fn(1, 1, |_, _| 4.0),
            Mat::from_fn(1, 1, |_, _| -1.0),
        );
        let (pm, pn) = companion_pencil(a.as_ref(), b.as_ref(), c.as_ref());
        let mut ev: Vec<f64> = generalized_eigvals(pm.as_ref(), pn.as_ref())
            .unwrap()
            .iter()
            .map(|e| e.finite().unwrap().re)
            .collect();
        ev.sort_by(f64::total_cmp);
        let s3 = 3f64.sqrt();
        assert!(((ev[0] - (2.0 - s3)) / (2.0 - s3)).abs() < 1e-12);
        assert!(((ev[1] - (2.0 + s3)) / (2.0 + s3)).abs() < 1e-12);
    }

    #[test]
    fn eigvec_condition_of_normal_matrix_is_one() {
        let a = tridiagonal(6, -1.0, 2.0, -1.0);
        let k = eigvec_condition(a.as_ref()).unwrap();
        assert!((k - 1.0).abs() < 1e-8, "{k}");
    }
}
