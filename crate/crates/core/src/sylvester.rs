//! Generalized Sylvester equations `Σ A_i X B_i = C` with tridiagonal Toeplitz
//! right factors, solved as the block tridiagonal block-Toeplitz system
//! `(Σ B_iᵀ ⊗ A_i) vec(X) = vec(C)`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::qcr::{self, BlockTridToeplitzSystem, QcrOptions, QcrSolution};

/// Column-stacking `vec(X)` as an `mn × 1` matrix.
pub fn vec(x: MatRef<'_, f64>) -> Matrix {
    let m = x.nrows();
    Mat::from_fn(m * x.ncols(), 1, |k, _| x[(k % m, k / m)])
}

/// Inverse of [`vec`].
pub fn unvec(x: MatRef<'_, f64>, m: usize, n: usize) -> Result<Matrix> {
    if x.ncols() != 1 || x.nrows() != m * n {
        return Err(Error::ShapeMismatch(format!(
            "cannot reshape {}x{} into {m}x{n}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(Mat::from_fn(m, n, |i, j| x[(j * m + i, 0)]))
}

/// Tridiagonal Toeplitz matrix given by (sub-diagonal, diagonal, super-diagonal).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToeplitzTriple {
    pub minus: f64,
    pub zero: f64,
    pub plus: f64,
}

impl ToeplitzTriple {
    pub const IDENTITY: ToeplitzTriple = ToeplitzTriple {
        minus: 0.0,
        zero: 1.0,
        plus: 0.0,
    };

    pub fn new(minus: f64, zero: f64, plus: f64) -> Self {
        ToeplitzTriple { minus, zero, plus }
    }

    pub fn to_dense(&self, n: usize) -> Matrix {
        linalg::tridiagonal(n, self.minus, self.zero, self.plus)
    }

    /// Reads the triple off a dense matrix, checking it is tridiagonal Toeplitz.
    pub fn from_dense(b: MatRef<'_, f64>) -> Result<Self> {
        let n = b.nrows();
        if b.ncols() != n || n == 0 {
            return Err(Error::NotToeplitz(format!("{}x{} is not square", b.nrows(), b.ncols())));
        }
        let t = ToeplitzTriple {
            minus: if n > 1 { b[(1, 0)] } else { 0.0 },
            zero: b[(0, 0)],
            plus: if n > 1 { b[(0, 1)] } else { 0.0 },
        };
        for i in 0..n {
            for j in 0..n {
                let expect = match j as isize - i as isize {
                    0 => t.zero,
                    1 => t.plus,
                    -1 => t.minus,
                    _ => 0.0,
                };
                if b[(i, j)] != expect {
                    return Err(Error::NotToeplitz(format!(
                        "entry ({i}, {j}) is {} but {expect} is required",
                        b[(i, j)]
                    )));
                }
            }
        }
        Ok(t)
    }

    /// `X B` for `B` of order `X.ncols()`.
    pub fn right_apply(&self, x: MatRef<'_, f64>) -> Matrix {
        let n = x.ncols();
        Mat::from_fn(x.nrows(), n, |i, j| {
            let mut v = self.zero * x[(i, j)];
            if j > 0 {
                v += self.plus * x[(i, j - 1)];
            }
            if j + 1 < n {
                v += self.minus * x[(i, j + 1)];
            }
            v
        })
    }
}

#[derive(Clone, Debug)]
pub struct SylvesterTerm {
    pub a: Matrix,
    pub b: ToeplitzTriple,
}

impl SylvesterTerm {
    /// Term from a dense right factor, rejected unless it is tridiagonal Toeplitz.
    pub fn from_dense(a: Matrix, b: MatRef<'_, f64>) -> Result<Self> {
        Ok(SylvesterTerm {
            a,
            b: ToeplitzTriple::from_dense(b)?,
        })
    }
}

/// `Σ A_i X B_i = C` with `A_i` of order `m`, `B_i` of order `n`.
#[derive(Clone, Debug)]
pub struct GeneralizedSylvesterProblem {
    pub terms: Vec<SylvesterTerm>,
    pub c: Matrix,
}

impl GeneralizedSylvesterProblem {
    pub fn new(terms: Vec<SylvesterTerm>, c: Matrix) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::ShapeMismatch("at least one term is required".into()));
        }
        let m = c.nrows();
        for (i, t) in terms.iter().enumerate() {
            if t.a.nrows() != m || t.a.ncols() != m {
                return Err(Error::ShapeMismatch(format!(
                    "A_{} is {}x{}, expected {m}x{m}",
                    i + 1,
                    t.a.nrows(),
                    t.a.ncols()
                )));
            }
            linalg::check_finite(t.a.as_ref())?;
        }
        linalg::check_finite(c.as_ref())?;
        Ok(GeneralizedSylvesterProblem { terms, c })
    }

    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn n(&self) -> usize {
        self.c.ncols()
    }

    /// `Σ A_i X B_i`.
    pub fn apply(&self, x: MatRef<'_, f64>) -> Matrix {
        let mut out = Mat::zeros(x.nrows(), x.ncols());
        for t in &self.terms {
            out += &t.a * t.b.right_apply(x);
        }
        out
    }

    /// `‖Σ A_i X B_i − C‖_F / ‖C‖_F`.
    pub fn relative_residual(&self, x: MatRef<'_, f64>) -> f64 {
        let r = &self.apply(x) - &self.c;
        r.norm_l2() / self.c.norm_l2().max(f64::MIN_POSITIVE)
    }

    /// `Σ B_iᵀ ⊗ A_i`, densely.
    pub fn kronecker(&self) -> Matrix {
        let (m, n) = (self.m(), self.n());
        let mut w = Mat::zeros(m * n, m * n);
        for t in &self.terms {
            let bt = t.b.to_dense(n);
            for p in 0..n {
                for q in 0..n {
                    let coef = bt[(q, p)];
                    if coef != 0.0 {
                        let mut blk = w.as_mut().submatrix_mut(p * m, q * m, m, m);
                        blk += coef * &t.a;
                    }
                }
            }
        }
        w
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.m(), self.n(), self.terms.len())?;
        for (i, t) in self.terms.iter().enumerate() {
            let mut body = String::new();
            let mut nnz = 0usize;
            for c in 0..t.a.ncols() {
                for r in 0..t.a.nrows() {
                    let v = t.a[(r, c)];
                    if v != 0.0 {
                        nnz += 1;
                        let _ = writeln!(body, "{} {} {:e}", r + 1, c + 1, v);
                    }
                }
            }
            writeln!(w, "A {} {nnz}", i + 1)?;
            w.write_all(body.as_bytes())?;
            writeln!(w, "B {} {:e} {:e} {:e}", i + 1, t.b.minus, t.b.zero, t.b.plus)?;
        }
        writeln!(w, "C")?;
        linalg::write_dense(&mut w, self.c.as_ref())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut tok = Tokens::new(r)?;
        let m = tok.usize()?;
        let n = tok.usize()?;
        let s = tok.usize()?;
        let mut terms = Vec::with_capacity(s);
        for i in 1..=s {
            tok.expect("A")?;
            tok.expect(&i.to_string())?;
            let nnz = tok.usize()?;
            let mut a = Mat::zeros(m, m);
            for _ in 0..nnz {
                let (r, c) = (tok.usize()?, tok.usize()?);
                if r == 0 || c == 0 || r > m || c > m {
                    return Err(Error::Parse(format!("entry ({r}, {c}) outside a {m}x{m} matrix")));
                }
                a[(r - 1, c - 1)] = tok.f64()?;
            }
            tok.expect("B")?;
            tok.expect(&i.to_string())?;
            let b = ToeplitzTriple::new(tok.f64()?, tok.f64()?, tok.f64()?);
            terms.push(SylvesterTerm { a, b });
        }
        tok.expect("C")?;
        let mut c = Mat::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                c[(i, j)] = tok.f64()?;
            }
        }
        GeneralizedSylvesterProblem::new(terms, c)
    }
}

struct Tokens {
    items: std::vec::IntoIter<String>,
}

impl Tokens {
    fn new<R: BufRead>(r: R) -> Result<Self> {
        let mut items = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("");
            items.extend(line.split_whitespace().map(str::to_owned));
        }
        Ok(Tokens {
            items: items.into_iter(),
        })
    }

    fn next(&mut self) -> Result<String> {
        self.items
            .next()
            .ok_or_else(|| Error::Parse("unexpected end of input".into()))
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(Error::Parse(format!("expected `{want}`, found `{got}`")))
        }
    }

    fn usize(&mut self) -> Result<usize> {
        let t = self.next()?;
        t.parse().map_err(|_| Error::Parse(format!("`{t}` is not a count")))
    }

    fn f64(&mut self) -> Result<f64> {
        let t = self.next()?;
        t.parse().map_err(|_| Error::Parse(format!("`{t}` is not a number")))
    }
}

/// Block tridiagonal block-Toeplitz form of the problem: diagonal `Σβ⁰A_i`,
/// sub-diagonal `Σβ⁺A_i`, super-diagonal `Σβ⁻A_i`, right-hand side `vec(C)`.
pub fn assemble(problem: &GeneralizedSylvesterProblem) -> Result<BlockTridToeplitzSystem> {
    let m = problem.m();
    let (mut b, mut a, mut c) = (Mat::zeros(m, m), Mat::zeros(m, m), Mat::zeros(m, m));
    for t in &problem.terms {
        for v in [t.b.minus, t.b.zero, t.b.plus] {
            if !v.is_finite() {
                return Err(Error::NotToeplitz(format!("non-finite coefficient {v}")));
            }
        }
        b += t.b.plus * &t.a;
        a += t.b.zero * &t.a;
        c += t.b.minus * &t.a;
    }
    BlockTridToeplitzSystem::new(b, a, c, problem.c.clone())
}

#[derive(Clone, Debug)]
pub struct SylvesterOptions {
    pub qcr: QcrOptions,
    /// Bound on `‖Σ A_i X B_i − C‖_F / ‖C‖_F`.
    pub tol_res: f64,
}

impl Default for SylvesterOptions {
    fn default() -> Self {
        SylvesterOptions {
            qcr: QcrOptions::default(),
            tol_res: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SylvesterSolution {
    pub x: Matrix,
    /// `‖Σ A_i X B_i − C‖_F / ‖C‖_F`.
    pub residual: f64,
    pub qcr: QcrSolution,
}

pub fn solve_sylvester(problem: &GeneralizedSylvesterProblem, opts: &SylvesterOptions) -> Result<SylvesterSolution> {
    let sys = assemble(problem)?;
    let sol = qcr::solve(&sys, &opts.qcr)?;
    let residual = problem.relative_residual(sol.x.as_ref());
    if !(residual <= opts.tol_res) {
        return Err(Error::ResidualTooLarge {
            what: "Sylvester equation".into(),
            residual,
            tolerance: opts.tol_res,
        });
    }
    Ok(SylvesterSolution {
        x: sol.x.clone(),
        residual,
        qcr: sol,
    })
}

/// First convection component `w₁(x) = 1 + (x+1)²/4`.
pub fn default_convection(x: f64) -> f64 {
    1.0 + (x + 1.0) * (x + 1.0) / 4.0
}

/// Centered finite differences of `−εΔu + w₁(x) ∂ₓu = f` on the interior of
/// the unit square with `n` points per direction and `h = 1/(n+1)`:
/// `(εT₁ + Φ₁B₁) U + U (εT₂) = F`, with `T = h⁻²·trid(−1, 2, −1)`,
/// `B₁ = (2h)⁻¹·trid(−1, 0, 1)` and `Φ₁ = diag(w₁(x_i))`.
pub fn convection_diffusion_setup(
    n: usize,
    eps: f64,
    w: impl Fn(f64) -> f64,
    f: Matrix,
) -> Result<GeneralizedSylvesterProblem> {
    if n < 3 {
        return Err(Error::DomainError(format!("grid size {n} is below 3")));
    }
    if f.nrows() != n || f.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side is {}x{}, expected {n}x{n}",
            f.nrows(),
            f.ncols()
        )));
    }
    let h = 1.0 / (n + 1) as f64;
    let lap = ToeplitzTriple::new(-1.0 / (h * h), 2.0 / (h * h), -1.0 / (h * h));
    let t1 = lap.to_dense(n);
    let b1 = linalg::tridiagonal(n, -1.0 / (2.0 * h), 0.0, 1.0 / (2.0 * h));
    let phi = Mat::from_fn(n, n, |i, j| if i == j { w((i + 1) as f64 * h) } else { 0.0 });
    let a1 = eps * &t1 + &phi * &b1;
    let terms = vec![
        SylvesterTerm {
            a: a1,
            b: ToeplitzTriple::IDENTITY,
        },
        SylvesterTerm {
            a: Mat::identity(n, n),
            b: ToeplitzTriple::new(eps * lap.minus, eps * lap.zero, eps * lap.plus),
        },
    ];
    GeneralizedSylvesterProblem::new(terms, f)
}
