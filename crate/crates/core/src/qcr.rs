//! Odd-even cyclic reduction for block tridiagonal block-Toeplitz systems
//! `B x_{i−1} + A x_i + C x_{i+1} = b_i`, `i = 1..n`, with dense or HODLR
//! block arithmetic.
//!
//! Right-hand sides and solutions are stored as `m × n` matrices whose
//! column `i` is the `i`-th block.

use faer::{Mat, MatRef};

use crate::block::{reduction_products, Backend, Block, BlockFactor};
use crate::error::{Error, Result};
use crate::hodlr::{HodlrMatrix, TruncationPolicy, DEFAULT_LEAF_SIZE};
use crate::linalg::{self, DenseLu, Matrix, NumericSettings};

#[derive(Clone, Debug)]
pub struct BlockTridToeplitzSystem<B = Matrix> {
    /// Sub-diagonal block.
    pub b: B,
    /// Diagonal block.
    pub a: B,
    /// Super-diagonal block.
    pub c: B,
    /// `m × n`, one column per block.
    pub rhs: Matrix,
}

impl<B: Block> BlockTridToeplitzSystem<B> {
    pub fn block_size(&self) -> usize {
        self.a.order()
    }

    pub fn block_count(&self) -> usize {
        self.rhs.ncols()
    }
}

impl BlockTridToeplitzSystem<Matrix> {
    pub fn new(b: Matrix, a: Matrix, c: Matrix, rhs: Matrix) -> Result<Self> {
        let m = a.nrows();
        for (name, x) in [("B", &b), ("A", &a), ("C", &c)] {
            if x.nrows() != m || x.ncols() != m {
                return Err(Error::ShapeMismatch(format!(
                    "block {name} is {}x{}, expected {m}x{m}",
                    x.nrows(),
                    x.ncols()
                )));
            }
            linalg::check_finite(x.as_ref())?;
        }
        if rhs.nrows() != m || rhs.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "right-hand side is {}x{}, expected {m} rows and at least one block",
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        linalg::check_finite(rhs.as_ref())?;
        Ok(BlockTridToeplitzSystem { b, a, c, rhs })
    }

    pub fn to_hodlr(&self, policy: &TruncationPolicy, leaf_size: usize) -> BlockTridToeplitzSystem<HodlrMatrix> {
        let h = |x: &Matrix| HodlrMatrix::from_dense(x.as_ref(), policy, leaf_size);
        BlockTridToeplitzSystem {
            b: h(&self.b),
            a: h(&self.a),
            c: h(&self.c),
            rhs: self.rhs.clone(),
        }
    }

    /// The assembled `nm × nm` matrix.
    pub fn to_dense(&self) -> Matrix {
        let (m, n) = (self.block_size(), self.block_count());
        let mut out = Mat::zeros(n * m, n * m);
        for i in 0..n {
            out.as_mut().submatrix_mut(i * m, i * m, m, m).copy_from(&self.a);
            if i > 0 {
                out.as_mut().submatrix_mut(i * m, (i - 1) * m, m, m).copy_from(&self.b);
            }
            if i + 1 < n {
                out.as_mut().submatrix_mut(i * m, (i + 1) * m, m, m).copy_from(&self.c);
            }
        }
        out
    }

    /// `𝒜 X`, block column by block column.
    pub fn apply(&self, x: MatRef<'_, f64>) -> Matrix {
        apply_trid(&self.b, &self.a, &self.c, x)
    }

    /// `‖𝒜X − b‖₂ / (ν‖X‖₂ + ‖b‖₂)` with `ν = ‖A‖₂ + ‖B‖₂ + ‖C‖₂ ≥ ‖𝒜‖₂`.
    pub fn relative_residual(&self, x: MatRef<'_, f64>) -> f64 {
        let r = &self.apply(x) - &self.rhs;
        let nu: f64 = [&self.a, &self.b, &self.c].iter().map(|b| b.norm2_estimate()).sum();
        r.norm_l2() / (nu * x.norm_l2() + self.rhs.norm_l2()).max(f64::MIN_POSITIVE)
    }
}

fn apply_trid(b: &Matrix, a: &Matrix, c: &Matrix, x: MatRef<'_, f64>) -> Matrix {
    let n = x.ncols();
    let mut y = a * x;
    if n > 1 {
        let lo = b * x.subcols(0, n - 1);
        let hi = c * x.subcols(1, n - 1);
        let mut tail = y.as_mut().subcols_mut(1, n - 1);
        tail += &lo;
        let mut head = y.as_mut().subcols_mut(0, n - 1);
        head += &hi;
    }
    y
}

/// Data kept by [`reduce_step`] for [`back_substitute`].
pub struct BackData<B: Block> {
    pub factor: B::Factor,
    pub b: B,
    pub c: B,
}

fn select_cols(x: MatRef<'_, f64>, start: usize, count: usize) -> Matrix {
    Mat::from_fn(x.nrows(), count, |i, j| x[(i, start + 2 * j)])
}

/// One odd-even reduction step: eliminates the odd-numbered (1-based) blocks.
/// Requires an odd block count `n ≥ 3`.
pub fn reduce_step<B: Block>(
    sys: &BlockTridToeplitzSystem<B>,
    policy: &TruncationPolicy,
    settings: &NumericSettings,
) -> Result<(BlockTridToeplitzSystem<B>, BackData<B>)> {
    let n = sys.block_count();
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::UnsupportedSize { n });
    }
    let k = (n - 1) / 2;
    let red = reduction_products(&sys.b, &sys.a, &sys.c, policy, settings)?;
    // Z_j = A⁻¹ b_{2j+1} (1-based odd blocks)
    let z = red.factor.solve_dense(select_cols(sys.rhs.as_ref(), 0, k + 1).as_ref());
    let bz = sys.b.mul_dense(z.as_ref());
    let cz = sys.c.mul_dense(z.as_ref());
    let rhs = Mat::from_fn(sys.block_size(), k, |r, i| {
        sys.rhs[(r, 2 * i + 1)] - bz[(r, i)] - cz[(r, i + 1)]
    });
    // A − BA⁻¹C − CA⁻¹B, −BA⁻¹B, −CA⁻¹C
    let a = sys
        .a
        .add_scaled(&red.minus_plus, -1.0, policy)?
        .add_scaled(&red.plus_minus, -1.0, policy)?;
    let inner = BlockTridToeplitzSystem {
        b: red.minus_minus.scale(-1.0),
        a,
        c: red.plus_plus.scale(-1.0),
        rhs,
    };
    let back = BackData {
        factor: red.factor,
        b: sys.b.clone(),
        c: sys.c.clone(),
    };
    Ok((inner, back))
}

/// Recovers the odd-numbered (1-based) blocks from the even ones:
/// `x_i = A⁻¹(b_i − B x_{i−1} − C x_{i+1})` with absent neighbours dropped.
pub fn back_substitute<B: Block>(back: &BackData<B>, x_even: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Matrix {
    let k = x_even.ncols();
    assert_eq!(b.ncols(), 2 * k + 1, "block count mismatch");
    let m = b.nrows();
    let bx = back.b.mul_dense(x_even);
    let cx = back.c.mul_dense(x_even);
    let t = Mat::from_fn(m, k + 1, |r, j| {
        let mut v = b[(r, 2 * j)];
        if j >= 1 {
            v -= bx[(r, j - 1)];
        }
        if j < k {
            v -= cx[(r, j)];
        }
        v
    });
    back.factor.solve_dense(t.as_ref())
}

fn interleave(x_odd: &Matrix, x_even: &Matrix) -> Matrix {
    let n = x_odd.ncols() + x_even.ncols();
    Mat::from_fn(x_odd.nrows(), n, |r, i| {
        if i % 2 == 0 {
            x_odd[(r, i / 2)]
        } else {
            x_even[(r, i / 2)]
        }
    })
}

/// Whether `n = 2^k − 1` for some `k ≥ 1`.
pub fn is_fast_size(n: usize) -> bool {
    n >= 1 && (n + 1).is_power_of_two()
}

#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub levels: usize,
    /// Largest off-diagonal rank among the diagonal blocks `A^(h)`.
    pub max_offdiag_rank: usize,
}

fn solve_recursive<B: Block>(
    sys: BlockTridToeplitzSystem<B>,
    policy: &TruncationPolicy,
    settings: &NumericSettings,
    stats: &mut SolveStats,
) -> Result<Matrix> {
    let level = stats.levels;
    if let Some(r) = sys.a.stored_offdiag_rank() {
        stats.max_offdiag_rank = stats.max_offdiag_rank.max(r);
    }
    if sys.block_count() == 1 {
        let f = sys.a.factor(policy, settings).map_err(|e| e.at_step(level))?;
        return Ok(f.solve_dense(sys.rhs.as_ref()));
    }
    let (inner, back) = reduce_step(&sys, policy, settings).map_err(|e| e.at_step(level))?;
    stats.levels += 1;
    let x_even = solve_recursive(inner, policy, settings, stats)?;
    let x_odd = back_substitute(&back, x_even.as_ref(), sys.rhs.as_ref());
    Ok(interleave(&x_odd, &x_even))
}

/// Dense block LU (block Thomas algorithm) for any `n`.
pub fn solve_dense_block_lu(sys: &BlockTridToeplitzSystem, settings: &NumericSettings) -> Result<Matrix> {
    let (m, n) = (sys.block_size(), sys.block_count());
    let mut factors: Vec<DenseLu> = Vec::with_capacity(n);
    let mut y = Mat::zeros(m, n);
    let mut d = sys.a.clone();
    let mut yi = sys.rhs.as_ref().subcols(0, 1).to_owned();
    for i in 0..n {
        if i > 0 {
            let prev = &factors[i - 1];
            let dc = prev.solve(sys.c.as_ref());
            d = &sys.a - &sys.b * &dc;
            let py = prev.solve(y.as_ref().subcols(i - 1, 1));
            yi = sys.rhs.as_ref().subcols(i, 1) - &sys.b * &py;
        }
        factors.push(DenseLu::new(d.as_ref(), settings).map_err(|e| e.at_step(i))?);
        y.as_mut().subcols_mut(i, 1).copy_from(&yi);
    }
    let mut x = Mat::zeros(m, n);
    for i in (0..n).rev() {
        let mut r = y.as_ref().subcols(i, 1).to_owned();
        if i + 1 < n {
            r -= &sys.c * x.as_ref().subcols(i + 1, 1);
        }
        let xi = factors[i].solve(r.as_ref());
        x.as_mut().subcols_mut(i, 1).copy_from(&xi);
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct QcrOptions {
    pub backend: Backend,
    pub policy: TruncationPolicy,
    pub leaf_size: usize,
    pub settings: NumericSettings,
    /// Use the dense block LU when `n ≠ 2^k − 1`.
    pub allow_fallback: bool,
    /// Residual tolerance; defaults to `1e-10` (dense) or `100·rel_tol` (HODLR).
    pub tol_res: Option<f64>,
}

impl Default for QcrOptions {
    fn default() -> Self {
        QcrOptions {
            backend: Backend::Hodlr,
            policy: TruncationPolicy::default(),
            leaf_size: DEFAULT_LEAF_SIZE,
            settings: NumericSettings::default(),
            allow_fallback: true,
            tol_res: None,
        }
    }
}

impl QcrOptions {
    pub fn dense() -> Self {
        QcrOptions {
            backend: Backend::Dense,
            ..Default::default()
        }
    }

    pub fn residual_tolerance(&self) -> f64 {
        self.tol_res.unwrap_or(match self.backend {
            Backend::Dense => 1e-10,
            Backend::Hodlr => (100.0 * self.policy.rel_tol).max(1e-14),
        })
    }
}

#[derive(Clone, Debug)]
pub struct QcrSolution {
    /// `m × n`, one column per block.
    pub x: Matrix,
    /// See [`BlockTridToeplitzSystem::relative_residual`].
    pub residual: f64,
    /// Wall time of the solve, excluding the residual check.
    pub solve_seconds: f64,
    pub residual_tol: f64,
    pub used_fallback: bool,
    pub stats: SolveStats,
    pub warnings: Vec<String>,
}

impl QcrSolution {
    pub fn passed(&self) -> bool {
        self.residual <= self.residual_tol
    }
}

pub fn solve(sys: &BlockTridToeplitzSystem, opts: &QcrOptions) -> Result<QcrSolution> {
    let n = sys.block_count();
    let mut warnings = Vec::new();
    let mut stats = SolveStats::default();
    let started = std::time::Instant::now();
    let (x, used_fallback) = if is_fast_size(n) {
        let x = match opts.backend {
            Backend::Dense => solve_recursive(sys.clone(), &opts.policy, &opts.settings, &mut stats)?,
            Backend::Hodlr => {
                opts.policy.validate()?;
                let h = sys.to_hodlr(&opts.policy, opts.leaf_size);
                solve_recursive(h, &opts.policy, &opts.settings, &mut stats)?
            }
        };
        (x, false)
    } else if opts.allow_fallback {
        warnings.push(format!(
            "block count {n} is not of the form 2^k - 1; using dense block LU"
        ));
        (solve_dense_block_lu(sys, &opts.settings)?, true)
    } else {
        return Err(Error::UnsupportedSize { n });
    };
    let solve_seconds = started.elapsed().as_secs_f64();
    let residual = sys.relative_residual(x.as_ref());
    Ok(QcrSolution {
        x,
        residual,
        solve_seconds,
        residual_tol: opts.residual_tolerance(),
        used_fallback,
        stats,
        warnings,
    })
}
