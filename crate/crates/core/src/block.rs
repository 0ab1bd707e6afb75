//! Block arithmetic shared by cyclic reduction and the block tridiagonal solver.
//!
//! Both algorithms only need a handful of operations on square blocks; the
//! [`Block`] trait abstracts them so the same code runs on dense matrices and
//! on [`HodlrMatrix`] values.

use faer::MatRef;

use crate::error::{Error, Result};
use crate::hodlr::{self, HodlrLu, HodlrMatrix, OffDiagBlock, Side, TruncationPolicy};
use crate::linalg::{DenseLu, Matrix, NumericSettings};

/// Factorization of a block, able to apply its inverse.
pub trait BlockFactor<B> {
    fn solve(&self, rhs: &B, policy: &TruncationPolicy) -> B;
    fn solve_dense(&self, rhs: MatRef<'_, f64>) -> Matrix;
}

pub trait Block: Clone + Send + Sync + Sized {
    type Factor: BlockFactor<Self> + Send + Sync;

    fn order(&self) -> usize;
    fn to_dense(&self) -> Matrix;
    /// Zero block with the same structure as `self`.
    fn zeros_like(&self) -> Self;
    /// `self + alpha · other`.
    fn add_scaled(&self, other: &Self, alpha: f64, policy: &TruncationPolicy) -> Result<Self>;
    fn scale(&self, s: f64) -> Self;
    fn matmul(&self, other: &Self, policy: &TruncationPolicy) -> Result<Self>;
    fn mul_dense(&self, x: MatRef<'_, f64>) -> Matrix;
    fn factor(&self, policy: &TruncationPolicy, settings: &NumericSettings) -> Result<Self::Factor>;
    fn norm2_estimate(&self) -> f64;
    /// Largest rank among off-diagonal blocks (numerical rank for dense blocks).
    fn max_offdiag_rank(&self) -> usize;
    /// Off-diagonal rank held in storage; `None` for unstructured blocks.
    fn stored_offdiag_rank(&self) -> Option<usize> {
        None
    }
}

impl BlockFactor<Matrix> for DenseLu {
    fn solve(&self, rhs: &Matrix, _policy: &TruncationPolicy) -> Matrix {
        DenseLu::solve(self, rhs.as_ref())
    }

    fn solve_dense(&self, rhs: MatRef<'_, f64>) -> Matrix {
        DenseLu::solve(self, rhs)
    }
}

impl Block for Matrix {
    type Factor = DenseLu;

    fn order(&self) -> usize {
        self.nrows()
    }

    fn to_dense(&self) -> Matrix {
        self.clone()
    }

    fn zeros_like(&self) -> Self {
        Matrix::zeros(self.nrows(), self.ncols())
    }

    fn add_scaled(&self, other: &Self, alpha: f64, _policy: &TruncationPolicy) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(self + alpha * other)
    }

    fn scale(&self, s: f64) -> Self {
        s * self
    }

    fn matmul(&self, other: &Self, _policy: &TruncationPolicy) -> Result<Self> {
        if self.ncols() != other.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} times {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(self * other)
    }

    fn mul_dense(&self, x: MatRef<'_, f64>) -> Matrix {
        self * x
    }

    fn factor(&self, _policy: &TruncationPolicy, settings: &NumericSettings) -> Result<DenseLu> {
        DenseLu::new(self.as_ref(), settings)
    }

    fn norm2_estimate(&self) -> f64 {
        hodlr::norm2_power(self.nrows(), |x| self * x, |x| self.transpose() * x)
    }

    fn max_offdiag_rank(&self) -> usize {
        if self.nrows() < 2 {
            return 0;
        }
        let policy = TruncationPolicy::relative(1e-12);
        [Side::Upper, Side::Lower]
            .into_iter()
            .map(|side| {
                let block = OffDiagBlock {
                    side,
                    ..Default::default()
                };
                hodlr::offdiag_singular_values(self.as_ref(), &block)
                    .map(|s| policy.keep(&s))
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }
}

impl BlockFactor<HodlrMatrix> for HodlrLu {
    fn solve(&self, rhs: &HodlrMatrix, policy: &TruncationPolicy) -> HodlrMatrix {
        HodlrLu::solve(self, rhs, policy)
    }

    fn solve_dense(&self, rhs: MatRef<'_, f64>) -> Matrix {
        HodlrLu::solve_dense(self, rhs)
    }
}

impl Block for HodlrMatrix {
    type Factor = HodlrLu;

    fn order(&self) -> usize {
        HodlrMatrix::order(self)
    }

    fn to_dense(&self) -> Matrix {
        HodlrMatrix::to_dense(self)
    }

    fn zeros_like(&self) -> Self {
        HodlrMatrix::zeros(self.order(), self.leaf_size())
    }

    fn add_scaled(&self, other: &Self, alpha: f64, policy: &TruncationPolicy) -> Result<Self> {
        HodlrMatrix::add_scaled(self, other, alpha, policy)
    }

    fn scale(&self, s: f64) -> Self {
        HodlrMatrix::scale(self, s)
    }

    fn matmul(&self, other: &Self, policy: &TruncationPolicy) -> Result<Self> {
        HodlrMatrix::matmul(self, other, policy)
    }

    fn mul_dense(&self, x: MatRef<'_, f64>) -> Matrix {
        HodlrMatrix::mul_dense(self, x)
    }

    fn factor(&self, policy: &TruncationPolicy, settings: &NumericSettings) -> Result<HodlrLu> {
        HodlrMatrix::factor(self, policy, settings)
    }

    fn norm2_estimate(&self) -> f64 {
        HodlrMatrix::norm2_estimate(self)
    }

    fn max_offdiag_rank(&self) -> usize {
        HodlrMatrix::max_offdiag_rank(self)
    }

    fn stored_offdiag_rank(&self) -> Option<usize> {
        Some(HodlrMatrix::max_offdiag_rank(self))
    }
}

/// Which block arithmetic to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Dense,
    #[default]
    Hodlr,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Backend::Dense),
            "hodlr" => Ok(Backend::Hodlr),
            other => Err(Error::Parse(format!(
                "unknown backend `{other}` (expected dense or hodlr)"
            ))),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Dense => "dense",
            Backend::Hodlr => "hodlr",
        })
    }
}

/// The products `A₁A₀⁻¹A₋₁`, `A₋₁A₀⁻¹A₁`, `A₁A₀⁻¹A₁`, `A₋₁A₀⁻¹A₋₁` of one
/// reduction step, together with the factorization of `A₀`.
pub(crate) struct Reduction<B: Block> {
    pub factor: B::Factor,
    pub plus_minus: B,
    pub minus_plus: B,
    pub plus_plus: B,
    pub minus_minus: B,
}

pub(crate) fn reduction_products<B: Block>(
    a_minus: &B,
    a_zero: &B,
    a_plus: &B,
    policy: &TruncationPolicy,
    settings: &NumericSettings,
) -> Result<Reduction<B>> {
    let factor = a_zero.factor(policy, settings)?;
    let y_minus = factor.solve(a_minus, policy);
    let y_plus = factor.solve(a_plus, policy);
    Ok(Reduction {
        plus_minus: a_plus.matmul(&y_minus, policy)?,
        minus_plus: a_minus.matmul(&y_plus, policy)?,
        plus_plus: a_plus.matmul(&y_plus, policy)?,
        minus_minus: a_minus.matmul(&y_minus, policy)?,
        factor,
    })
}
