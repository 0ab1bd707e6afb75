//! HODLR (hierarchically off-diagonal low-rank) matrices.
//!
//! A matrix of order `n > leaf_size` is split into diagonal blocks of order
//! `⌊n/2⌋` and `⌈n/2⌉`, which are HODLR themselves, and two off-diagonal blocks
//! stored as `U Vᵀ` with orthonormal `U` (the weights live in `V`). Every
//! operation recompresses the off-diagonal factors at each level through the
//! [`TruncationPolicy`].

use std::io::Write;

use faer::linalg::matmul::matmul;
use faer::prelude::ReborrowMut;
use faer::{Accum, Mat, MatMut, MatRef, Par};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseLu, Matrix, NumericSettings};

pub const DEFAULT_LEAF_SIZE: usize = 32;

/// Rank truncation rule applied to every off-diagonal block.
///
/// Singular values `σ_i` of a block are kept while
/// `σ_i > max(abs_tol, rel_tol · σ_1)` and `i ≤ max_rank`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_rank: Option<usize>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            max_rank: None,
        }
    }
}

impl TruncationPolicy {
    pub fn relative(rel_tol: f64) -> Self {
        TruncationPolicy {
            rel_tol,
            ..Default::default()
        }
    }

    /// Hard rank cap with no tolerance-based dropping.
    pub fn rank(max_rank: usize) -> Self {
        TruncationPolicy {
            rel_tol: 0.0,
            abs_tol: 0.0,
            max_rank: Some(max_rank),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 0.0) || !(self.abs_tol >= 0.0) {
            return Err(Error::DomainError("truncation tolerances must be nonnegative".into()));
        }
        if self.rel_tol == 0.0 && self.abs_tol == 0.0 && self.max_rank.is_none() {
            return Err(Error::DomainError(
                "truncation policy needs a tolerance or a rank cap".into(),
            ));
        }
        Ok(())
    }

    /// Number of leading singular values (given in nonincreasing order) to keep.
    pub fn keep(&self, s: &[f64]) -> usize {
        self.keep_above(s, 0.0)
    }

    /// Like [`keep`](Self::keep), also dropping values at or below `floor`.
    pub fn keep_above(&self, s: &[f64], floor: f64) -> usize {
        let Some(&s1) = s.first() else { return 0 };
        let threshold = self.abs_tol.max(self.rel_tol * s1).max(floor);
        let cap = self.max_rank.unwrap_or(usize::MAX);
        s.iter().take_while(|&&x| x > threshold).count().min(cap)
    }
}

/// Low-rank block `U Vᵀ`; `U` has orthonormal columns after compression.
#[derive(Clone, Debug)]
pub struct LowRank {
    pub u: Matrix,
    pub v: Matrix,
}

impl LowRank {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LowRank {
            u: Mat::zeros(rows, 0),
            v: Mat::zeros(cols, 0),
        }
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn to_dense(&self) -> Matrix {
        if self.rank() == 0 {
            return Mat::zeros(self.rows(), self.cols());
        }
        &self.u * self.v.transpose()
    }

    pub fn from_dense(block: MatRef<'_, f64>, policy: &TruncationPolicy) -> Self {
        // Exactly zero rows and columns do not contribute; sparse blocks stay cheap.
        let rows: Vec<usize> = (0..block.nrows())
            .filter(|&i| (0..block.ncols()).any(|j| block[(i, j)] != 0.0))
            .collect();
        let cols: Vec<usize> = (0..block.ncols())
            .filter(|&j| rows.iter().any(|&i| block[(i, j)] != 0.0))
            .collect();
        if rows.is_empty() {
            return LowRank::zeros(block.nrows(), block.ncols());
        }
        let compact = Mat::from_fn(rows.len(), cols.len(), |i, j| block[(rows[i], cols[j])]);
        let dec = linalg::svd(compact.as_ref()).expect("svd of off-diagonal block");
        let k = policy.keep(&dec.s);
        let mut u = Mat::zeros(block.nrows(), k);
        let mut v = Mat::zeros(block.ncols(), k);
        for c in 0..k {
            for (i, &r) in rows.iter().enumerate() {
                u[(r, c)] = dec.u[(i, c)];
            }
            for (j, &q) in cols.iter().enumerate() {
                v[(q, c)] = dec.v[(j, c)] * dec.s[c];
            }
        }
        LowRank { u, v }
    }

    /// Recompress `U Vᵀ` (arbitrary factors) into normal form under `policy`.
    pub fn compress(u: Matrix, v: Matrix, policy: &TruncationPolicy) -> Self {
        let (rows, cols) = (u.nrows(), v.nrows());
        if u.ncols() == 0 || rows == 0 || cols == 0 {
            return LowRank::zeros(rows, cols);
        }
        let (qu, ru) = linalg::qr_thin(u.as_ref());
        let (qv, rv) = linalg::qr_thin(v.as_ref());
        // Cancellation noise: anything at rounding level of the factor norms.
        let floor = 4.0 * f64::EPSILON * ru.norm_l2() * rv.norm_l2();
        let core = &ru * rv.transpose();
        let dec = linalg::svd(core.as_ref()).expect("svd of recompression core");
        let k = policy.keep_above(&dec.s, floor);
        let u = &qu * dec.u.as_ref().subcols(0, k);
        let vs = Mat::from_fn(dec.v.nrows(), k, |i, j| dec.v[(i, j)] * dec.s[j]);
        let v = &qv * &vs;
        LowRank { u, v }
    }

    /// Singular values of `U Vᵀ`, assuming orthonormal `U`.
    pub fn singular_values(&self) -> Vec<f64> {
        let k = self.rank();
        if k == 0 {
            return Vec::new();
        }
        linalg::singular_values(self.v.as_ref()).unwrap_or_default()
    }

    fn scaled(&self, s: f64) -> Self {
        LowRank {
            u: self.u.clone(),
            v: s * &self.v,
        }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(Matrix),
    Split {
        tl: Box<HodlrMatrix>,
        br: Box<HodlrMatrix>,
        upper: LowRank,
        lower: LowRank,
    },
}

/// Square HODLR matrix.
#[derive(Clone, Debug)]
pub struct HodlrMatrix {
    n: usize,
    leaf_size: usize,
    node: Node,
}

/// Which off-diagonal block of a split node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Side {
    #[default]
    Upper,
    Lower,
}

/// Address of an off-diagonal block: `node` counts the diagonal blocks of the
/// given `level` from the top-left, starting at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OffDiagBlock {
    pub level: usize,
    pub node: usize,
    pub side: Side,
}

impl OffDiagBlock {
    /// Row and column ranges `(row0, rows, col0, cols)` of the block in a
    /// matrix of order `n`, following the `⌊n/2⌋`/`⌈n/2⌉` partition.
    /// `min_split` is the smallest order that is still split.
    pub fn locate(&self, n: usize, min_split: usize) -> Result<(usize, usize, usize, usize)> {
        if self.level >= usize::BITS as usize || self.node >> self.level != 0 {
            return Err(Error::BadBlockIndex(format!(
                "node {} does not exist at level {}",
                self.node, self.level
            )));
        }
        let (mut start, mut size) = (0usize, n);
        for bit in (0..self.level).rev() {
            if size < min_split {
                return Err(Error::BadBlockIndex(format!(
                    "level {} is below the leaves",
                    self.level
                )));
            }
            let n1 = size / 2;
            if (self.node >> bit) & 1 == 0 {
                size = n1;
            } else {
                start += n1;
                size -= n1;
            }
        }
        if size < min_split {
            return Err(Error::BadBlockIndex(format!(
                "block ({}, {}) lies inside a leaf",
                self.level, self.node
            )));
        }
        let n1 = size / 2;
        Ok(match self.side {
            Side::Upper => (start, n1, start + n1, size - n1),
            Side::Lower => (start + n1, size - n1, start, n1),
        })
    }
}

/// Rank of one off-diagonal block, as printed by [`HodlrMatrix::write_rank_profile`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockRank {
    pub level: usize,
    /// `2·node` for the upper block, `2·node + 1` for the lower one.
    pub position: usize,
    pub rank: usize,
}

fn hcat3(a: MatRef<'_, f64>, b: MatRef<'_, f64>, c: MatRef<'_, f64>) -> Matrix {
    linalg::hcat(linalg::hcat(a, b).as_ref(), c)
}

fn lowrank_mul(a: &LowRank, b: &LowRank) -> (Matrix, Matrix) {
    // (Ua Vaᵀ)(Ub Vbᵀ) = (Ua (Vaᵀ Ub)) Vbᵀ
    let inner = a.v.transpose() * &b.u;
    (&a.u * &inner, b.v.clone())
}

impl HodlrMatrix {
    pub fn from_dense(a: MatRef<'_, f64>, policy: &TruncationPolicy, leaf_size: usize) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "HODLR matrices are square");
        let leaf_size = leaf_size.max(1);
        let n = a.nrows();
        if n <= leaf_size {
            return HodlrMatrix {
                n,
                leaf_size,
                node: Node::Leaf(a.to_owned()),
            };
        }
        let n1 = n / 2;
        let n2 = n - n1;
        let tl = HodlrMatrix::from_dense(a.submatrix(0, 0, n1, n1), policy, leaf_size);
        let br = HodlrMatrix::from_dense(a.submatrix(n1, n1, n2, n2), policy, leaf_size);
        let upper = LowRank::from_dense(a.submatrix(0, n1, n1, n2), policy);
        let lower = LowRank::from_dense(a.submatrix(n1, 0, n2, n1), policy);
        HodlrMatrix {
            n,
            leaf_size,
            node: Node::Split {
                tl: Box::new(tl),
                br: Box::new(br),
                upper,
                lower,
            },
        }
    }

    pub fn identity(n: usize, leaf_size: usize) -> Self {
        Self::diagonal(&vec![1.0; n], leaf_size)
    }

    pub fn zeros(n: usize, leaf_size: usize) -> Self {
        Self::diagonal(&vec![0.0; n], leaf_size)
    }

    pub fn diagonal(d: &[f64], leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let n = d.len();
        if n <= leaf_size {
            return HodlrMatrix {
                n,
                leaf_size,
                node: Node::Leaf(Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 })),
            };
        }
        let n1 = n / 2;
        HodlrMatrix {
            n,
            leaf_size,
            node: Node::Split {
                tl: Box::new(Self::diagonal(&d[..n1], leaf_size)),
                br: Box::new(Self::diagonal(&d[n1..], leaf_size)),
                upper: LowRank::zeros(n1, n - n1),
                lower: LowRank::zeros(n - n1, n1),
            },
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    /// Number of levels carrying off-diagonal blocks.
    pub fn depth(&self) -> usize {
        match &self.node {
            Node::Leaf(_) => 0,
            Node::Split { tl, br, .. } => 1 + tl.depth().max(br.depth()),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Mat::zeros(self.n, self.n);
        self.write_dense(out.as_mut());
        out
    }

    fn write_dense(&self, mut out: MatMut<'_, f64>) {
        match &self.node {
            Node::Leaf(d) => out.copy_from(d),
            Node::Split { tl, br, upper, lower } => {
                let n1 = tl.n;
                let n2 = br.n;
                tl.write_dense(out.rb_mut().submatrix_mut(0, 0, n1, n1));
                br.write_dense(out.rb_mut().submatrix_mut(n1, n1, n2, n2));
                out.rb_mut().submatrix_mut(0, n1, n1, n2).copy_from(upper.to_dense());
                out.rb_mut().submatrix_mut(n1, 0, n2, n1).copy_from(lower.to_dense());
            }
        }
    }

    fn congruent(&self, other: &HodlrMatrix) -> Result<()> {
        if self.n != other.n || self.leaf_size != other.leaf_size {
            return Err(Error::ShapeMismatch(format!(
                "HODLR trees differ: order {} leaf {} vs order {} leaf {}",
                self.n, self.leaf_size, other.n, other.leaf_size
            )));
        }
        Ok(())
    }

    /// Re-truncates every off-diagonal block; blocks already within the
    /// policy are returned untouched.
    pub fn truncate(&self, policy: &TruncationPolicy) -> Self {
        let node = match &self.node {
            Node::Leaf(d) => Node::Leaf(d.clone()),
            Node::Split { tl, br, upper, lower } => {
                let retrunc = |b: &LowRank| {
                    let s = b.singular_values();
                    if policy.keep(&s) == b.rank() {
                        b.clone()
                    } else {
                        LowRank::compress(b.u.clone(), b.v.clone(), policy)
                    }
                };
                Node::Split {
                    tl: Box::new(tl.truncate(policy)),
                    br: Box::new(br.truncate(policy)),
                    upper: retrunc(upper),
                    lower: retrunc(lower),
                }
            }
        };
        HodlrMatrix { node, ..*self }
    }

    pub fn scale(&self, s: f64) -> Self {
        let node = match &self.node {
            Node::Leaf(d) => Node::Leaf(s * d),
            Node::Split { tl, br, upper, lower } => Node::Split {
                tl: Box::new(tl.scale(s)),
                br: Box::new(br.scale(s)),
                upper: upper.scaled(s),
                lower: lower.scaled(s),
            },
        };
        HodlrMatrix { node, ..*self }
    }

    pub fn add(&self, other: &HodlrMatrix, policy: &TruncationPolicy) -> Result<Self> {
        self.add_scaled(other, 1.0, policy)
    }

    /// `self + alpha · other`.
    pub fn add_scaled(&self, other: &HodlrMatrix, alpha: f64, policy: &TruncationPolicy) -> Result<Self> {
        self.congruent(other)?;
        Ok(self.add_scaled_unchecked(other, alpha, policy))
    }

    fn add_scaled_unchecked(&self, other: &HodlrMatrix, alpha: f64, policy: &TruncationPolicy) -> Self {
        let node = match (&self.node, &other.node) {
            (Node::Leaf(a), Node::Leaf(b)) => Node::Leaf(a + alpha * b),
            (
                Node::Split { tl, br, upper, lower },
                Node::Split {
                    tl: otl,
                    br: obr,
                    upper: oupper,
                    lower: olower,
                },
            ) => {
                let sum = |a: &LowRank, b: &LowRank| {
                    LowRank::compress(
                        linalg::hcat(a.u.as_ref(), b.u.as_ref()),
                        linalg::hcat(a.v.as_ref(), (alpha * &b.v).as_ref()),
                        policy,
                    )
                };
                Node::Split {
                    tl: Box::new(tl.add_scaled_unchecked(otl, alpha, policy)),
                    br: Box::new(br.add_scaled_unchecked(obr, alpha, policy)),
                    upper: sum(upper, oupper),
                    lower: sum(lower, olower),
                }
            }
            _ => unreachable!("congruent trees"),
        };
        HodlrMatrix { node, ..*self }
    }

    /// `self + U Vᵀ` for a global low-rank term.
    pub fn add_low_rank(&self, u: MatRef<'_, f64>, v: MatRef<'_, f64>, policy: &TruncationPolicy) -> Self {
        assert_eq!(u.nrows(), self.n);
        assert_eq!(v.nrows(), self.n);
        assert_eq!(u.ncols(), v.ncols());
        if u.ncols() == 0 {
            return self.clone();
        }
        let node = match &self.node {
            Node::Leaf(d) => {
                let mut d = d.clone();
                matmul(d.as_mut(), Accum::Add, u, v.transpose(), 1.0, Par::Seq);
                Node::Leaf(d)
            }
            Node::Split { tl, br, upper, lower } => {
                let n1 = tl.n;
                let n2 = br.n;
                let (u1, u2) = (u.subrows(0, n1), u.subrows(n1, n2));
                let (v1, v2) = (v.subrows(0, n1), v.subrows(n1, n2));
                Node::Split {
                    tl: Box::new(tl.add_low_rank(u1, v1, policy)),
                    br: Box::new(br.add_low_rank(u2, v2, policy)),
                    upper: LowRank::compress(
                        linalg::hcat(upper.u.as_ref(), u1),
                        linalg::hcat(upper.v.as_ref(), v2),
                        policy,
                    ),
                    lower: LowRank::compress(
                        linalg::hcat(lower.u.as_ref(), u2),
                        linalg::hcat(lower.v.as_ref(), v1),
                        policy,
                    ),
                }
            }
        };
        HodlrMatrix { node, ..*self }
    }

    /// `self · x` for a dense block of columns.
    pub fn mul_dense(&self, x: MatRef<'_, f64>) -> Matrix {
        assert_eq!(x.nrows(), self.n);
        let mut y = Mat::zeros(self.n, x.ncols());
        self.mul_dense_into(x, y.as_mut(), false);
        y
    }

    /// `selfᵀ · x`.
    pub fn t_mul_dense(&self, x: MatRef<'_, f64>) -> Matrix {
        assert_eq!(x.nrows(), self.n);
        let mut y = Mat::zeros(self.n, x.ncols());
        self.mul_dense_into(x, y.as_mut(), true);
        y
    }

    /// `y += op(self) x`.
    fn mul_dense_into(&self, x: MatRef<'_, f64>, mut y: MatMut<'_, f64>, transpose: bool) {
        if x.ncols() == 0 {
            return;
        }
        match &self.node {
            Node::Leaf(d) => {
                if transpose {
                    matmul(y, Accum::Add, d.transpose(), x, 1.0, Par::Seq);
                } else {
                    matmul(y, Accum::Add, d.as_ref(), x, 1.0, Par::Seq);
                }
            }
            Node::Split { tl, br, upper, lower } => {
                let n1 = tl.n;
                let n2 = br.n;
                let (x1, x2) = (x.subrows(0, n1), x.subrows(n1, n2));
                let (mut y1, mut y2) = y.rb_mut().split_at_row_mut(n1);
                tl.mul_dense_into(x1, y1.rb_mut(), transpose);
                br.mul_dense_into(x2, y2.rb_mut(), transpose);
                // upper maps x2 -> y1, lower maps x1 -> y2; transposition swaps roles.
                let (to_first, to_second) = if transpose { (lower, upper) } else { (upper, lower) };
                apply_low_rank(to_first, x2, y1, transpose);
                apply_low_rank(to_second, x1, y2, transpose);
            }
        }
    }

    /// HODLR product with recompression at every level.
    pub fn matmul(&self, other: &HodlrMatrix, policy: &TruncationPolicy) -> Result<Self> {
        self.congruent(other)?;
        Ok(self.matmul_unchecked(other, policy))
    }

    fn matmul_unchecked(&self, other: &HodlrMatrix, policy: &TruncationPolicy) -> Self {
        let empty = Mat::<f64>::zeros(self.n, 0);
        self.matmul_add(other, empty.as_ref(), empty.as_ref(), policy)
    }

    /// `self · other + U Vᵀ`, pushing the update down the tree so that every
    /// off-diagonal block is compressed once.
    fn matmul_add(
        &self,
        other: &HodlrMatrix,
        u: MatRef<'_, f64>,
        v: MatRef<'_, f64>,
        policy: &TruncationPolicy,
    ) -> Self {
        let node = match (&self.node, &other.node) {
            (Node::Leaf(a), Node::Leaf(b)) => {
                let mut c = a * b;
                if u.ncols() > 0 {
                    matmul(c.as_mut(), Accum::Add, u, v.transpose(), 1.0, Par::Seq);
                }
                Node::Leaf(c)
            }
            (
                Node::Split {
                    tl: a11,
                    br: a22,
                    upper: a12,
                    lower: a21,
                },
                Node::Split {
                    tl: b11,
                    br: b22,
                    upper: b12,
                    lower: b21,
                },
            ) => {
                let (n1, n2) = (a11.n, a22.n);
                let (u1, u2) = (u.subrows(0, n1), u.subrows(n1, n2));
                let (v1, v2) = (v.subrows(0, n1), v.subrows(n1, n2));
                // C11 = A11 B11 + A12 B21 + U1 V1ᵀ
                let (pu, pv) = lowrank_mul(a12, b21);
                let c11 = a11.matmul_add(
                    b11,
                    linalg::hcat(pu.as_ref(), u1).as_ref(),
                    linalg::hcat(pv.as_ref(), v1).as_ref(),
                    policy,
                );
                // C22 = A22 B22 + A21 B12 + U2 V2ᵀ
                let (pu, pv) = lowrank_mul(a21, b12);
                let c22 = a22.matmul_add(
                    b22,
                    linalg::hcat(pu.as_ref(), u2).as_ref(),
                    linalg::hcat(pv.as_ref(), v2).as_ref(),
                    policy,
                );
                // C12 = (A11 Ub) Vbᵀ + Ua (B22ᵀ Va)ᵀ + U1 V2ᵀ
                let c12 = LowRank::compress(
                    hcat3(a11.mul_dense(b12.u.as_ref()).as_ref(), a12.u.as_ref(), u1),
                    hcat3(b12.v.as_ref(), b22.t_mul_dense(a12.v.as_ref()).as_ref(), v2),
                    policy,
                );
                // C21 = Ua (B11ᵀ Va)ᵀ + (A22 Ub) Vbᵀ + U2 V1ᵀ
                let c21 = LowRank::compress(
                    hcat3(a21.u.as_ref(), a22.mul_dense(b21.u.as_ref()).as_ref(), u2),
                    hcat3(b11.t_mul_dense(a21.v.as_ref()).as_ref(), b21.v.as_ref(), v1),
                    policy,
                );
                Node::Split {
                    tl: Box::new(c11),
                    br: Box::new(c22),
                    upper: c12,
                    lower: c21,
                }
            }
            _ => unreachable!("congruent trees"),
        };
        HodlrMatrix { node, ..*self }
    }

    /// Recursive block LU: leaf LU plus low-rank Schur complement updates.
    pub fn factor(&self, policy: &TruncationPolicy, settings: &NumericSettings) -> Result<HodlrLu> {
        let empty = Mat::<f64>::zeros(self.n, 0);
        self.factor_add(empty.as_ref(), empty.as_ref(), policy, settings)
    }

    /// Factorization of `self + U Vᵀ`.
    fn factor_add(
        &self,
        u: MatRef<'_, f64>,
        v: MatRef<'_, f64>,
        policy: &TruncationPolicy,
        settings: &NumericSettings,
    ) -> Result<HodlrLu> {
        let node = match &self.node {
            Node::Leaf(d) => {
                if u.ncols() == 0 {
                    FactorNode::Leaf(DenseLu::new(d.as_ref(), settings)?)
                } else {
                    let mut d = d.clone();
                    matmul(d.as_mut(), Accum::Add, u, v.transpose(), 1.0, Par::Seq);
                    FactorNode::Leaf(DenseLu::new(d.as_ref(), settings)?)
                }
            }
            Node::Split { tl, br, upper, lower } => {
                let (n1, n2) = (tl.n, br.n);
                let (u1, u2) = (u.subrows(0, n1), u.subrows(n1, n2));
                let (v1, v2) = (v.subrows(0, n1), v.subrows(n1, n2));
                let (upper, lower) = if u.ncols() == 0 {
                    (upper.clone(), lower.clone())
                } else {
                    (
                        LowRank::compress(
                            linalg::hcat(upper.u.as_ref(), u1),
                            linalg::hcat(upper.v.as_ref(), v2),
                            policy,
                        ),
                        LowRank::compress(
                            linalg::hcat(lower.u.as_ref(), u2),
                            linalg::hcat(lower.v.as_ref(), v1),
                            policy,
                        ),
                    )
                };
                let f11 = tl.factor_add(u1, v1, policy, settings)?;
                let w = f11.solve_dense(upper.u.as_ref());
                // S = A22 + U2 V2ᵀ − U21 (V21ᵀ A11⁻¹ U12) V12ᵀ
                let coupling = lower.v.transpose() * &w;
                let su = -(&lower.u * &coupling);
                let fs = br.factor_add(
                    linalg::hcat(u2, su.as_ref()).as_ref(),
                    linalg::hcat(v2, upper.v.as_ref()).as_ref(),
                    policy,
                    settings,
                )?;
                FactorNode::Split {
                    tl: Box::new(f11),
                    schur: Box::new(fs),
                    w,
                    upper,
                    lower,
                }
            }
        };
        Ok(HodlrLu {
            n: self.n,
            leaf_size: self.leaf_size,
            node,
        })
    }

    pub fn solve_dense(
        &self,
        b: MatRef<'_, f64>,
        policy: &TruncationPolicy,
        settings: &NumericSettings,
    ) -> Result<Matrix> {
        if b.nrows() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "rhs has {} rows, matrix has order {}",
                b.nrows(),
                self.n
            )));
        }
        Ok(self.factor(policy, settings)?.solve_dense(b))
    }

    pub fn solve(&self, b: &HodlrMatrix, policy: &TruncationPolicy, settings: &NumericSettings) -> Result<HodlrMatrix> {
        self.congruent(b)?;
        Ok(self.factor(policy, settings)?.solve(b, policy))
    }

    /// Largest off-diagonal rank in the tree.
    pub fn max_offdiag_rank(&self) -> usize {
        self.rank_profile().iter().map(|b| b.rank).max().unwrap_or(0)
    }

    pub fn rank_profile(&self) -> Vec<BlockRank> {
        let mut out = Vec::new();
        self.collect_ranks(0, 0, &mut out);
        out.sort_by_key(|b| (b.level, b.position));
        out
    }

    fn collect_ranks(&self, level: usize, node: usize, out: &mut Vec<BlockRank>) {
        if let Node::Split { tl, br, upper, lower } = &self.node {
            out.push(BlockRank {
                level,
                position: 2 * node,
                rank: upper.rank(),
            });
            out.push(BlockRank {
                level,
                position: 2 * node + 1,
                rank: lower.rank(),
            });
            tl.collect_ranks(level + 1, 2 * node, out);
            br.collect_ranks(level + 1, 2 * node + 1, out);
        }
    }

    /// Text dump, one `level position rank` line per off-diagonal block.
    pub fn write_rank_profile<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for b in self.rank_profile() {
            writeln!(w, "{} {} {}", b.level, b.position, b.rank)?;
        }
        Ok(())
    }

    fn find_block(&self, block: &OffDiagBlock) -> Result<&LowRank> {
        let mut cur = self;
        for bit in (0..block.level).rev() {
            match &cur.node {
                Node::Split { tl, br, .. } => {
                    cur = if (block.node >> bit) & 1 == 0 { tl } else { br };
                }
                Node::Leaf(_) => {
                    return Err(Error::BadBlockIndex(format!(
                        "level {} is below the leaves",
                        block.level
                    )))
                }
            }
        }
        match &cur.node {
            Node::Split { upper, lower, .. } => Ok(match block.side {
                Side::Upper => upper,
                Side::Lower => lower,
            }),
            Node::Leaf(_) => Err(Error::BadBlockIndex(format!(
                "block ({}, {}) lies inside a leaf",
                block.level, block.node
            ))),
        }
    }

    /// Singular values of a stored off-diagonal block (its numerical rank many).
    pub fn offdiag_singular_values(&self, block: &OffDiagBlock) -> Result<Vec<f64>> {
        if block.level >= usize::BITS as usize || block.node >> block.level != 0 {
            return Err(Error::BadBlockIndex(format!(
                "node {} does not exist at level {}",
                block.node, block.level
            )));
        }
        Ok(self.find_block(block)?.singular_values())
    }

    /// Power-iteration estimate of `‖self‖₂`.
    pub fn norm2_estimate(&self) -> f64 {
        norm2_power(self.n, |x| self.mul_dense(x), |x| self.t_mul_dense(x))
    }
}

fn apply_low_rank(b: &LowRank, x: MatRef<'_, f64>, y: MatMut<'_, f64>, transpose: bool) {
    if b.rank() == 0 {
        return;
    }
    if transpose {
        // (U Vᵀ)ᵀ x = V (Uᵀ x)
        let t = b.u.transpose() * x;
        matmul(y, Accum::Add, b.v.as_ref(), t.as_ref(), 1.0, Par::Seq);
    } else {
        let t = b.v.transpose() * x;
        matmul(y, Accum::Add, b.u.as_ref(), t.as_ref(), 1.0, Par::Seq);
    }
}

/// Power iteration on `AᵀA` from a fixed start vector.
pub(crate) fn norm2_power(
    n: usize,
    apply: impl Fn(MatRef<'_, f64>) -> Matrix,
    apply_t: impl Fn(MatRef<'_, f64>) -> Matrix,
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut x = Mat::from_fn(n, 1, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7548776662).fract());
    let mut est = 0.0f64;
    for _ in 0..30 {
        let nx = x.norm_l2();
        if nx == 0.0 {
            return est;
        }
        x = (1.0 / nx) * &x;
        let y = apply(x.as_ref());
        let ny = y.norm_l2();
        if (ny - est).abs() <= 1e-10 * ny {
            return ny.max(est);
        }
        est = est.max(ny);
        x = apply_t(y.as_ref());
    }
    est
}

#[derive(Clone, Debug)]
enum FactorNode {
    Leaf(DenseLu),
    Split {
        tl: Box<HodlrLu>,
        schur: Box<HodlrLu>,
        /// `A11⁻¹ U12`
        w: Matrix,
        upper: LowRank,
        lower: LowRank,
    },
}

/// Factorization produced by [`HodlrMatrix::factor`].
#[derive(Clone, Debug)]
pub struct HodlrLu {
    n: usize,
    leaf_size: usize,
    node: FactorNode,
}

impl HodlrLu {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn solve_dense(&self, b: MatRef<'_, f64>) -> Matrix {
        assert_eq!(b.nrows(), self.n);
        match &self.node {
            FactorNode::Leaf(lu) => lu.solve(b),
            FactorNode::Split {
                tl,
                schur,
                w,
                upper,
                lower,
            } => {
                let n1 = tl.n;
                let n2 = schur.n;
                let (b1, b2) = (b.subrows(0, n1), b.subrows(n1, n2));
                let y1 = tl.solve_dense(b1);
                let mut r2 = b2.to_owned();
                if lower.rank() > 0 {
                    let t = lower.v.transpose() * &y1;
                    matmul(r2.as_mut(), Accum::Add, lower.u.as_ref(), t.as_ref(), -1.0, Par::Seq);
                }
                let x2 = schur.solve_dense(r2.as_ref());
                let mut x1 = y1;
                if upper.rank() > 0 {
                    let t = upper.v.transpose() * &x2;
                    matmul(x1.as_mut(), Accum::Add, w.as_ref(), t.as_ref(), -1.0, Par::Seq);
                }
                linalg::vcat(x1.as_ref(), x2.as_ref())
            }
        }
    }

    /// Solves `Aᵀ X = B`.
    pub fn solve_transpose_dense(&self, b: MatRef<'_, f64>) -> Matrix {
        assert_eq!(b.nrows(), self.n);
        match &self.node {
            FactorNode::Leaf(lu) => lu.solve_transpose(b),
            FactorNode::Split {
                tl,
                schur,
                w,
                upper,
                lower,
            } => {
                // Aᵀ = [A11ᵀ, V21 U21ᵀ; V12 U12ᵀ, A22ᵀ], Sᵀ = A22ᵀ − V12 (wᵀ V21) U21ᵀ
                let n1 = tl.n;
                let n2 = schur.n;
                let (b1, b2) = (b.subrows(0, n1), b.subrows(n1, n2));
                let mut r2 = b2.to_owned();
                if upper.rank() > 0 {
                    let t = w.transpose() * b1;
                    matmul(r2.as_mut(), Accum::Add, upper.v.as_ref(), t.as_ref(), -1.0, Par::Seq);
                }
                let x2 = schur.solve_transpose_dense(r2.as_ref());
                let mut r1 = b1.to_owned();
                if lower.rank() > 0 {
                    let t = lower.u.transpose() * &x2;
                    matmul(r1.as_mut(), Accum::Add, lower.v.as_ref(), t.as_ref(), -1.0, Par::Seq);
                }
                let x1 = tl.solve_transpose_dense(r1.as_ref());
                linalg::vcat(x1.as_ref(), x2.as_ref())
            }
        }
    }

    /// `A⁻¹ B` for a congruent HODLR right-hand side.
    pub fn solve(&self, b: &HodlrMatrix, policy: &TruncationPolicy) -> HodlrMatrix {
        assert!(b.n == self.n && b.leaf_size == self.leaf_size, "congruent trees");
        let empty = Mat::<f64>::zeros(self.n, 0);
        self.solve_add(b, empty.as_ref(), empty.as_ref(), policy)
    }

    /// `A⁻¹ (B + U Vᵀ)`.
    fn solve_add(
        &self,
        b: &HodlrMatrix,
        u: MatRef<'_, f64>,
        v: MatRef<'_, f64>,
        policy: &TruncationPolicy,
    ) -> HodlrMatrix {
        let node = match (&self.node, &b.node) {
            (FactorNode::Leaf(lu), Node::Leaf(d)) => {
                if u.ncols() == 0 {
                    Node::Leaf(lu.solve(d.as_ref()))
                } else {
                    let mut d = d.clone();
                    matmul(d.as_mut(), Accum::Add, u, v.transpose(), 1.0, Par::Seq);
                    Node::Leaf(lu.solve(d.as_ref()))
                }
            }
            (
                FactorNode::Split {
                    tl,
                    schur,
                    w,
                    upper,
                    lower,
                },
                Node::Split {
                    tl: b11,
                    br: b22,
                    upper: b12,
                    lower: b21,
                },
            ) => {
                let (n1, n2) = (tl.n, schur.n);
                let (u1, u2) = (u.subrows(0, n1), u.subrows(n1, n2));
                let (v1, v2) = (v.subrows(0, n1), v.subrows(n1, n2));
                // First block column. With Y11 = A11⁻¹(B11 + U1V1ᵀ):
                // X21 = S⁻¹(B21 + U2V1ᵀ − U21 V21ᵀ Y11), X11 = Y11 − w V12ᵀ X21.
                let q = tl.solve_transpose_dense(lower.v.as_ref());
                let mut p = b11.t_mul_dense(q.as_ref());
                if u1.ncols() > 0 {
                    let t = u1.transpose() * &q;
                    matmul(p.as_mut(), Accum::Add, v1, t.as_ref(), 1.0, Par::Seq);
                }
                let r21u = hcat3(b21.u.as_ref(), u2, (-&lower.u).as_ref());
                let r21v = hcat3(b21.v.as_ref(), v1, p.as_ref());
                let x21 = LowRank::compress(schur.solve_dense(r21u.as_ref()), r21v, policy);
                let coeff = upper.v.transpose() * &x21.u;
                let x11 = tl.solve_add(
                    b11,
                    linalg::hcat(u1, (-(&upper.u * &coeff)).as_ref()).as_ref(),
                    linalg::hcat(v1, x21.v.as_ref()).as_ref(),
                    policy,
                );
                // Second block column. Y12 = A11⁻¹(B12 + U1V2ᵀ) is low rank;
                // X22 = S⁻¹(B22 + U2V2ᵀ − U21 V21ᵀ Y12), X12 = Y12 − w V12ᵀ X22.
                let y12u = tl.solve_dense(linalg::hcat(b12.u.as_ref(), u1).as_ref());
                let y12v = linalg::hcat(b12.v.as_ref(), v2);
                let coeff = lower.v.transpose() * &y12u;
                let x22 = schur.solve_add(
                    b22,
                    linalg::hcat(u2, (-(&lower.u * &coeff)).as_ref()).as_ref(),
                    linalg::hcat(v2, y12v.as_ref()).as_ref(),
                    policy,
                );
                let x12 = LowRank::compress(
                    linalg::hcat(y12u.as_ref(), (-w).as_ref()),
                    linalg::hcat(y12v.as_ref(), x22.t_mul_dense(upper.v.as_ref()).as_ref()),
                    policy,
                );
                Node::Split {
                    tl: Box::new(x11),
                    br: Box::new(x22),
                    upper: x12,
                    lower: x21,
                }
            }
            _ => unreachable!("congruent trees"),
        };
        HodlrMatrix {
            n: self.n,
            leaf_size: self.leaf_size,
            node,
        }
    }
}

/// Singular values of an off-diagonal block of a dense matrix, located with
/// the same `⌊n/2⌋`/`⌈n/2⌉` partition used by [`HodlrMatrix`].
pub fn offdiag_singular_values(a: MatRef<'_, f64>, block: &OffDiagBlock) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch("off-diagonal blocks need a square matrix".into()));
    }
    let (r0, nr, c0, nc) = block.locate(a.nrows(), 2)?;
    linalg::singular_values(a.submatrix(r0, c0, nr, nc))
}
