//! Singular value decay bounds for the off-diagonal blocks of `H_{ψ,0}`.
//!
//! The bounds have the form `σ_{1+p·l}(C̃) ≤ γ·Z_l(E, F)` where `Z_l` is the
//! Zolotarev ratio of the eigenvalue sets of `φ(z)` (and of a trailing
//! principal subblock of it) inside and outside the unit disc. `Z_l` is
//! estimated from above either by a closed form valid on real intervals or by
//! evaluating a concrete rational function on the discrete sets.

use std::f64::consts::PI;
use std::io::Write;

use faer::MatRef;

use crate::cr::{LaurentTriple, QuadraticSolutions};
use crate::error::{Error, Result};
use crate::hodlr::OffDiagBlock;
use crate::linalg::{self, c64, Eigenvalue};
use crate::table::{cell, TableFormat};

/// Eigenvalues closer than this to the unit circle break the splitting.
pub const UNIT_CIRCLE_TOL: f64 = 1e-10;
/// Largest eigenvector condition number accepted in the general bound.
pub const MAX_EIGVEC_CONDITION: f64 = 1e12;
/// Sample count used when `F` is the unit circle.
pub const UNIT_CIRCLE_SAMPLES: usize = 512;

fn canonical_order(a: &c64, b: &c64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// The `2m` roots of `det(A₋₁ + zA₀ + z²A₁)`, infinite ones included.
pub fn eigenvalues(phi: &LaurentTriple) -> Result<Vec<Eigenvalue>> {
    let (m, n) = linalg::companion_pencil(phi.a_minus.as_ref(), phi.a_zero.as_ref(), phi.a_plus.as_ref());
    linalg::generalized_eigvals(m.as_ref(), n.as_ref())
}

/// Partition of the eigenvalues of `φ(z)` by the unit circle.
#[derive(Clone, Debug)]
pub struct SpectralSplit {
    /// Sorted canonically.
    pub inside: Vec<c64>,
    pub outside: Vec<Eigenvalue>,
    /// `max(max|inside|, 1/min|outside|)`.
    pub t: f64,
    pub m: usize,
}

impl SpectralSplit {
    pub fn from_eigenvalues(eigs: Vec<Eigenvalue>, m: usize) -> Result<Self> {
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for e in eigs {
            let r = e.modulus();
            if (1.0 - r).abs() <= UNIT_CIRCLE_TOL {
                return Err(Error::NoSplitting { modulus: r });
            }
            match e {
                Eigenvalue::Finite(z) if r < 1.0 => inside.push(z),
                _ => outside.push(e),
            }
        }
        inside.sort_by(canonical_order);
        if inside.len() != m {
            let nearest = inside
                .iter()
                .map(|z| z.norm())
                .chain(outside.iter().map(Eigenvalue::modulus))
                .min_by(|a, b| (1.0 - a).abs().total_cmp(&(1.0 - b).abs()))
                .unwrap_or(f64::NAN);
            return Err(Error::NoSplitting { modulus: nearest });
        }
        let max_in = inside.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let min_out = outside.iter().map(Eigenvalue::modulus).fold(f64::INFINITY, f64::min);
        Ok(SpectralSplit {
            inside,
            outside,
            t: max_in.max(1.0 / min_out),
            m,
        })
    }

    pub fn outside_finite(&self) -> Vec<c64> {
        let mut v: Vec<c64> = self.outside.iter().filter_map(Eigenvalue::finite).collect();
        v.sort_by(canonical_order);
        v
    }

    pub fn infinite_count(&self) -> usize {
        self.outside.iter().filter(|e| e.finite().is_none()).count()
    }

    /// Inside eigenvalue with the largest real part.
    pub fn rightmost_inside(&self) -> c64 {
        *self
            .inside
            .iter()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .expect("split holds m ≥ 1 inside eigenvalues")
    }

    /// Inside and outside eigenvalues nearest to `1`.
    pub fn nearest_to_one(&self) -> (c64, c64) {
        let one = c64::new(1.0, 0.0);
        let near = |v: &[c64]| {
            *v.iter()
                .min_by(|a, b| (**a - one).norm().total_cmp(&(**b - one).norm()))
                .unwrap()
        };
        (near(&self.inside), near(&self.outside_finite()))
    }
}

pub fn spectral_split(phi: &LaurentTriple) -> Result<SpectralSplit> {
    SpectralSplit::from_eigenvalues(eigenvalues(phi)?, phi.order())
}

/// Complete elliptic integral of the first kind with modulus `x ∈ [0, 1)`,
/// `∫₀¹ dt/√((1−t²)(1−x²t²)) = π / (2·AGM(1, √(1−x²)))`.
pub fn elliptic_k(x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::DomainError(format!("elliptic modulus {x} outside [0, 1)")));
    }
    let (mut a, mut b) = (1.0f64, (1.0 - x * x).sqrt());
    for _ in 0..64 {
        if (a - b).abs() <= 1e-15 * a {
            break;
        }
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    Ok(PI / (2.0 * a))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZolotarevBound {
    pub rho: f64,
    /// `exp(−π² / (2·log(16/(1−δ⁴))))`, the `δ ≈ 1` approximation of `rho`.
    pub rho_tilde: f64,
    /// Bound on `Z_{2l}`; `+∞` when vacuous.
    pub value: f64,
    /// Same bound with `rho_tilde`.
    pub approx: f64,
    /// `2ρ^l ≥ 1`.
    pub vacuous: bool,
}

/// `Z_{2l}(E, F) ≤ 2ρ^l/(1 − 2ρ^l)` for `E = [−∞, −1/δ] ∪ [1/δ, ∞]`,
/// `F = [−δ, δ]`, `ρ = exp(−πK(√(1−δ⁴)) / (2K(δ²)))`. `Z₀ = 1`.
pub fn zolotarev_closed_form(delta: f64, l: usize) -> Result<ZolotarevBound> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DomainError(format!("delta {delta} outside (0, 1)")));
    }
    let d4 = delta.powi(4);
    let rho = (-PI * elliptic_k((1.0 - d4).sqrt())? / (2.0 * elliptic_k(delta * delta)?)).exp();
    let rho_tilde = (-PI * PI / (2.0 * (16.0 / (1.0 - d4)).ln())).exp();
    let eval = |r: f64| {
        if l == 0 {
            return 1.0;
        }
        let p = 2.0 * r.powi(l as i32);
        if p >= 1.0 {
            f64::INFINITY
        } else {
            p / (1.0 - p)
        }
    };
    let value = eval(rho);
    Ok(ZolotarevBound {
        rho,
        rho_tilde,
        value,
        approx: eval(rho_tilde),
        vacuous: value.is_infinite(),
    })
}

/// `δ` of the symmetric configuration Möbius-equivalent to the real intervals
/// `[a, b]` and `[c, d]` with `a ≤ b < c ≤ d`, through their cross-ratio.
pub fn mobius_delta(a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    if !(a <= b && b < c && c <= d) || ![a, b, c, d].iter().all(|x| x.is_finite()) {
        return Err(Error::DomainError(format!(
            "[{a}, {b}] and [{c}, {d}] are not ordered disjoint intervals"
        )));
    }
    let kappa = (c - a) * (d - b) / ((c - b) * (d - a));
    let s = kappa.sqrt();
    Ok(((s - 1.0) / (s + 1.0)).max(0.0).sqrt())
}

/// Upper bound on `Z_k(E, F)` for finite real point sets lying in disjoint
/// intervals, via [`mobius_delta`] and [`zolotarev_closed_form`]; `None` when
/// the sets are not of that kind.
pub fn zolotarev_for_sets(e: &[c64], f: &[Eigenvalue], k: usize) -> Option<f64> {
    if k == 0 {
        return Some(1.0);
    }
    let real = |z: &c64| if z.im == 0.0 { Some(z.re) } else { None };
    let es: Option<Vec<f64>> = e.iter().map(real).collect();
    let fs: Option<Vec<f64>> = f.iter().map(|x| x.finite().as_ref().and_then(real)).collect();
    let (es, fs) = (es?, fs?);
    let hull = |v: &[f64]| {
        (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let ((a, b), (c, d)) = (hull(&es), hull(&fs));
    let delta = if b < c {
        mobius_delta(a, b, c, d).ok()?
    } else if d < a {
        mobius_delta(c, d, a, b).ok()?
    } else {
        return None;
    };
    if delta == 0.0 {
        return Some(0.0);
    }
    let z = zolotarev_closed_form(delta, k / 2).ok()?;
    Some(z.value.min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    ZolotarevClosedForm,
    GreedyDiscrete,
    MarkovShiftedMonomial,
}

/// A concrete rational function used to bound `Z_l(E, F)`, with its estimates.
#[derive(Clone, Debug)]
pub struct RationalBoundFamily {
    pub kind: EstimatorKind,
    pub delta: c64,
    pub zeros: Vec<c64>,
    pub poles: Vec<c64>,
    pub e: Vec<c64>,
    pub f: Vec<Eigenvalue>,
    /// `estimates[l]` bounds `Z_l`, nonincreasing.
    pub estimates: Vec<f64>,
    /// Indices `j` of poles moved off a point of `E`.
    pub perturbed: Vec<usize>,
}

fn validate_sets(e: &[c64], f: &[Eigenvalue]) -> Result<()> {
    if e.is_empty() || f.is_empty() {
        return Err(Error::DomainError("point sets must be nonempty".into()));
    }
    for z in e {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::DomainError("E must be finite".into()));
        }
        if f.iter().any(|w| w.finite() == Some(*z)) {
            return Err(Error::DomainError(format!("{z} lies in both E and F")));
        }
    }
    Ok(())
}

fn diameter(e: &[c64], f: &[c64]) -> f64 {
    let pts: Vec<&c64> = e.iter().chain(f).collect();
    let mut d = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max((**a - **b).norm());
        }
    }
    d
}

fn ratio(max_log_e: f64, min_log_f: f64) -> f64 {
    if max_log_e == f64::NEG_INFINITY {
        0.0
    } else {
        (max_log_e - min_log_f).exp()
    }
}

fn running_min(v: &mut [f64]) {
    for i in 1..v.len() {
        v[i] = v[i].min(v[i - 1]);
    }
}

/// Greedy estimate of `Z_l(E, F)` with `r_l(z) = (z−δ)∏_{j<l}(z−q_j)/(z−p_j)`,
/// `q_j` maximizing `|r_j|` on `E` and `p_j` minimizing it on `F`.
pub fn greedy_rational_estimate(
    e: &[c64],
    f: &[Eigenvalue],
    delta: c64,
    l: usize,
) -> Result<(f64, RationalBoundFamily)> {
    validate_sets(e, f)?;
    let mut e_sorted = e.to_vec();
    e_sorted.sort_by(canonical_order);
    let mut f_fin: Vec<c64> = f.iter().filter_map(Eigenvalue::finite).collect();
    f_fin.sort_by(canonical_order);
    let diam = diameter(&e_sorted, &f_fin).max(f64::MIN_POSITIVE);

    let ln_abs = |z: c64| z.norm().ln();
    // log|r_1| on both sets; infinite points of F always have |r| = ∞
    let mut log_e: Vec<f64> = e_sorted.iter().map(|&z| ln_abs(z - delta)).collect();
    let mut log_f: Vec<f64> = f_fin.iter().map(|&z| ln_abs(z - delta)).collect();
    let argmax = |v: &[f64]| {
        let mut best = 0;
        for (i, x) in v.iter().enumerate() {
            if *x > v[best] {
                best = i;
            }
        }
        best
    };
    let argmin = |v: &[f64]| {
        let mut best = 0;
        for (i, x) in v.iter().enumerate() {
            if *x < v[best] {
                best = i;
            }
        }
        best
    };
    let min_f = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max_e = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut family = RationalBoundFamily {
        kind: EstimatorKind::GreedyDiscrete,
        delta,
        zeros: Vec::new(),
        poles: Vec::new(),
        e: e_sorted.clone(),
        f: f.to_vec(),
        estimates: vec![1.0],
        perturbed: Vec::new(),
    };
    if l >= 1 {
        family.estimates.push(ratio(max_e(&log_e), min_f(&log_f)));
    }
    for j in 1..l {
        if f_fin.is_empty() {
            family.estimates.push(0.0);
            continue;
        }
        let q = e_sorted[argmax(&log_e)];
        let mut p = f_fin[argmin(&log_f)];
        let gap = e_sorted.iter().map(|&z| (z - p).norm()).fold(f64::INFINITY, f64::min);
        if gap <= 1e-12 * diam {
            let dir = if p.norm() > 0.0 {
                p / p.norm()
            } else {
                c64::new(1.0, 0.0)
            };
            p += dir * (1e-12 * diam);
            family.perturbed.push(j);
            if e_sorted.contains(&p) {
                return Err(Error::PoleCollision(p.norm()));
            }
        }
        for (v, &z) in log_e.iter_mut().zip(&e_sorted) {
            *v += ln_abs(z - q) - ln_abs(z - p);
        }
        for (v, &z) in log_f.iter_mut().zip(&f_fin) {
            *v += ln_abs(z - q) - ln_abs(z - p);
        }
        family.zeros.push(q);
        family.poles.push(p);
        family.estimates.push(ratio(max_e(&log_e), min_f(&log_f)));
    }
    running_min(&mut family.estimates);
    Ok((family.estimates[l], family))
}

/// `max_E|r_l| / min_F|r_l|` for `r_l(z) = (z−λ₁)/(z−λ₂)·z^{l−1}`.
pub fn markov_rational_estimate(e: &[c64], f: &[Eigenvalue], lambda1: c64, lambda2: c64, l: usize) -> Result<f64> {
    validate_sets(e, f)?;
    if l == 0 {
        return Ok(1.0);
    }
    let k = (l - 1) as f64;
    let log_r = |z: c64| (z - lambda1).norm().ln() - (z - lambda2).norm().ln() + k * z.norm().ln();
    let max_e = e.iter().map(|&z| log_r(z)).fold(f64::NEG_INFINITY, f64::max);
    let min_f = f
        .iter()
        .map(|x| match x.finite() {
            Some(z) => log_r(z),
            None if l == 1 => 0.0,
            None => f64::INFINITY,
        })
        .fold(f64::INFINITY, f64::min);
    Ok(ratio(max_e, min_f))
}

/// The sets `E`, `F` for an off-diagonal block: eigenvalues of `φ(z)` and of
/// the principal subblock `D(z)` on the block's columns, split by the unit circle.
#[derive(Clone, Debug)]
pub struct DecaySets {
    pub split: SpectralSplit,
    pub block: OffDiagBlock,
    pub trailing: Vec<Eigenvalue>,
    pub e: Vec<c64>,
    pub f: Vec<Eigenvalue>,
}

impl DecaySets {
    pub fn new(phi: &LaurentTriple, block: OffDiagBlock) -> Result<Self> {
        let split = spectral_split(phi)?;
        let (_, _, c0, nc) = block.locate(phi.order(), 2)?;
        let sub = |a: &linalg::Matrix| a.as_ref().submatrix(c0, c0, nc, nc).to_owned();
        let d = LaurentTriple::new(sub(&phi.a_minus), sub(&phi.a_zero), sub(&phi.a_plus))?;
        let trailing = eigenvalues(&d)?;
        let mut e = split.inside.clone();
        let mut f = split.outside.clone();
        for x in &trailing {
            match x {
                Eigenvalue::Finite(z) if z.norm() < 1.0 => e.push(*z),
                _ => f.push(*x),
            }
        }
        e.sort_by(canonical_order);
        Ok(DecaySets {
            split,
            block,
            trailing,
            e,
            f,
        })
    }
}

/// Unit circle samples, for bounds with `F = 𝕋`.
pub fn unit_circle(count: usize) -> Vec<Eigenvalue> {
    (0..count)
        .map(|k| Eigenvalue::Finite(c64::from_polar(1.0, 2.0 * PI * k as f64 / count as f64)))
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub enum BoundMode<'a> {
    /// Symmetric blocks with palindromic `φ`: `σ_{1+l} ≤ 2‖C̃‖₂·Z_l`.
    SymmetricPalindromic,
    /// `σ_{1+2l} ≤ 2·max{κ(V_G), κ(V_Ĝ)}·max{κ(V_R), κ(V_R̂)}·‖C̃‖₂·Z_l`.
    General(&'a QuadraticSolutions),
}

#[derive(Clone, Copy, Debug)]
pub enum Estimator {
    ZolotarevClosedForm,
    Greedy,
    Markov,
}

#[derive(Clone, Debug)]
pub struct DecayBound {
    pub gamma: f64,
    /// `values[l]` bounds `σ_{1+parity·l}`.
    pub values: Vec<f64>,
    pub condition_factor: f64,
    /// 1 or 2.
    pub parity: usize,
    pub estimator: Estimator,
}

impl DecayBound {
    /// Bound on `σ_k` (1-based), if within range.
    pub fn for_sigma(&self, k: usize) -> Option<f64> {
        if k == 0 {
            return None;
        }
        self.values.get((k - 1) / self.parity).copied()
    }
}

/// `γ·Z_l` for `l = 0..=l_max`.
pub fn bound_curve(
    sets: &DecaySets,
    c_ref: MatRef<'_, f64>,
    mode: BoundMode<'_>,
    estimator: Estimator,
    l_max: usize,
) -> Result<DecayBound> {
    let (condition_factor, parity) = match mode {
        BoundMode::SymmetricPalindromic => (1.0, 1),
        BoundMode::General(sol) => {
            let mut kappa = [0.0; 4];
            for (k, (name, x)) in kappa.iter_mut().zip([
                ("G", &sol.g),
                ("G_hat", &sol.g_hat),
                ("R", &sol.r),
                ("R_hat", &sol.r_hat),
            ]) {
                *k = linalg::eigvec_condition(x.as_ref())?;
                if !(*k <= MAX_EIGVEC_CONDITION) {
                    return Err(Error::NotDiagonalizable {
                        what: name.into(),
                        kappa: *k,
                    });
                }
            }
            (kappa[0].max(kappa[1]) * kappa[2].max(kappa[3]), 2)
        }
    };
    let gamma = 2.0 * condition_factor * linalg::norm2(c_ref);
    let mut z = match estimator {
        Estimator::Greedy => {
            greedy_rational_estimate(&sets.e, &sets.f, sets.split.rightmost_inside(), l_max)?
                .1
                .estimates
        }
        Estimator::Markov => {
            let (l1, l2) = sets.split.nearest_to_one();
            (0..=l_max)
                .map(|l| markov_rational_estimate(&sets.e, &sets.f, l1, l2, l))
                .collect::<Result<Vec<_>>>()?
        }
        Estimator::ZolotarevClosedForm => (0..=l_max)
            .map(|l| {
                zolotarev_for_sets(&sets.e, &sets.f, l)
                    .ok_or_else(|| Error::DomainError("the closed form needs real, interval-separated sets".into()))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    for v in &mut z {
        *v = v.min(1.0);
    }
    running_min(&mut z);
    Ok(DecayBound {
        gamma,
        values: z.iter().map(|v| gamma * v).collect(),
        condition_factor,
        parity,
        estimator,
    })
}

/// `scale·t^{l−1}` for `l = 1..=rows`.
pub fn prior_line(scale: f64, t: f64, rows: usize) -> Vec<f64> {
    (1..=rows).map(|l| scale * t.powi(l as i32 - 1)).collect()
}

pub const DECAY_COLUMNS: [&str; 5] = ["l", "sigma_l", "bound_rational", "bound_zolotarev", "bound_prior"];

/// Columns `l sigma_l bound_rational bound_zolotarev bound_prior`, one row per
/// `l = 1..=rows`, missing entries written as `nan`.
pub fn write_decay_table<W: Write>(
    mut w: W,
    format: TableFormat,
    rows: usize,
    sigma: &[f64],
    bound: Option<&DecayBound>,
    zolotarev: Option<&DecayBound>,
    prior: &[f64],
) -> std::io::Result<()> {
    format.write_header(&mut w, &DECAY_COLUMNS)?;
    for l in 1..=rows {
        format.write_row(
            &mut w,
            &[
                l.to_string(),
                cell(sigma.get(l - 1).copied()),
                cell(bound.and_then(|b| b.for_sigma(l))),
                cell(zolotarev.and_then(|b| b.for_sigma(l))),
                cell(prior.get(l - 1).copied()),
            ],
        )?;
    }
    Ok(())
}

pub fn write_decay_dat<W: Write>(
    w: W,
    rows: usize,
    sigma: &[f64],
    bound: Option<&DecayBound>,
    zolotarev: Option<&DecayBound>,
    prior: &[f64],
) -> std::io::Result<()> {
    write_decay_table(w, TableFormat::Dat, rows, sigma, bound, zolotarev, prior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr::{run_cr, StoppingRule};
    use crate::hodlr::{self, TruncationPolicy};
    use crate::linalg::{tridiagonal, Matrix};
    use faer::Mat;

    fn poisson(m: usize) -> LaurentTriple {
        LaurentTriple::new(
            -Matrix::identity(m, m),
            tridiagonal(m, -1.0, 4.0, -1.0),
            -Matrix::identity(m, m),
        )
        .unwrap()
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(
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
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    fn k_by_quadrature(x: f64) -> f64 {
        // t = sin θ removes the endpoint singularity
        adaptive_simpson(
            &|th: f64| 1.0 / (1.0 - x * x * th.sin().powi(2)).sqrt(),
            0.0,
            PI / 2.0,
            1e-13,
        )
    }

    #[test]
    fn scalar_split() {
        let s = spectral_split(&LaurentTriple::scalar(-1.0, 4.0, -1.0)).unwrap();
        let r = 2.0 - 3f64.sqrt();
        assert_eq!(s.inside.len(), 1);
        assert!((s.inside[0].re - r).abs() < 1e-14);
        assert!((s.outside[0].modulus() - (2.0 + 3f64.sqrt())).abs() < 1e-13);
        assert!((s.t - r).abs() < 1e-14);
    }

    #[test]
    fn unit_circle_eigenvalue_rejected() {
        let r = spectral_split(&LaurentTriple::scalar(3.0, -4.0, 1.0));
        assert!(matches!(r, Err(Error::NoSplitting { .. })));
    }

    #[test]
    fn singular_a_plus_gives_infinite_eigenvalue() {
        let mut ap = -Matrix::identity(3, 3);
        ap[(1, 1)] = 0.0;
        let phi = LaurentTriple::new(-Matrix::identity(3, 3), tridiagonal(3, -1.0, 4.0, -1.0), ap).unwrap();
        let eigs = eigenvalues(&phi).unwrap();
        assert_eq!(eigs.len(), 6);
        assert!(eigs.contains(&Eigenvalue::Infinite));
        assert!(spectral_split(&phi).unwrap().infinite_count() >= 1);
    }

    #[test]
    fn poisson_eigenvalues_match_formula() {
        for n in [50usize, 100, 200] {
            let s = spectral_split(&poisson(n)).unwrap();
            let mut expect: Vec<f64> = (1..=n)
                .map(|k| {
                    let lam = 4.0 - 2.0 * (k as f64 * PI / (n + 1) as f64).cos();
                    (lam - (lam * lam - 4.0).sqrt()) / 2.0
                })
                .collect();
            expect.sort_by(f64::total_cmp);
            for (z, e) in s.inside.iter().zip(&expect) {
                assert!(z.im.abs() < 1e-8 && (z.re - e).abs() < 1e-8, "{z} vs {e}");
            }
            assert!(s
                .outside
                .iter()
                .all(|x| x.finite().is_some_and(|z| z.re > 1.0 && z.im.abs() < 1e-8)));
            // first-order behaviour 1 − t = Θ(1/(n+1))
            let gap = (1.0 - s.t) * (n + 1) as f64;
            assert!((1.0..=4.0).contains(&gap), "n = {n}: (1−t)(n+1) = {gap}");
        }
    }

    #[test]
    fn elliptic_k_matches_quadrature() {
        assert!((elliptic_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        for i in 1..=9 {
            let x = i as f64 / 10.0;
            let k = elliptic_k(x).unwrap();
            assert!((k - k_by_quadrature(x)).abs() < 1e-10, "x = {x}");
        }
        assert!(elliptic_k(1.0).is_err());
    }

    #[test]
    fn zolotarev_rho() {
        let z = zolotarev_closed_form(0.5, 3).unwrap();
        let rho = (-PI * k_by_quadrature((1.0 - 0.5f64.powi(4)).sqrt()) / (2.0 * k_by_quadrature(0.25))).exp();
        assert!((z.rho - rho).abs() < 1e-10);
        assert!((z.value - 2.0 * rho.powi(3) / (1.0 - 2.0 * rho.powi(3))).abs() < 1e-12);

        let z = zolotarev_closed_form(0.99, 1).unwrap();
        let rel = (z.rho.ln() - z.rho_tilde.ln()).abs() / z.rho.ln().abs();
        assert!(rel <= 0.05, "{rel}");

        assert_eq!(zolotarev_closed_form(0.5, 0).unwrap().value, 1.0);
        assert!(zolotarev_closed_form(0.9999, 1).unwrap().vacuous);
        assert!(zolotarev_closed_form(1.0, 1).is_err());
    }

    #[test]
    fn mobius_recovers_delta() {
        // image of −δ, δ, 1/δ, −1/δ under z ↦ (2z + 3)/(z − 1), whose pole lies between δ and 1/δ
        let delta: f64 = 0.3;
        let m = |z: f64| (2.0 * z + 3.0) / (z - 1.0);
        let (a, b, c, d) = (m(-delta), m(delta), m(1.0 / delta), m(-1.0 / delta));
        let mut pts = [a, b, c, d];
        pts.sort_by(f64::total_cmp);
        let got = mobius_delta(pts[0], pts[1], pts[2], pts[3]).unwrap();
        assert!((got - delta).abs() < 1e-12, "{got}");
        assert!(mobius_delta(0.0, 2.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn greedy_trivial_cases() {
        let e = [c64::new(0.1, 0.0)];
        let f = [Eigenvalue::Finite(c64::new(10.0, 0.0))];
        let (z0, _) = greedy_rational_estimate(&e, &f, e[0], 0).unwrap();
        assert_eq!(z0, 1.0);
        let (z1, _) = greedy_rational_estimate(&e, &f, e[0], 1).unwrap();
        assert_eq!(z1, 0.0);
        assert!(greedy_rational_estimate(&e, &[Eigenvalue::Finite(e[0])], e[0], 1).is_err());
    }

    #[test]
    fn greedy_is_monotone_and_records_collisions() {
        let e: Vec<c64> = (1..20).map(|k| c64::new(k as f64 / 25.0, 0.0)).collect();
        let f: Vec<Eigenvalue> = e.iter().map(|z| Eigenvalue::Finite(1.0 / *z)).collect();
        let (_, fam) = greedy_rational_estimate(&e, &f, e[18], 12).unwrap();
        assert!(fam.estimates.windows(2).all(|w| w[1] <= w[0]));
        assert!(fam.estimates[12] < 1e-3);
        assert_eq!(fam.zeros.len(), 11);

        let e = [c64::new(0.5, 0.0), c64::new(0.2, 0.0)];
        let f = [
            Eigenvalue::Finite(c64::new(0.5 + 1e-15, 0.0)),
            Eigenvalue::Finite(c64::new(3.0, 0.0)),
        ];
        let (_, fam) = greedy_rational_estimate(&e, &f, c64::new(0.2, 0.0), 3).unwrap();
        assert!(!fam.perturbed.is_empty());
        assert!(fam.estimates.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn markov_estimate() {
        let l1 = c64::new(0.95, 0.0);
        let l2 = c64::new(1.05, 0.0);
        assert_eq!(
            markov_rational_estimate(&[l1], &[Eigenvalue::Finite(l2)], l1, l2, 1).unwrap(),
            0.0
        );
        let e = [l1, c64::new(0.1, 0.05), c64::new(-0.2, 0.0)];
        let f = [
            Eigenvalue::Finite(l2),
            Eigenvalue::Finite(c64::new(5.0, 1.0)),
            Eigenvalue::Finite(c64::new(-6.0, 0.0)),
        ];
        let max_e = e[1..].iter().map(|z| z.norm()).fold(0.0, f64::max);
        let min_f = f.iter().map(Eigenvalue::modulus).fold(f64::INFINITY, f64::min);
        for l in 1..10 {
            let a = markov_rational_estimate(&e, &f, l1, l2, l).unwrap();
            let b = markov_rational_estimate(&e, &f, l1, l2, l + 1).unwrap();
            assert!(b <= a * max_e / min_f * (1.0 + 1e-12));
        }
    }

    fn poisson_h0(m: usize) -> Matrix {
        run_cr(&poisson(m), &TruncationPolicy::default(), &StoppingRule::default())
            .unwrap()
            .into_converged()
            .unwrap()
            .h0_limit()
            .unwrap()
    }

    #[test]
    fn zero_reference_block_gives_zero_bound() {
        let sets = DecaySets::new(&poisson(8), OffDiagBlock::default()).unwrap();
        let b = bound_curve(
            &sets,
            Mat::<f64>::zeros(4, 4).as_ref(),
            BoundMode::SymmetricPalindromic,
            Estimator::Greedy,
            5,
        )
        .unwrap();
        assert!(b.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poisson_bounds_dominate() {
        let m = 40;
        let h0 = poisson_h0(m);
        let block = OffDiagBlock::default();
        let (r0, nr, c0, nc) = block.locate(m, 2).unwrap();
        let c = h0.as_ref().submatrix(r0, c0, nr, nc);
        let sigma = hodlr::offdiag_singular_values(h0.as_ref(), &block).unwrap();
        let sets = DecaySets::new(&poisson(m), block).unwrap();
        for est in [Estimator::Greedy, Estimator::ZolotarevClosedForm] {
            let b = bound_curve(&sets, c, BoundMode::SymmetricPalindromic, est, 19).unwrap();
            assert!((b.gamma - 2.0 * sigma[0]).abs() < 1e-10 * sigma[0]);
            assert!(b.values.windows(2).all(|w| w[1] <= w[0]));
            for (k, s) in sigma.iter().enumerate().filter(|(_, s)| **s > 1e-15) {
                if let Some(v) = b.for_sigma(k + 1) {
                    assert!(v >= *s, "{est:?}: σ_{} = {s:e} above {v:e}", k + 1);
                }
            }
        }
    }

    #[test]
    fn dat_layout() {
        let bound = DecayBound {
            gamma: 2.0,
            values: vec![2.0, 1.0],
            condition_factor: 1.0,
            parity: 2,
            estimator: Estimator::Markov,
        };
        let mut out = Vec::new();
        write_decay_dat(&mut out, 5, &[1.0, 0.5], Some(&bound), None, &prior_line(3.0, 0.5, 5)).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# l sigma_l bound_rational bound_zolotarev bound_prior");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "1 1e0 2e0 nan 3e0");
        assert_eq!(lines[3], "3 nan 1e0 nan 7.5e-1");
        assert_eq!(lines[5], "5 nan nan nan 1.875e-1");
    }

    #[test]
    fn unit_circle_samples() {
        let pts = unit_circle(UNIT_CIRCLE_SAMPLES);
        assert_eq!(pts.len(), 512);
        assert!(pts.iter().all(|p| (p.modulus() - 1.0).abs() < 1e-15));
    }
}
