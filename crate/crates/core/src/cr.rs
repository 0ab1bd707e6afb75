//! Cyclic reduction on the matrix Laurent polynomial
//! `φ(z) = z⁻¹A₋₁ + A₀ + zA₁` and the quantities derived from it: the
//! inverse `ψ(z) = φ(z)⁻¹`, its Laurent coefficients `H_j`, and the minimal
//! solutions `G, Ĝ, R, R̂` of the associated quadratic matrix equations.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use faer::{Mat, MatRef};

use crate::block::{reduction_products, Block};
use crate::error::{Error, Result, StepRecord};
use crate::hodlr::{HodlrMatrix, TruncationPolicy};
use crate::linalg::{self, c64, Matrix, NumericSettings};
use crate::parallel;

/// The three coefficients of `φ(z) = z⁻¹A₋₁ + A₀ + zA₁`.
#[derive(Clone, Debug)]
pub struct LaurentTriple<B = Matrix> {
    pub a_minus: B,
    pub a_zero: B,
    pub a_plus: B,
}

impl<B: Block> LaurentTriple<B> {
    pub fn order(&self) -> usize {
        self.a_zero.order()
    }

    pub fn to_dense(&self) -> LaurentTriple<Matrix> {
        LaurentTriple {
            a_minus: self.a_minus.to_dense(),
            a_zero: self.a_zero.to_dense(),
            a_plus: self.a_plus.to_dense(),
        }
    }
}

impl LaurentTriple<Matrix> {
    pub fn new(a_minus: Matrix, a_zero: Matrix, a_plus: Matrix) -> Result<Self> {
        let m = a_zero.nrows();
        for (name, a) in [("A-1", &a_minus), ("A0", &a_zero), ("A1", &a_plus)] {
            if a.nrows() != m || a.ncols() != m {
                return Err(Error::ShapeMismatch(format!(
                    "{name} is {}x{}, expected {m}x{m}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            linalg::check_finite(a.as_ref())?;
        }
        Ok(LaurentTriple {
            a_minus,
            a_zero,
            a_plus,
        })
    }

    /// Scalar triple `(a₋₁, a₀, a₁)` as 1×1 blocks.
    pub fn scalar(a_minus: f64, a_zero: f64, a_plus: f64) -> Self {
        let s = |x| Mat::from_fn(1, 1, |_, _| x);
        LaurentTriple {
            a_minus: s(a_minus),
            a_zero: s(a_zero),
            a_plus: s(a_plus),
        }
    }

    pub fn to_hodlr(&self, policy: &TruncationPolicy, leaf_size: usize) -> LaurentTriple<HodlrMatrix> {
        let h = |a: &Matrix| HodlrMatrix::from_dense(a.as_ref(), policy, leaf_size);
        LaurentTriple {
            a_minus: h(&self.a_minus),
            a_zero: h(&self.a_zero),
            a_plus: h(&self.a_plus),
        }
    }

    /// `φ(z)` as a complex matrix.
    pub fn eval(&self, z: c64) -> Mat<c64> {
        let zi = z.inv();
        Mat::from_fn(self.order(), self.order(), |i, j| {
            zi * self.a_minus[(i, j)] + c64::new(self.a_zero[(i, j)], 0.0) + z * self.a_plus[(i, j)]
        })
    }

    /// `ψ(z) = φ(z)⁻¹`.
    pub fn psi(&self, z: c64, settings: &NumericSettings) -> Result<Mat<c64>> {
        linalg::inverse_c(self.eval(z).as_ref(), settings)
    }

    /// Rescales `A₁ ↦ αA₁`, `A₋₁ ↦ α⁻¹A₋₁`, which maps eigenvalues `ξ ↦ ξ/α`.
    pub fn rescaled(&self, alpha: f64) -> Self {
        LaurentTriple {
            a_minus: (1.0 / alpha) * &self.a_minus,
            a_zero: self.a_zero.clone(),
            a_plus: alpha * &self.a_plus,
        }
    }
}

/// Cyclic reduction iterate at step `h`.
#[derive(Clone, Debug)]
pub struct CrState<B = Matrix> {
    pub h: usize,
    pub triple: LaurentTriple<B>,
    pub a_hat: B,
    pub a_tilde: B,
    pub history: Vec<StepRecord>,
    started: Instant,
}

impl<B: Block> CrState<B> {
    pub fn new(triple: LaurentTriple<B>) -> Self {
        let started = Instant::now();
        let mut state = CrState {
            h: 0,
            a_hat: triple.a_zero.clone(),
            a_tilde: triple.a_zero.clone(),
            triple,
            history: Vec::new(),
            started,
        };
        state.record();
        state
    }

    fn record(&mut self) {
        let rank = [&self.triple.a_minus, &self.triple.a_zero, &self.triple.a_plus]
            .iter()
            .map(|b| b.max_offdiag_rank())
            .max()
            .unwrap_or(0);
        self.history.push(StepRecord {
            h: self.h,
            norm_minus: self.triple.a_minus.norm2_estimate(),
            norm_plus: self.triple.a_plus.norm2_estimate(),
            max_offdiag_rank: rank,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        });
    }

    pub fn last_record(&self) -> &StepRecord {
        self.history.last().expect("history starts at h = 0")
    }

    /// `φ^(h)(z)⁻¹`, evaluated densely.
    pub fn psi_h(&self, z: c64) -> Result<Mat<c64>> {
        self.psi_h_with(z, &NumericSettings::default())
    }

    pub fn psi_h_with(&self, z: c64, settings: &NumericSettings) -> Result<Mat<c64>> {
        self.triple.to_dense().psi(z, settings)
    }

    /// `lim A₀^(h)` at the current step.
    pub fn a0_limit(&self) -> Matrix {
        self.triple.a_zero.to_dense()
    }

    /// `H_{ψ,0} = (lim A₀^(h))⁻¹` at the current step.
    pub fn h0_limit(&self) -> Result<Matrix> {
        let a0 = self.a0_limit();
        linalg::lu_solve(a0.as_ref(), Mat::<f64>::identity(a0.nrows(), a0.nrows()).as_ref())
    }
}

/// One cyclic reduction step, `S = (A₀^(h))⁻¹`:
///
/// ```text
/// A₀'  = A₀ − A₁SA₋₁ − A₋₁SA₁     A₁' = −A₁SA₁     A₋₁' = −A₋₁SA₋₁
/// Â'   = Â − A₁SA₋₁               Ã'  = Ã − A₋₁SA₁
/// ```
pub fn cr_step<B: Block>(state: &CrState<B>, policy: &TruncationPolicy) -> Result<CrState<B>> {
    cr_step_with(state, policy, &NumericSettings::default())
}

pub fn cr_step_with<B: Block>(
    state: &CrState<B>,
    policy: &TruncationPolicy,
    settings: &NumericSettings,
) -> Result<CrState<B>> {
    let step = state.h + 1;
    let t = &state.triple;
    let at = |e: Error| e.at_step(step);
    let red = reduction_products(&t.a_minus, &t.a_zero, &t.a_plus, policy, settings).map_err(at)?;
    let a_zero = t
        .a_zero
        .add_scaled(&red.plus_minus, -1.0, policy)
        .and_then(|a| a.add_scaled(&red.minus_plus, -1.0, policy))
        .map_err(at)?;
    let a_hat = state.a_hat.add_scaled(&red.plus_minus, -1.0, policy).map_err(at)?;
    let a_tilde = state.a_tilde.add_scaled(&red.minus_plus, -1.0, policy).map_err(at)?;
    let mut next = CrState {
        h: step,
        triple: LaurentTriple {
            a_minus: red.minus_minus.scale(-1.0),
            a_zero,
            a_plus: red.plus_plus.scale(-1.0),
        },
        a_hat,
        a_tilde,
        history: state.history.clone(),
        started: state.started,
    };
    next.record();
    Ok(next)
}

/// Stop once `‖A₁^(h)‖·‖A₋₁^(h)‖ ≤ tol·‖A₀^(h)‖²` or after `max_steps` steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoppingRule {
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            tol: 1e-14,
            max_steps: 50,
        }
    }
}

impl StoppingRule {
    pub fn is_met<B: Block>(&self, state: &CrState<B>) -> bool {
        let r = state.last_record();
        let product = r.norm_minus * r.norm_plus;
        if product == 0.0 {
            return true;
        }
        let a0 = state.triple.a_zero.norm2_estimate();
        product <= self.tol * a0 * a0
    }
}

/// Outcome of [`run_cr`].
#[derive(Clone, Debug)]
pub struct CrRun<B = Matrix> {
    pub state: CrState<B>,
    pub converged: bool,
}

impl<B> CrRun<B> {
    /// The final state, or [`Error::NoConvergence`] with the norm history.
    pub fn into_converged(self) -> Result<CrState<B>> {
        if self.converged {
            Ok(self.state)
        } else {
            Err(Error::NoConvergence {
                history: self.state.history,
            })
        }
    }
}

pub fn run_cr<B: Block>(phi: &LaurentTriple<B>, policy: &TruncationPolicy, stop: &StoppingRule) -> Result<CrRun<B>> {
    run_cr_with(phi, policy, &NumericSettings::default(), stop, |_| {})
}

/// [`run_cr`] with explicit numeric settings and a per-step telemetry callback.
pub fn run_cr_with<B: Block>(
    phi: &LaurentTriple<B>,
    policy: &TruncationPolicy,
    settings: &NumericSettings,
    stop: &StoppingRule,
    mut telemetry: impl FnMut(&StepRecord),
) -> Result<CrRun<B>> {
    let mut state = CrState::new(phi.clone());
    telemetry(state.last_record());
    loop {
        if stop.is_met(&state) {
            return Ok(CrRun { state, converged: true });
        }
        if state.h >= stop.max_steps {
            return Ok(CrRun {
                state,
                converged: false,
            });
        }
        state = cr_step_with(&state, policy, settings)?;
        telemetry(state.last_record());
    }
}

/// Laurent coefficients `H_j` of `ψ(z) = Σ zʲ H_j`, approximated by the
/// trapezoidal rule on `N` roots of unity.
#[derive(Clone, Debug)]
pub struct LaurentCoeffs {
    pub coeffs: BTreeMap<i64, Matrix>,
    pub sample_count: usize,
}

impl LaurentCoeffs {
    pub fn get(&self, j: i64) -> Option<&Matrix> {
        self.coeffs.get(&j)
    }

    /// `max(‖H_J‖, ‖H_{−J}‖) / ‖H₀‖` for the outermost stored index `J`.
    pub fn tail_ratio(&self) -> f64 {
        let Some(h0) = self.get(0) else { return f64::NAN };
        let n0 = linalg::norm2(h0.as_ref());
        let jmax = self.coeffs.keys().map(|j| j.abs()).max().unwrap_or(0);
        if jmax == 0 || n0 == 0.0 {
            return 0.0;
        }
        [jmax, -jmax]
            .iter()
            .filter_map(|j| self.get(*j))
            .map(|h| linalg::norm2(h.as_ref()))
            .fold(0.0, f64::max)
            / n0
    }
}

pub const ALIAS_THRESHOLD: f64 = 1e-8;

/// Smallest power of two `≥ max(64, 8J)`.
pub fn default_sample_count(j: usize) -> usize {
    (8 * j).max(64).next_power_of_two()
}

/// All `H_j` for `j ∈ [−J, J]`. Fails with [`Error::AliasWarning`] when the
/// outermost coefficients are not negligible.
pub fn laurent_coeffs(phi: &LaurentTriple, j_max: usize, samples: Option<usize>) -> Result<LaurentCoeffs> {
    let js: Vec<i64> = (-(j_max as i64)..=j_max as i64).collect();
    let coeffs = laurent_coeffs_at(phi, &js, samples.unwrap_or_else(|| default_sample_count(j_max)))?;
    let ratio = coeffs.tail_ratio();
    if ratio > ALIAS_THRESHOLD {
        return Err(Error::AliasWarning { ratio });
    }
    Ok(coeffs)
}

/// `H_j` for the requested indices only, with `n` samples and no alias check.
pub fn laurent_coeffs_at(phi: &LaurentTriple, js: &[i64], n: usize) -> Result<LaurentCoeffs> {
    let settings = NumericSettings::default();
    let m = phi.order();
    let jmax = js.iter().map(|j| j.unsigned_abs() as usize).max().unwrap_or(0);
    if n <= 2 * jmax {
        return Err(Error::DomainError(format!(
            "{n} samples cannot resolve coefficient index {jmax}"
        )));
    }
    let root = |k: usize| {
        let a = 2.0 * PI * (k % n) as f64 / n as f64;
        c64::new(a.cos(), a.sin())
    };
    let partials = parallel::map_chunks(n, 32, parallel::thread_count(), |range| -> Result<Vec<Mat<c64>>> {
        let mut acc: Vec<Mat<c64>> = js.iter().map(|_| Mat::zeros(m, m)).collect();
        for k in range {
            let psi = phi.psi(root(k), &settings)?;
            for (h, &j) in acc.iter_mut().zip(js) {
                // ω^{−jk}
                let w = root((n - ((j.rem_euclid(n as i64) as usize) * k) % n) % n);
                faer::zip!(h.as_mut(), psi.as_ref()).for_each(|faer::unzip!(h, p)| *h += *p * w);
            }
        }
        Ok(acc)
    });
    let mut sums: Vec<Mat<c64>> = js.iter().map(|_| Mat::zeros(m, m)).collect();
    for part in partials {
        for (s, p) in sums.iter_mut().zip(part?) {
            *s += p;
        }
    }
    let scale = 1.0 / n as f64;
    let mut coeffs = BTreeMap::new();
    for (&j, s) in js.iter().zip(sums) {
        let re = Mat::from_fn(m, m, |a, b| s[(a, b)].re * scale);
        let im = Mat::from_fn(m, m, |a, b| s[(a, b)].im * scale);
        let (nre, nim) = (linalg::norm_fro(re.as_ref()), linalg::norm_fro(im.as_ref()));
        if nim > 1e-10 * nre.max(f64::MIN_POSITIVE) && nim > 1e-14 {
            return Err(Error::ConvergenceFailure(format!(
                "H_{j} has imaginary part {nim:e} for real coefficients"
            )));
        }
        coeffs.insert(j, re);
    }
    Ok(LaurentCoeffs {
        coeffs,
        sample_count: n,
    })
}

/// Minimal solutions of the four quadratic matrix equations
/// `A₁X² + A₀X + A₋₁ = 0` (G), `A₁ + A₀X + A₋₁X² = 0` (Ĝ),
/// `A₁ + XA₀ + X²A₋₁ = 0` (R) and `X²A₁ + XA₀ + A₋₁ = 0` (R̂).
#[derive(Clone, Debug)]
pub struct QuadraticSolutions {
    pub g: Matrix,
    pub g_hat: Matrix,
    pub r: Matrix,
    pub r_hat: Matrix,
    /// Relative residuals in the order G, Ĝ, R, R̂.
    pub residuals: [f64; 4],
    /// Spectral radii in the order G, Ĝ, R, R̂.
    pub radii: [f64; 4],
    /// `lim A₀^(h)`.
    pub a0_limit: Matrix,
    /// `H_{ψ,0} = (lim A₀^(h))⁻¹`.
    pub h0: Matrix,
    pub steps: usize,
    pub history: Vec<StepRecord>,
    /// Largest `‖H_j − (coupling)‖/‖H₀‖` over `j = ±1, ±2`, when checked.
    pub coupling_error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct QuadraticOptions {
    pub stop: StoppingRule,
    pub settings: NumericSettings,
    pub residual_tol: f64,
    /// Compare against quadrature Laurent coefficients.
    pub verify_couplings: bool,
    pub coupling_tol: f64,
}

impl Default for QuadraticOptions {
    fn default() -> Self {
        QuadraticOptions {
            stop: StoppingRule::default(),
            settings: NumericSettings::default(),
            residual_tol: 1e-8,
            verify_couplings: true,
            coupling_tol: 1e-7,
        }
    }
}

pub fn solve_quadratic_equations(phi: &LaurentTriple, policy: &TruncationPolicy) -> Result<QuadraticSolutions> {
    solve_quadratic_equations_with(phi, policy, &QuadraticOptions::default())
}

pub fn solve_quadratic_equations_with(
    phi: &LaurentTriple,
    policy: &TruncationPolicy,
    opts: &QuadraticOptions,
) -> Result<QuadraticSolutions> {
    let run = run_cr_with(phi, policy, &opts.settings, &opts.stop, |_| {})?;
    let state = run.into_converged()?;
    let (am, a0, ap) = (&phi.a_minus, &phi.a_zero, &phi.a_plus);
    let hat = state.a_hat.to_dense();
    let tilde = state.a_tilde.to_dense();
    let solve = |a: &Matrix, b: MatRef<'_, f64>| linalg::lu_solve_with(a.as_ref(), b, &opts.settings);
    let solve_right = |b: &Matrix, a: &Matrix| -> Result<Matrix> {
        // b a⁻¹ = (a⁻ᵀ bᵀ)ᵀ
        Ok(solve(&a.transpose().to_owned(), b.transpose())?.transpose().to_owned())
    };
    let g = -solve(&hat, am.as_ref())?;
    let r = -solve_right(ap, &hat)?;
    let g_hat = -solve(&tilde, ap.as_ref())?;
    let r_hat = -solve_right(am, &tilde)?;

    let scale = linalg::norm2(ap.as_ref()) + linalg::norm2(a0.as_ref()) + linalg::norm2(am.as_ref());
    let scale = if scale == 0.0 { 1.0 } else { scale };
    let res = |x: &Matrix, left: bool, a2: &Matrix, c: &Matrix| {
        // left: a2 X² + A₀ X + c,  right: X² a2 + X A₀ + c
        let x2 = x * x;
        let r = if left {
            a2 * &x2 + a0 * x + c
        } else {
            &x2 * a2 + x * a0 + c
        };
        linalg::norm2(r.as_ref()) / scale
    };
    let residuals = [
        res(&g, true, ap, am),
        res(&g_hat, true, am, ap),
        res(&r, false, am, ap),
        res(&r_hat, false, ap, am),
    ];
    let names = ["G", "G_hat", "R", "R_hat"];
    for (name, &value) in names.iter().zip(&residuals) {
        if !(value <= opts.residual_tol) {
            return Err(Error::ResidualTooLarge {
                what: format!("quadratic equation for {name}"),
                residual: value,
                tolerance: opts.residual_tol,
            });
        }
    }
    let mut radii = [0.0; 4];
    for (i, x) in [&g, &g_hat, &r, &r_hat].into_iter().enumerate() {
        radii[i] = linalg::spectral_radius(x.as_ref())?;
        if radii[i] >= 1.0 + 1e-8 {
            return Err(Error::SpectralRadiusViolation {
                what: names[i].into(),
                radius: radii[i],
            });
        }
    }
    let a0_limit = state.a0_limit();
    let h0 = state.h0_limit()?;
    let mut sol = QuadraticSolutions {
        g,
        g_hat,
        r,
        r_hat,
        residuals,
        radii,
        a0_limit,
        h0,
        steps: state.h,
        history: state.history.clone(),
        coupling_error: None,
    };
    if opts.verify_couplings {
        let err = coupling_error(phi, &sol)?;
        if !(err <= opts.coupling_tol) {
            return Err(Error::ResidualTooLarge {
                what: "Laurent coefficient coupling".into(),
                residual: err,
                tolerance: opts.coupling_tol,
            });
        }
        sol.coupling_error = Some(err);
    }
    Ok(sol)
}

/// Sample count resolving coefficients of ψ to about `1e-14` relative accuracy
/// when the splitting radius is `t`.
pub fn sample_count_for_radius(t: f64) -> usize {
    let j = if t <= 0.0 {
        2.0
    } else {
        (1e-14f64.ln() / t.min(1.0 - 1e-6).ln()).ceil() + 2.0
    };
    ((2.0 * j) as usize).max(64).next_power_of_two()
}

/// Largest of `‖H_{±j} − coupling‖/‖H₀‖` for `j = 1, 2`, where the couplings are
/// `H_j = ĜʲH₀ = H₀Rʲ` and `H_{−j} = GʲH₀ = H₀R̂ʲ`.
pub fn coupling_error(phi: &LaurentTriple, sol: &QuadraticSolutions) -> Result<f64> {
    let t = sol.radii.iter().copied().fold(0.0, f64::max);
    let coeffs = laurent_coeffs_at(phi, &[-2, -1, 0, 1, 2], sample_count_for_radius(t))?;
    let h = |j: i64| coeffs.get(j).expect("requested index");
    let h0 = h(0);
    let n0 = linalg::norm2(h0.as_ref()).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    let (mut gp, mut ghp, mut rp, mut rhp) = (h0.clone(), h0.clone(), h0.clone(), h0.clone());
    for j in 1..=2i64 {
        ghp = &sol.g_hat * &ghp;
        gp = &sol.g * &gp;
        rp = &rp * &sol.r;
        rhp = &rhp * &sol.r_hat;
        for (coef, pred) in [(h(j), &ghp), (h(j), &rp), (h(-j), &gp), (h(-j), &rhp)] {
            worst = worst.max(linalg::norm2((coef - pred).as_ref()) / n0);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tridiagonal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_state(h: usize) -> CrState {
        let mut s = CrState::new(LaurentTriple::scalar(-1.0, 4.0, -1.0));
        for _ in 0..h {
            s = cr_step(&s, &TruncationPolicy::default()).unwrap();
        }
        s
    }

    fn random_triple(m: usize, seed: u64) -> LaurentTriple {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = |s: f64| Mat::from_fn(m, m, |_, _| s * rng.random::<f64>());
        let am = r(0.5 / m as f64);
        let ap = r(0.3 / m as f64);
        let mut a0 = r(0.1 / m as f64);
        for i in 0..m {
            a0[(i, i)] -= 1.0;
        }
        LaurentTriple::new(am, a0, ap).unwrap()
    }

    #[test]
    fn decoupled_is_fixed_point() {
        let m = tridiagonal(4, 1.0, 3.0, 0.5);
        let z = Mat::<f64>::zeros(4, 4);
        let s0 = CrState::new(LaurentTriple::new(z.clone(), m.clone(), z.clone()).unwrap());
        let s1 = cr_step(&s0, &TruncationPolicy::default()).unwrap();
        assert_eq!(s1.triple.a_zero, m);
        assert_eq!(s1.a_hat, m);
        assert_eq!(s1.a_tilde, m);
        assert_eq!(s1.triple.a_plus.norm_max(), 0.0);
        let run = run_cr(&s0.triple, &TruncationPolicy::default(), &StoppingRule::default()).unwrap();
        assert!(run.converged);
        assert_eq!(run.state.h, 0);
    }

    #[test]
    fn scalar_steps_by_hand() {
        let s1 = scalar_state(1);
        assert!((s1.triple.a_minus[(0, 0)] + 0.25).abs() < 1e-15);
        assert!((s1.triple.a_plus[(0, 0)] + 0.25).abs() < 1e-15);
        assert!((s1.triple.a_zero[(0, 0)] - 3.5).abs() < 1e-15);
        assert!((s1.a_hat[(0, 0)] - 3.75).abs() < 1e-15);
        assert!((s1.a_tilde[(0, 0)] - 3.75).abs() < 1e-15);
        let s2 = scalar_state(2);
        assert!((s2.triple.a_zero[(0, 0)] - 97.0 / 28.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_limit_is_two_sqrt_three() {
        let run = run_cr(
            &LaurentTriple::scalar(-1.0, 4.0, -1.0),
            &TruncationPolicy::default(),
            &StoppingRule::default(),
        )
        .unwrap();
        assert!(run.converged);
        assert!(run.state.h <= 6);
        assert!((run.state.triple.a_zero[(0, 0)] - 12f64.sqrt()).abs() < 1e-10);
        assert!((run.state.a_hat[(0, 0)] - (2.0 + 3f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn no_convergence_carries_history() {
        let run = run_cr(
            &LaurentTriple::scalar(-1.0, 4.0, -1.0),
            &TruncationPolicy::default(),
            &StoppingRule {
                tol: 1e-14,
                max_steps: 1,
            },
        )
        .unwrap();
        assert!(!run.converged);
        match run.into_converged() {
            Err(Error::NoConvergence { history }) => assert_eq!(history.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn breakdown_reports_step() {
        // a0 = 0 at the first step
        let r = cr_step(
            &CrState::new(LaurentTriple::scalar(1.0, 0.0, 1.0)),
            &TruncationPolicy::default(),
        );
        assert!(matches!(r, Err(Error::Breakdown { step: 1, .. })));
    }

    #[test]
    fn psi_h_scalar_identity() {
        let s1 = scalar_state(1);
        let one = c64::new(1.0, 0.0);
        let v = s1.psi_h(one).unwrap()[(0, 0)];
        assert!((v.re - 1.0 / 3.0).abs() < 1e-15 && v.im.abs() < 1e-15);
        let s0 = scalar_state(0);
        assert!((s0.psi_h(one).unwrap()[(0, 0)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn consistency_identity_random() {
        let phi = random_triple(8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let settings = NumericSettings::default();
        let mut state = CrState::new(phi.clone());
        for h in 1..=4usize {
            state = cr_step(&state, &TruncationPolicy::default()).unwrap();
            let k = 1usize << h;
            for _ in 0..16 {
                let th = 2.0 * PI * rng.random::<f64>();
                let z = c64::new(th.cos(), th.sin());
                let lhs = state.psi_h(z.powi(k as i32)).unwrap();
                let mut avg = Mat::<c64>::zeros(8, 8);
                for j in 0..k {
                    let a = 2.0 * PI * j as f64 / k as f64;
                    avg += phi.psi(z * c64::new(a.cos(), a.sin()), &settings).unwrap();
                }
                let avg = avg * faer::Scale(c64::new(1.0 / k as f64, 0.0));
                let err = linalg::norm2_c((&lhs - &avg).as_ref());
                assert!(err <= 1e-10 * linalg::norm2_c(lhs.as_ref()), "h={h} err={err}");
            }
        }
    }

    #[test]
    fn laurent_identity_and_scalar() {
        let id = Mat::<f64>::identity(3, 3);
        let z = Mat::<f64>::zeros(3, 3);
        let c = laurent_coeffs(&LaurentTriple::new(z.clone(), id.clone(), z).unwrap(), 4, None).unwrap();
        assert!((c.get(0).unwrap() - &id).norm_max() < 1e-15);
        assert!(c.get(3).unwrap().norm_max() < 1e-15);

        let c = laurent_coeffs(&LaurentTriple::scalar(-1.0, 4.0, -1.0), 20, None).unwrap();
        let h0 = c.get(0).unwrap()[(0, 0)];
        assert!((h0 - 1.0 / 12f64.sqrt()).abs() < 1e-12);
        let ratio = c.get(1).unwrap()[(0, 0)] / h0;
        assert!((ratio - (2.0 - 3f64.sqrt())).abs() < 1e-12);

        let r = laurent_coeffs(&LaurentTriple::scalar(-1.0, 4.0, -1.0), 3, None);
        assert!(matches!(r, Err(Error::AliasWarning { .. })));
    }

    #[test]
    fn quadratic_scalar_and_zero_cases() {
        let s =
            solve_quadratic_equations(&LaurentTriple::scalar(-1.0, 4.0, -1.0), &TruncationPolicy::default()).unwrap();
        assert!((s.g[(0, 0)] - (2.0 - 3f64.sqrt())).abs() < 1e-12);
        assert!(s.coupling_error.unwrap() < 1e-10);

        let a0 = tridiagonal(5, -1.0, 4.0, -1.0);
        let ap = tridiagonal(5, 0.0, -1.0, 0.2);
        let phi = LaurentTriple::new(Mat::zeros(5, 5), a0, ap).unwrap();
        let s = solve_quadratic_equations(&phi, &TruncationPolicy::default()).unwrap();
        assert_eq!(s.g.norm_max(), 0.0);
        assert_eq!(s.r_hat.norm_max(), 0.0);
    }

    #[test]
    fn quadratic_random_and_palindromic() {
        let s = solve_quadratic_equations(&random_triple(10, 7), &TruncationPolicy::default()).unwrap();
        assert!(s.residuals.iter().all(|&r| r < 1e-12), "{:?}", s.residuals);
        assert!(s.radii.iter().all(|&r| r < 1.0));

        let m = 12;
        let phi = LaurentTriple::new(
            -Mat::<f64>::identity(m, m),
            tridiagonal(m, -1.0, 4.0, -1.0),
            -Mat::<f64>::identity(m, m),
        )
        .unwrap();
        let s = solve_quadratic_equations(&phi, &TruncationPolicy::default()).unwrap();
        assert!((&s.g - &s.g_hat).norm_max() < 1e-12);
        assert!((&s.r - &s.r_hat).norm_max() < 1e-12);
        // limit of ψ^(h) at z = 1 matches the quadrature H₀
        let c = laurent_coeffs_at(&phi, &[0], 256).unwrap();
        assert!((c.get(0).unwrap() - &s.h0).norm_max() < 1e-8 * s.h0.norm_max());
    }

    #[test]
    fn hodlr_backend_tracks_dense() {
        let m = 64;
        let phi = LaurentTriple::new(
            -Mat::<f64>::identity(m, m),
            tridiagonal(m, -1.0, 4.0, -1.0),
            -Mat::<f64>::identity(m, m),
        )
        .unwrap();
        let policy = TruncationPolicy::default();
        let mut d = CrState::new(phi.clone());
        let mut h = CrState::new(phi.to_hodlr(&policy, 8));
        for _ in 0..5 {
            d = cr_step(&d, &policy).unwrap();
            h = cr_step(&h, &policy).unwrap();
            let hd = h.triple.to_dense();
            for (a, b) in [(&hd.a_zero, &d.triple.a_zero), (&hd.a_plus, &d.triple.a_plus)] {
                let err = linalg::norm2((a - b).as_ref()) / linalg::norm2(d.triple.a_zero.as_ref());
                assert!(err <= 10.0 * policy.rel_tol, "{err:e}");
            }
        }
        assert!(h.last_record().max_offdiag_rank > 0);
        let line = h.last_record().telemetry_line();
        assert_eq!(line.split_whitespace().count(), 5);
    }
}
