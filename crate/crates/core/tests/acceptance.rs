//! Acceptance suite: one PASS/FAIL line per criterion. Numeric arguments
//! select criteria, e.g. `cargo test --test acceptance -- 4 5`.

mod common;

use std::time::Instant;

use common::*;
use faer::Mat;
use qcr::cli::{bench_sweep, decay_data, loglog_slope, DOMINATION_FLOOR, POISSON_PRIOR};
use qcr::cr::{
    cr_step, laurent_coeffs, run_cr, sample_count_for_radius, solve_quadratic_equations, CrState, LaurentTriple,
    StoppingRule,
};
use qcr::decay::{elliptic_k, spectral_split, zolotarev_closed_form};
use qcr::hodlr::{HodlrMatrix, OffDiagBlock, TruncationPolicy};
use qcr::linalg::{self, c64};
use qcr::problems::{self, ProblemKind, DEFAULT_EPS, DEFAULT_SEED};
use qcr::qcr::{solve, QcrOptions};
use qcr::sylvester::{self, SylvesterOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (u32, &'static str, f64, fn() -> qcr::Result<Outcome>);

fn scalar_cr() -> qcr::Result<Outcome> {
    let phi = LaurentTriple::scalar(-1.0, 4.0, -1.0);
    let state = run_cr(&phi, &TruncationPolicy::default(), &StoppingRule::default())?.into_converged()?;
    let a0 = state.a0_limit()[(0, 0)];
    let h0 = laurent_coeffs(&phi, 16, None)?.get(0).unwrap()[(0, 0)];
    let oracle = laurent_oracle(&phi, &[0], 256)[0][(0, 0)];
    let e1 = (a0 - 2.0 * 3f64.sqrt()).abs();
    let e2 = (h0 - 1.0 / 12f64.sqrt()).abs();
    let e3 = (h0 - oracle).abs();
    Ok(outcome(
        e1 <= 1e-10 && e2 <= 1e-10 && e3 <= 1e-10 && state.h <= 6,
        format!(
            "steps {}, |a0 - 2sqrt3| {e1:.1e}, |H0 - 1/sqrt12| {e2:.1e}, |H0 - quadrature| {e3:.1e}",
            state.h
        ),
    ))
}

fn consistency_identity() -> qcr::Result<Outcome> {
    let m = 16;
    let phi = problems::random_qbd(m, DEFAULT_SEED)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let points: Vec<c64> = (0..16)
        .map(|_| c64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
        .collect();
    let mut state = CrState::new(phi.clone());
    let mut worst: f64 = 0.0;
    for h in 1..=4u32 {
        state = cr_step(&state, &TruncationPolicy::default())?;
        let q = 1u32 << h;
        for &z in &points {
            let lhs = state.psi_h(z.powu(q))?;
            let mut avg = Mat::<c64>::zeros(m, m);
            for j in 0..q {
                avg += psi_oracle(
                    &phi,
                    c64::from_polar(1.0, std::f64::consts::TAU * j as f64 / q as f64) * z,
                );
            }
            let avg = Mat::from_fn(m, m, |r, c| avg[(r, c)] / q as f64);
            worst = worst.max(linalg::norm2_c((&lhs - &avg).as_ref()) / linalg::norm2_c(lhs.as_ref()));
        }
    }
    Ok(outcome(
        worst <= 1e-10,
        format!("max relative deviation {worst:.1e} over h = 1..4"),
    ))
}

fn quadratic_couplings() -> qcr::Result<Outcome> {
    let (mut res, mut rad, mut coup): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut cases = 0;
    for m in [8, 20, 35, 50] {
        for seed in 1..=2 {
            let phi = problems::random_qbd(m, seed)?;
            let sol = solve_quadratic_equations(&phi, &TruncationPolicy::default())?;
            res = sol.residuals.iter().copied().fold(res, f64::max);
            rad = sol.radii.iter().copied().fold(rad, f64::max);
            let t = spectral_split(&phi)?.t;
            let h = laurent_oracle(&phi, &[0, 1, 2], sample_count_for_radius(t));
            let n0 = linalg::norm2(h[0].as_ref());
            let gh2 = &sol.g_hat * &sol.g_hat;
            for (hj, pred) in [(&h[1], &sol.g_hat * &h[0]), (&h[2], &gh2 * &h[0])] {
                coup = coup.max(linalg::norm2((hj - &pred).as_ref()) / n0);
            }
            cases += 1;
        }
    }
    Ok(outcome(
        res <= 1e-8 && rad < 1.0 && coup <= 1e-7,
        format!("{cases} QBDs m <= 50: max residual {res:.1e}, max spectral radius {rad:.6}, max |H_j - G_hat^j H0|/|H0| {coup:.1e}"),
    ))
}

fn poisson_figure() -> qcr::Result<Outcome> {
    let m = 200;
    let phi = problems::poisson(m)?;
    let rows = 25;
    let d = decay_data(
        &phi,
        ProblemKind::Poisson,
        &TruncationPolicy::default(),
        StoppingRule::default(),
        OffDiagBlock::default(),
        rows,
    )?;
    let ratio = d.sigma[20] / d.sigma[0];
    let mut dominated = true;
    let mut checked = 0;
    for l in 1..=d.sigma.len().min(rows) {
        if d.sigma[l - 1] > DOMINATION_FLOOR {
            checked += 1;
            dominated &= d.sigma[l - 1] <= d.bound.for_sigma(l).unwrap();
        }
    }
    let prior_above = (2..=rows).all(|l| {
        let prior = POISSON_PRIOR.0 * POISSON_PRIOR.1.powi(l as i32 - 1);
        (prior - d.prior[l - 1]).abs() <= 1e-12 * prior && prior >= d.bound.for_sigma(l).unwrap()
    });
    Ok(outcome(
        ratio <= 1e-10 && dominated && prior_above,
        format!(
            "sigma21/sigma1 {ratio:.1e}, bound dominates {checked} sigmas above {DOMINATION_FLOOR:e}: {dominated}, prior line above bound for l >= 2: {prior_above}"
        ),
    ))
}

fn qbd_figure() -> qcr::Result<Outcome> {
    let m = 300;
    let phi = problems::random_qbd(m, DEFAULT_SEED)?;
    let rows = 25;
    let d = decay_data(
        &phi,
        ProblemKind::RandomQbd,
        &TruncationPolicy::default(),
        StoppingRule::default(),
        OffDiagBlock::default(),
        rows,
    )?;
    let below = d.sigma.iter().take(rows).position(|&s| s < 1e-12).map(|i| i + 1);
    let dominated = (1..=rows).all(|l| d.sigma[l - 1] <= d.bound.for_sigma(l).unwrap());
    Ok(outcome(
        below.is_some() && dominated,
        format!(
            "sigma_l < 1e-12 first at l = {}, Markov bound (gamma {:.2e}) dominates l = 1..{rows}: {dominated}",
            below.map_or("none".into(), |l| l.to_string()),
            d.bound.gamma
        ),
    ))
}

fn qcr_equivalence() -> qcr::Result<Outcome> {
    let mut worst: f64 = 0.0;
    let combos: Vec<(usize, usize)> = [7, 15, 31]
        .iter()
        .flat_map(|&n| [4, 8, 20].map(move |m| (n, m)))
        .collect();
    for k in 0..20u64 {
        let (n, m) = combos[k as usize % combos.len()];
        let sys = dominant_system(n, m, 100 + 7 * k);
        let x = solve(&sys, &QcrOptions::default())?.x;
        let big = linalg::lu_solve(sys.to_dense().as_ref(), sylvester::vec(sys.rhs.as_ref()).as_ref())?;
        let oracle = sylvester::unvec(big.as_ref(), m, n)?;
        worst = worst.max(rel_err(&x, &oracle));
    }
    let sys = problems::poisson_system(127, 127, DEFAULT_SEED)?;
    let sol = solve(&sys, &QcrOptions::default())?;
    let plain = linalg::norm_fro((sys.apply(sol.x.as_ref()) - &sys.rhs).as_ref()) / linalg::norm_fro(sys.rhs.as_ref());
    Ok(outcome(
        worst <= 1e-8 && sol.residual <= 1e-9,
        format!(
            "20 systems: max relative error {worst:.1e}; Poisson 127: residual {:.1e} (|Ax-b|/|b| = {plain:.1e})",
            sol.residual
        ),
    ))
}

fn sylvester_equivalence() -> qcr::Result<Outcome> {
    let p = problems::cd_problem(31, DEFAULT_EPS, DEFAULT_SEED)?;
    let sol = sylvester::solve_sylvester(&p, &SylvesterOptions::default())?;
    let k = linalg::lu_solve(p.kronecker().as_ref(), sylvester::vec(p.c.as_ref()).as_ref())?;
    let oracle = sylvester::unvec(k.as_ref(), 31, 31)?;
    let err = rel_err(&sol.x, &oracle);

    let n = 255;
    let p = problems::cd_problem(n, DEFAULT_EPS, DEFAULT_SEED)?;
    let sol = sylvester::solve_sylvester(&p, &SylvesterOptions::default())?;
    let mut r = -&p.c;
    for t in &p.terms {
        r += &t.a * &sol.x * t.b.to_dense(n);
    }
    let res = linalg::norm_fro(r.as_ref()) / linalg::norm_fro(p.c.as_ref());
    Ok(outcome(
        err <= 1e-8 && res <= 1e-8,
        format!(
            "n=31 relative error vs Kronecker LU {err:.1e}; n=255 residual {res:.1e} ({:.3}s)",
            sol.qcr.solve_seconds
        ),
    ))
}

fn complexity_trend() -> qcr::Result<Outcome> {
    let sizes = [63, 127, 255, 511];
    let rows = bench_sweep(&sizes, DEFAULT_SEED, &QcrOptions::default(), 3, true)?;
    let x: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.dense_seconds.unwrap()).collect();
    let slope = loglog_slope(&x, &t).unwrap();
    let dense = loglog_slope(&x, &d).unwrap();
    let doubling = t[3] / t[2];
    let times: Vec<String> = t.iter().zip(&d).map(|(a, b)| format!("{a:.3}/{b:.3}")).collect();
    Ok(outcome(
        (1.7..=2.6).contains(&slope) && dense - slope >= 0.5 && rows.iter().all(|r| r.passed),
        format!(
            "QCR slope {slope:.3}, dense block LU slope {dense:.3}, last doubling x{doubling:.2}; seconds QCR/dense {}",
            times.join(" ")
        ),
    ))
}

fn truncation_bound() -> qcr::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for case in 0..50u64 {
        let n = rng.random_range(16..=256usize);
        let leaf = [8, 16, 32][rng.random_range(0..3)];
        let l = rng.random_range(1..=6usize);
        let rate: f64 = rng.random_range(0.05..0.7);
        let kind = case % 3;
        let profile = move |k: usize| match kind {
            0 => rate.powi(k as i32),
            1 => 1.0 / (1.0 + k as f64).powi(3),
            _ => {
                if k < 3 {
                    1.0
                } else {
                    1e-6 * rate.powi(k as i32)
                }
            }
        };
        let a = planted(n, leaf, profile, 1000 + case);
        let h = HodlrMatrix::from_dense(a.as_ref(), &TruncationPolicy::rank(n), leaf);
        let t = h.truncate(&TruncationPolicy::rank(l));
        let err = linalg::norm2((&t.to_dense() - &a).as_ref());
        let levels = (n as f64 / leaf as f64).log2().ceil().max(1.0);
        let bound = max_block_sigma(&a, &h, l) * levels;
        let slack = 1e-13 * linalg::norm2(a.as_ref());
        ok &= err <= bound + slack;
        worst = worst.max(err / bound);
    }
    Ok(outcome(ok, format!("50 planted matrices: max error/bound {worst:.3}")))
}

fn elliptic_consistency() -> qcr::Result<Outcome> {
    let mut worst: f64 = 0.0;
    for i in 1..=9 {
        let x = i as f64 / 10.0;
        worst = worst.max((elliptic_k(x)? - elliptic_k_quadrature(x)).abs());
    }
    let delta: f64 = 0.99;
    let d4 = delta.powi(4);
    let rho = (-std::f64::consts::PI * elliptic_k_quadrature((1.0 - d4).sqrt())
        / (2.0 * elliptic_k_quadrature(delta * delta)))
    .exp();
    let rho_tilde = (-std::f64::consts::PI.powi(2) / (2.0 * (16.0 / (1.0 - d4)).ln())).exp();
    let z = zolotarev_closed_form(delta, 1)?;
    let exp_gap = (rho_tilde.ln() - rho.ln()).abs() / rho.ln().abs();
    let lib_gap = (z.rho - rho).abs().max((z.rho_tilde - rho_tilde).abs());
    Ok(outcome(
        worst <= 1e-10 && exp_gap <= 0.05 && lib_gap <= 1e-10,
        format!(
            "max |K - quadrature| {worst:.1e}; delta 0.99 exponent gap {:.2}%, library rho error {lib_gap:.1e}",
            100.0 * exp_gap
        ),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "scalar CR closed form", 1.0, scalar_cr),
        (2, "CR consistency identity", 5.0, consistency_identity),
        (3, "quadratic equations and couplings", 30.0, quadratic_couplings),
        (4, "Poisson m=200 decay", 120.0, poisson_figure),
        (5, "random QBD m=300 decay", 300.0, qbd_figure),
        (6, "QCR vs dense LU", 60.0, qcr_equivalence),
        (7, "Sylvester vs Kronecker LU", 120.0, sylvester_equivalence),
        (8, "complexity trend", 1800.0, complexity_trend),
        (9, "HODLR truncation bound", 120.0, truncation_bound),
        (10, "elliptic integral and Zolotarev", 1.0, elliptic_consistency),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, limit, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let result = run();
        let secs = started.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && secs <= limit, o.detail),
            Err(e) => (false, format!("error[{}]: {e}", e.code())),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {detail} [{secs:.2}s, limit {limit}s]",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
