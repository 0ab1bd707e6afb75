//! Singular values of the largest off-diagonal block of H₀ next to the
//! rational-function bounds: Poisson (default) or `random-qbd`.

use qcr::cli::decay_data;
use qcr::cr::StoppingRule;
use qcr::hodlr::{OffDiagBlock, TruncationPolicy};
use qcr::problems::{poisson, random_qbd, ProblemKind, DEFAULT_SEED};

fn main() -> qcr::Result<()> {
    let kind: ProblemKind = std::env::args().nth(1).unwrap_or("poisson".into()).parse()?;
    let (phi, m) = match kind {
        ProblemKind::RandomQbd => (random_qbd(300, DEFAULT_SEED)?, 300),
        _ => (poisson(200)?, 200),
    };
    let rows = 25;
    let d = decay_data(
        &phi,
        kind,
        &TruncationPolicy::default(),
        StoppingRule::default(),
        OffDiagBlock::default(),
        rows,
    )?;
    println!(
        "{kind} m={m}: t = {:.5}, {} CR steps, gamma = {:.3e}",
        d.t, d.steps, d.bound.gamma
    );
    println!(
        "{:>3} {:>10} {:>10} {:>10} {:>10}",
        "l", "sigma", "bound", "zolotarev", "prior"
    );
    let show = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.3e}"));
    for l in 1..=rows {
        println!(
            "{l:>3} {:>10} {:>10} {:>10} {:>10}",
            show(d.sigma.get(l - 1).copied()),
            show(d.bound.for_sigma(l)),
            show(d.zolotarev.as_ref().and_then(|z| z.for_sigma(l))),
            show(d.prior.get(l - 1).copied()),
        );
    }
    Ok(())
}
