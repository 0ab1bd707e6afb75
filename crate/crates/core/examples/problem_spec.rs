//! Problem specifications: defaults, TOML round trip and the generated systems.

use qcr::problems::{ProblemKind, ProblemSpec};

fn main() -> qcr::Result<()> {
    for kind in [
        ProblemKind::Poisson,
        ProblemKind::RandomQbd,
        ProblemKind::ConvectionDiffusion,
    ] {
        let spec = ProblemSpec::default_for(kind);
        println!("--- {kind}\n{}", spec.to_toml_string());
    }

    let spec = ProblemSpec::from_toml_str(
        r#"
kind = "convection-diffusion"
m = 63
n = 63
seed = 7

[params]
eps = 0.01
"#,
    )?;
    let p = spec.sylvester()?;
    println!("parsed: {} terms, C is {}x{}", p.terms.len(), p.c.nrows(), p.c.ncols());
    let sys = ProblemSpec {
        m: 16,
        n: 15,
        ..ProblemSpec::default_for(ProblemKind::RandomQbd)
    }
    .system()?;
    println!(
        "random QBD system: {} blocks of order {}",
        sys.block_count(),
        sys.block_size()
    );
    Ok(())
}
