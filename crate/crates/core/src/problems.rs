//! Seeded generators for the Poisson, random QBD and convection–diffusion
//! test problems.

use std::path::Path;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cr::LaurentTriple;
use crate::decay;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::qcr::BlockTridToeplitzSystem;
use crate::sylvester::{self, GeneralizedSylvesterProblem};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;
pub const DEFAULT_EPS: f64 = 0.0333;
/// Row sums of `A₋₁ + (A₀ + I) + A₁` are at most `1 − QBD_MARGIN`.
pub const QBD_MARGIN: f64 = 1e-3;
const QBD_ATTEMPTS: u64 = 100;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[−0.5, 0.5)`.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    Mat::from_fn(rows, cols, |_, _| r.random::<f64>() - 0.5)
}

/// `A₀ = trid(−1, 4, −1)`, `A₋₁ = A₁ = −I`.
pub fn poisson(m: usize) -> Result<LaurentTriple> {
    if m < 2 {
        return Err(Error::DomainError(format!("block size {m} is below 2")));
    }
    LaurentTriple::new(
        -Matrix::identity(m, m),
        linalg::tridiagonal(m, -1.0, 4.0, -1.0),
        -Matrix::identity(m, m),
    )
}

/// A random QBD generator together with how it was obtained.
#[derive(Clone, Debug)]
pub struct RandomQbd {
    pub phi: LaurentTriple,
    /// `A₁` was scaled by `alpha` and `A₋₁` by `1/alpha`; `1` when the drawn
    /// blocks already split with margin.
    pub alpha: f64,
    pub attempts: u64,
}

fn draw_qbd(m: usize, r: &mut ChaCha8Rng) -> Result<LaurentTriple> {
    let vec = |r: &mut ChaCha8Rng| -> Vec<f64> { (0..m).map(|_| r.random::<f64>()).collect() };
    let u_low = vec(r);
    let u_up = vec(r);
    let mut blocks: Vec<Matrix> = (0..3)
        .map(|_| {
            let (v_low, v_up, d) = (vec(r), vec(r), vec(r));
            Mat::from_fn(m, m, |i, j| {
                if i > j {
                    u_low[i] * v_low[j]
                } else if i < j {
                    u_up[i] * v_up[j]
                } else {
                    d[i]
                }
            })
        })
        .collect();
    for i in 0..m {
        let total: f64 = blocks.iter().map(|b| b.row(i).iter().sum::<f64>()).sum();
        let s = (1.0 - QBD_MARGIN) / total;
        for b in &mut blocks {
            for j in 0..m {
                b[(i, j)] *= s;
            }
        }
    }
    let [am, n0, ap]: [Matrix; 3] = blocks.try_into().expect("three blocks");
    LaurentTriple::new(am, n0 - Matrix::identity(m, m), ap)
}

fn splits_with_margin(phi: &LaurentTriple) -> bool {
    decay::spectral_split(phi).is_ok_and(|s| 1.0 - s.t >= QBD_MARGIN)
}

/// Nonnegative `A₋₁`, `I + A₀`, `A₁` whose strictly triangular parts are
/// restrictions of dyads sharing their left vectors, rows scaled to sum to
/// `1 − QBD_MARGIN`. If the unit circle does not separate the eigenvalues with
/// `1 − t ≥ QBD_MARGIN`, `A₁, A₋₁` are rescaled by `α, α⁻¹` with
/// `α = √(|ξ_m||ξ_{m+1}|)`, centering the gap on the circle.
pub fn random_qbd_detailed(m: usize, seed: u64) -> Result<RandomQbd> {
    if m < 2 {
        return Err(Error::DomainError(format!("block size {m} is below 2")));
    }
    let mut r = rng(seed);
    for attempt in 1..=QBD_ATTEMPTS {
        let phi = draw_qbd(m, &mut r)?;
        if splits_with_margin(&phi) {
            return Ok(RandomQbd {
                phi,
                alpha: 1.0,
                attempts: attempt,
            });
        }
        let mut moduli: Vec<f64> = decay::eigenvalues(&phi)?.iter().map(|e| e.modulus()).collect();
        moduli.sort_by(f64::total_cmp);
        let alpha = (moduli[m - 1] * moduli[m]).sqrt();
        if !(alpha.is_finite() && alpha > 0.0) {
            continue;
        }
        let scaled = phi.rescaled(alpha);
        if splits_with_margin(&scaled) {
            return Ok(RandomQbd {
                phi: scaled,
                alpha,
                attempts: attempt,
            });
        }
    }
    Err(Error::GenerationFailure(format!(
        "no splitting with margin {QBD_MARGIN} after {QBD_ATTEMPTS} draws"
    )))
}

pub fn random_qbd(m: usize, seed: u64) -> Result<LaurentTriple> {
    Ok(random_qbd_detailed(m, seed)?.phi)
}

/// Block tridiagonal Poisson system: `n` diagonal blocks `trid_m(−1, 4, −1)`,
/// off-diagonal blocks `−I`, seeded random right-hand side.
pub fn poisson_system(n: usize, m: usize, seed: u64) -> Result<BlockTridToeplitzSystem> {
    let phi = poisson(m)?;
    if n == 0 {
        return Err(Error::DomainError("block count must be positive".into()));
    }
    BlockTridToeplitzSystem::new(phi.a_minus, phi.a_zero, phi.a_plus, random_matrix(m, n, seed))
}

/// Convection–diffusion Sylvester problem on an `n × n` interior grid with
/// `w₁(x) = 1 + (x+1)²/4` and a seeded random right-hand side.
pub fn cd_problem(n: usize, eps: f64, seed: u64) -> Result<GeneralizedSylvesterProblem> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::DomainError(format!(
            "diffusion coefficient {eps} must be positive"
        )));
    }
    sylvester::convection_diffusion_setup(n, eps, sylvester::default_convection, random_matrix(n, n, seed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Poisson,
    RandomQbd,
    ConvectionDiffusion,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(ProblemKind::Poisson),
            "random-qbd" => Ok(ProblemKind::RandomQbd),
            "convection-diffusion" => Ok(ProblemKind::ConvectionDiffusion),
            other => Err(Error::Parse(format!(
                "unknown problem `{other}` (expected poisson, random-qbd or convection-diffusion)"
            ))),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::Poisson => "poisson",
            ProblemKind::RandomQbd => "random-qbd",
            ProblemKind::ConvectionDiffusion => "convection-diffusion",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    /// Diffusion coefficient for convection–diffusion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

/// Problem description, stored as TOML:
///
/// ```toml
/// kind = "convection-diffusion"
/// m = 255
/// n = 255
/// seed = 12648430
///
/// [params]
/// eps = 0.0333
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub params: ProblemParams,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl ProblemSpec {
    /// Sizes used in the experiments: Poisson `m = 200`, QBD `m = 300`,
    /// convection–diffusion on a `255 × 255` grid.
    pub fn default_for(kind: ProblemKind) -> Self {
        let (m, n) = match kind {
            ProblemKind::Poisson => (200, 127),
            ProblemKind::RandomQbd => (300, 127),
            ProblemKind::ConvectionDiffusion => (255, 255),
        };
        ProblemSpec {
            kind,
            m,
            n,
            seed: DEFAULT_SEED,
            params: ProblemParams {
                eps: (kind == ProblemKind::ConvectionDiffusion).then_some(DEFAULT_EPS),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::DomainError("sizes must be positive".into()));
        }
        if self.kind == ProblemKind::ConvectionDiffusion && self.m != self.n {
            return Err(Error::DomainError(format!(
                "convection-diffusion uses a square grid, got m = {} and n = {}",
                self.m, self.n
            )));
        }
        match self.params.eps {
            Some(eps) if !(eps > 0.0 && eps.is_finite()) => {
                Err(Error::DomainError(format!("eps = {eps} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ProblemSpec = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("problem specs always serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn eps(&self) -> f64 {
        self.params.eps.unwrap_or(DEFAULT_EPS)
    }

    /// The matrix Laurent polynomial `φ(z)` of a Poisson or QBD problem.
    pub fn laurent(&self) -> Result<LaurentTriple> {
        self.validate()?;
        match self.kind {
            ProblemKind::Poisson => poisson(self.m),
            ProblemKind::RandomQbd => random_qbd(self.m, self.seed),
            ProblemKind::ConvectionDiffusion => Err(Error::DomainError(
                "convection-diffusion has no matrix Laurent polynomial; use the sylvester command".into(),
            )),
        }
    }

    /// Block tridiagonal system with `n` blocks of order `m` and a seeded right-hand side.
    pub fn system(&self) -> Result<BlockTridToeplitzSystem> {
        self.validate()?;
        match self.kind {
            ProblemKind::Poisson => poisson_system(self.n, self.m, self.seed),
            ProblemKind::RandomQbd => {
                let phi = random_qbd(self.m, self.seed)?;
                let rhs = random_matrix(self.m, self.n, self.seed.wrapping_add(1));
                BlockTridToeplitzSystem::new(phi.a_minus, phi.a_zero, phi.a_plus, rhs)
            }
            ProblemKind::ConvectionDiffusion => sylvester::assemble(&self.sylvester()?),
        }
    }

    pub fn sylvester(&self) -> Result<GeneralizedSylvesterProblem> {
        self.validate()?;
        match self.kind {
            ProblemKind::ConvectionDiffusion => cd_problem(self.n, self.eps(), self.seed),
            other => Err(Error::DomainError(format!("{other} is not a Sylvester problem"))),
        }
    }
}
