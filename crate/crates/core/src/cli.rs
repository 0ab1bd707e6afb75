//! The `qcr` command line: `decay`, `solve`, `sylvester` and `bench` runs that
//! write plot-ready tables and a `manifest.toml` into an output directory.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::block::Backend;
use crate::cr::{solve_quadratic_equations_with, QuadraticOptions, StoppingRule};
use crate::decay::{self, BoundMode, DecayBound, DecaySets, Estimator};
use crate::error::{Error, Result};
use crate::hodlr::{self, OffDiagBlock, TruncationPolicy, DEFAULT_LEAF_SIZE};
use crate::linalg::{self, Matrix};
use crate::parallel;
use crate::problems::{self, ProblemKind, ProblemSpec};
use crate::qcr::{self, QcrOptions};
use crate::sylvester::{self, GeneralizedSylvesterProblem, SylvesterOptions};
use crate::table::{cell, TableFormat};

/// Prior-work line of the Poisson `m = 200` figure: `260.65·0.995^{l−1}`.
pub const POISSON_PRIOR: (f64, f64) = (260.65, 0.995);

/// Singular values at or below this level are rounding noise and are not
/// compared against the bounds.
pub const DOMINATION_FLOOR: f64 = 1e-15;

#[derive(Parser, Debug)]
#[command(
    name = "qcr",
    version,
    about = "Cyclic reduction experiments with HODLR block arithmetic"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Off-diagonal singular values of H0 and their bounds (decay.dat).
    Decay {
        #[command(flatten)]
        common: CommonArgs,
        /// Rows of decay.dat.
        #[arg(long, default_value_t = 25)]
        rows: usize,
    },
    /// Block tridiagonal block-Toeplitz solve (solution, timing.dat).
    Solve {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generalized Sylvester equation, from a text file or the convection-diffusion generator.
    Sylvester {
        #[command(flatten)]
        common: CommonArgs,
        /// Problem in the text format of `GeneralizedSylvesterProblem::write_text`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Diffusion coefficient.
        #[arg(long, allow_negative_numbers = true)]
        eps: Option<f64>,
    },
    /// Poisson n = m size sweep with a log-log fit of time against size (bench.dat).
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Timed repetitions per size; the median is reported.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Also time the dense block LU for comparison.
        #[arg(long)]
        contrast: bool,
    },
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Problem kind (poisson, random-qbd, convection-diffusion) or a .toml ProblemSpec.
    #[arg(long)]
    pub problem: Option<String>,
    /// Block order.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of blocks.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative truncation tolerance of the HODLR arithmetic.
    #[arg(long, default_value_t = 1e-12, allow_negative_numbers = true)]
    pub tol: f64,
    #[arg(long)]
    pub max_rank: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_LEAF_SIZE)]
    pub leaf_size: usize,
    #[arg(long, default_value_t = Backend::Hodlr)]
    pub backend: Backend,
    /// Residual tolerance (default depends on the command and backend).
    #[arg(long, allow_negative_numbers = true)]
    pub tol_res: Option<f64>,
    /// Comma-separated sizes, each run with n = m = size.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = TableFormat::Dat)]
    pub emit: TableFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Decay,
    Solve,
    Sylvester,
    Bench,
}

#[derive(Clone, Debug)]
pub enum ProblemSource {
    Spec(ProblemSpec),
    Input(PathBuf),
}

/// Everything a run depends on, validated.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: CommandKind,
    pub problem: ProblemSource,
    pub sizes: Vec<usize>,
    pub policy: TruncationPolicy,
    pub leaf_size: usize,
    pub backend: Backend,
    pub stop: StoppingRule,
    pub tol_res: Option<f64>,
    pub out: PathBuf,
    pub emit: TableFormat,
}

impl RunConfig {
    fn build(command: CommandKind, args: &CommonArgs, input: Option<PathBuf>, eps: Option<f64>) -> Result<Self> {
        let problem = match input {
            Some(path) => ProblemSource::Input(path),
            None => ProblemSource::Spec(resolve_spec(command, args, eps)?),
        };
        let policy = TruncationPolicy {
            rel_tol: args.tol,
            max_rank: args.max_rank,
            ..TruncationPolicy::default()
        };
        let config = RunConfig {
            command,
            problem,
            sizes: args.sizes.clone(),
            policy,
            leaf_size: args.leaf_size,
            backend: args.backend,
            stop: StoppingRule::default(),
            tol_res: args.tol_res,
            out: args.out.clone(),
            emit: args.emit,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if let Some(t) = self.tol_res {
            if !(t > 0.0) {
                return Err(Error::DomainError(format!("residual tolerance {t} must be positive")));
            }
        }
        if self.leaf_size == 0 {
            return Err(Error::DomainError("leaf size must be positive".into()));
        }
        if self.sizes.contains(&0) {
            return Err(Error::DomainError("sizes must be positive".into()));
        }
        if let ProblemSource::Spec(spec) = &self.problem {
            spec.validate()?;
        }
        fs::create_dir_all(&self.out)?;
        let probe = self.out.join(".qcr-write-test");
        File::create(&probe)?;
        fs::remove_file(probe)?;
        Ok(())
    }

    fn spec(&self) -> Result<&ProblemSpec> {
        match &self.problem {
            ProblemSource::Spec(s) => Ok(s),
            ProblemSource::Input(p) => Err(Error::DomainError(format!(
                "{} takes a problem spec, not an input file ({})",
                command_name(self.command),
                p.display()
            ))),
        }
    }

    fn qcr_options(&self) -> QcrOptions {
        QcrOptions {
            backend: self.backend,
            policy: self.policy,
            leaf_size: self.leaf_size,
            tol_res: self.tol_res,
            ..QcrOptions::default()
        }
    }

    fn table_path(&self, stem: &str) -> PathBuf {
        self.out.join(format!("{stem}.{}", self.emit.extension()))
    }
}

fn command_name(c: CommandKind) -> &'static str {
    match c {
        CommandKind::Decay => "decay",
        CommandKind::Solve => "solve",
        CommandKind::Sylvester => "sylvester",
        CommandKind::Bench => "bench",
    }
}

fn resolve_spec(command: CommandKind, args: &CommonArgs, eps: Option<f64>) -> Result<ProblemSpec> {
    let default_kind = match command {
        CommandKind::Sylvester => ProblemKind::ConvectionDiffusion,
        _ => ProblemKind::Poisson,
    };
    let mut spec = match args.problem.as_deref() {
        None => ProblemSpec::default_for(default_kind),
        Some(p) if p.ends_with(".toml") => ProblemSpec::load(p)?,
        Some(p) => ProblemSpec::default_for(p.parse()?),
    };
    if let Some(m) = args.m {
        spec.m = m;
        if spec.kind == ProblemKind::ConvectionDiffusion && args.n.is_none() {
            spec.n = m;
        }
    }
    if let Some(n) = args.n {
        spec.n = n;
        if spec.kind == ProblemKind::ConvectionDiffusion && args.m.is_none() {
            spec.m = n;
        }
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if eps.is_some() {
        spec.params.eps = eps;
    }
    Ok(spec)
}

/// `manifest.toml`: enough to repeat the run on the same platform.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: CommandKind,
    pub argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub sizes: Vec<usize>,
    pub threads: usize,
    pub tolerances: Tolerances,
    pub passed: bool,
    pub wall_seconds: BTreeMap<String, f64>,
    pub results: toml::Table,
    pub files: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rank: Option<usize>,
    pub leaf_size: usize,
    pub backend: String,
    pub cr_tol: f64,
    pub cr_max_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
}

/// Outcome of one command.
#[derive(Debug, Default)]
pub struct Report {
    pub passed: bool,
    pub wall_seconds: BTreeMap<String, f64>,
    pub results: toml::Table,
    pub files: Vec<PathBuf>,
    pub residual_tol: Option<f64>,
}

impl Report {
    fn new() -> Self {
        Report {
            passed: true,
            ..Default::default()
        }
    }

    fn set(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.results.insert(key.into(), value.into());
    }

    fn time(&mut self, key: &str, since: Instant) {
        self.wall_seconds.insert(key.into(), since.elapsed().as_secs_f64());
    }
}

fn toml_f64(v: f64) -> toml::Value {
    toml::Value::Float(v)
}

fn toml_floats(v: &[f64]) -> toml::Value {
    toml::Value::Array(v.iter().map(|&x| toml_f64(x)).collect())
}

/// Parses `argv` and runs the command. Returns the process exit code:
/// 0 when every residual check passed, 1 when one failed, 2 on errors.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, argv) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            2
        }
    }
}

/// Runs a parsed command and writes its manifest. `Ok(false)` means a residual check failed.
pub fn run(cli: Cli, argv: Vec<String>) -> Result<bool> {
    let started = Instant::now();
    let (config, mut report) = match &cli.command {
        Command::Decay { common, rows } => {
            let config = RunConfig::build(CommandKind::Decay, common, None, None)?;
            let report = cmd_decay(&config, *rows)?;
            (config, report)
        }
        Command::Solve { common } => {
            let config = RunConfig::build(CommandKind::Solve, common, None, None)?;
            let report = cmd_solve(&config)?;
            (config, report)
        }
        Command::Sylvester { common, input, eps } => {
            let config = RunConfig::build(CommandKind::Sylvester, common, input.clone(), *eps)?;
            let report = cmd_sylvester(&config)?;
            (config, report)
        }
        Command::Bench { common, reps, contrast } => {
            let config = RunConfig::build(CommandKind::Bench, common, None, None)?;
            let report = cmd_bench(&config, *reps, *contrast)?;
            (config, report)
        }
    };
    report.time("total", started);
    write_manifest(&config, &report, argv)?;
    if !report.passed {
        eprintln!("error[residual_too_large]: a residual check failed; see manifest.toml");
    }
    Ok(report.passed)
}

fn write_manifest(config: &RunConfig, report: &Report, argv: Vec<String>) -> Result<()> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        command: config.command,
        argv,
        problem: match &config.problem {
            ProblemSource::Spec(s) => Some(s.clone()),
            ProblemSource::Input(_) => None,
        },
        input: match &config.problem {
            ProblemSource::Input(p) => Some(p.display().to_string()),
            ProblemSource::Spec(_) => None,
        },
        sizes: config.sizes.clone(),
        threads: parallel::thread_count(),
        tolerances: Tolerances {
            rel_tol: config.policy.rel_tol,
            abs_tol: config.policy.abs_tol,
            max_rank: config.policy.max_rank,
            leaf_size: config.leaf_size,
            backend: config.backend.to_string(),
            cr_tol: config.stop.tol,
            cr_max_steps: config.stop.max_steps,
            residual_tol: report.residual_tol,
        },
        passed: report.passed,
        wall_seconds: report.wall_seconds.clone(),
        results: report.results.clone(),
        files: report
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(config.out.join("manifest.toml"), text)?;
    Ok(())
}

/// Singular values of an off-diagonal block of `H₀` with the bound curves
/// for the `decay.dat` columns.
#[derive(Clone, Debug)]
pub struct DecayData {
    pub sigma: Vec<f64>,
    pub bound: DecayBound,
    pub zolotarev: Option<DecayBound>,
    pub prior: Vec<f64>,
    pub t: f64,
    pub steps: usize,
    pub residuals: [f64; 4],
    pub history: Vec<crate::error::StepRecord>,
}

/// Poisson problems use the symmetric mode with the greedy estimate; other
/// problems use the general mode with the Markov estimate.
pub fn decay_data(
    phi: &crate::cr::LaurentTriple,
    kind: ProblemKind,
    policy: &TruncationPolicy,
    stop: StoppingRule,
    block: OffDiagBlock,
    rows: usize,
) -> Result<DecayData> {
    let opts = QuadraticOptions {
        stop,
        verify_couplings: false,
        ..QuadraticOptions::default()
    };
    let sol = solve_quadratic_equations_with(phi, policy, &opts)?;
    let m = phi.order();
    let sigma = hodlr::offdiag_singular_values(sol.h0.as_ref(), &block)?;
    let (r0, nr, c0, nc) = block.locate(m, 2)?;
    let c = sol.h0.as_ref().submatrix(r0, c0, nr, nc);
    let sets = DecaySets::new(phi, block)?;
    let rows = rows.max(1);
    let (bound, zol_mode) = match kind {
        ProblemKind::Poisson => (
            decay::bound_curve(&sets, c, BoundMode::SymmetricPalindromic, Estimator::Greedy, rows - 1)?,
            BoundMode::SymmetricPalindromic,
        ),
        _ => (
            decay::bound_curve(&sets, c, BoundMode::General(&sol), Estimator::Markov, (rows - 1) / 2)?,
            BoundMode::General(&sol),
        ),
    };
    let zol_len = if bound.parity == 1 { rows - 1 } else { (rows - 1) / 2 };
    let zolotarev = decay::bound_curve(&sets, c, zol_mode, Estimator::ZolotarevClosedForm, zol_len).ok();
    let prior = if kind == ProblemKind::Poisson && m == 200 {
        decay::prior_line(POISSON_PRIOR.0, POISSON_PRIOR.1, rows)
    } else {
        decay::prior_line(2.0 * linalg::norm2(c), sets.split.t, rows)
    };
    Ok(DecayData {
        sigma,
        bound,
        zolotarev,
        prior,
        t: sets.split.t,
        steps: sol.steps,
        residuals: sol.residuals,
        history: sol.history,
    })
}

pub fn cmd_decay(config: &RunConfig, rows: usize) -> Result<Report> {
    let spec = config.spec()?;
    let mut report = Report::new();
    let started = Instant::now();
    let phi = match spec.kind {
        ProblemKind::Poisson => problems::poisson(spec.m)?,
        ProblemKind::RandomQbd => {
            let q = problems::random_qbd_detailed(spec.m, spec.seed)?;
            report.set("qbd_alpha", toml_f64(q.alpha));
            report.set("qbd_attempts", q.attempts as i64);
            q.phi
        }
        ProblemKind::ConvectionDiffusion => {
            return Err(Error::DomainError("decay needs a poisson or random-qbd problem".into()))
        }
    };
    report.time("generate", started);
    let started = Instant::now();
    let data = decay_data(
        &phi,
        spec.kind,
        &config.policy,
        config.stop,
        OffDiagBlock::default(),
        rows,
    )?;
    report.time("cr_and_bounds", started);

    let path = config.table_path("decay");
    let mut w = BufWriter::new(File::create(&path)?);
    decay::write_decay_table(
        &mut w,
        config.emit,
        rows,
        &data.sigma,
        Some(&data.bound),
        data.zolotarev.as_ref(),
        &data.prior,
    )?;
    w.flush()?;
    report.files.push(path);

    let tpath = config.out.join("cr_telemetry.dat");
    let mut w = BufWriter::new(File::create(&tpath)?);
    writeln!(w, "# h norm_Aminus norm_Aplus max_offdiag_rank elapsed_seconds")?;
    for r in &data.history {
        writeln!(w, "{}", r.telemetry_line())?;
    }
    w.flush()?;
    report.files.push(tpath);

    let residual_tol = QuadraticOptions::default().residual_tol;
    report.residual_tol = Some(residual_tol);
    report.passed = data.residuals.iter().all(|&r| r <= residual_tol);
    report.set("cr_steps", data.steps as i64);
    report.set("splitting_radius", toml_f64(data.t));
    report.set("quadratic_residuals", toml_floats(&data.residuals));
    report.set("bound_gamma", toml_f64(data.bound.gamma));
    report.set("sigma", toml_floats(&data.sigma[..data.sigma.len().min(rows)]));
    let dominated = (1..=rows.min(data.sigma.len()))
        .filter(|&l| data.sigma[l - 1] > DOMINATION_FLOOR)
        .all(|l| data.bound.for_sigma(l).is_none_or(|b| data.sigma[l - 1] <= b));
    report.set("bound_dominates", dominated);
    println!(
        "decay: {} m={} t={:.6} cr_steps={} rows={} -> {}",
        spec.kind,
        spec.m,
        data.t,
        data.steps,
        rows,
        path_name(&report.files[0])
    );
    Ok(report)
}

fn path_name(p: &Path) -> String {
    p.display().to_string()
}

fn problem_sizes(config: &RunConfig, spec: &ProblemSpec) -> Vec<ProblemSpec> {
    if config.sizes.is_empty() {
        vec![spec.clone()]
    } else {
        config
            .sizes
            .iter()
            .map(|&s| ProblemSpec {
                m: s,
                n: s,
                ..spec.clone()
            })
            .collect()
    }
}

/// Appends `size seconds residual` lines, writing the header for a new file.
fn append_timing(path: &Path, format: TableFormat, size: usize, seconds: f64, residual: f64) -> Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        format.write_header(&mut f, &["size", "seconds", "residual"])?;
    }
    format.write_row(&mut f, &[size.to_string(), cell(Some(seconds)), cell(Some(residual))])?;
    Ok(())
}

fn write_solution(path: &Path, x: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# {} {}", x.nrows(), x.ncols())?;
    linalg::write_dense(&mut w, x.as_ref())?;
    w.flush()?;
    Ok(())
}

pub fn cmd_solve(config: &RunConfig) -> Result<Report> {
    let spec = config.spec()?;
    let opts = config.qcr_options();
    let mut report = Report::new();
    report.residual_tol = Some(opts.residual_tolerance());
    let timing = config.table_path("timing");
    let mut runs = Vec::new();
    for spec in problem_sizes(config, spec) {
        let sys = spec.system()?;
        let sol = qcr::solve(&sys, &opts)?;
        for w in &sol.warnings {
            eprintln!("warning: {w}");
        }
        let path = config
            .out
            .join(format!("solution_{}_m{}_n{}.dat", spec.kind, spec.m, spec.n));
        write_solution(&path, &sol.x)?;
        append_timing(&timing, config.emit, spec.n, sol.solve_seconds, sol.residual)?;
        println!(
            "solve: {} m={} n={} backend={} seconds={:.4} residual={:e} {}",
            spec.kind,
            spec.m,
            spec.n,
            config.backend,
            sol.solve_seconds,
            sol.residual,
            if sol.passed() { "ok" } else { "FAILED" }
        );
        report.passed &= sol.passed();
        report.files.push(path);
        let mut run = toml::Table::new();
        run.insert("m".into(), (spec.m as i64).into());
        run.insert("n".into(), (spec.n as i64).into());
        run.insert("seconds".into(), toml_f64(sol.solve_seconds));
        run.insert("residual".into(), toml_f64(sol.residual));
        run.insert("fallback".into(), sol.used_fallback.into());
        run.insert("levels".into(), (sol.stats.levels as i64).into());
        run.insert("max_offdiag_rank".into(), (sol.stats.max_offdiag_rank as i64).into());
        runs.push(toml::Value::Table(run));
    }
    report.files.push(timing);
    report.set("runs", toml::Value::Array(runs));
    Ok(report)
}

pub fn cmd_sylvester(config: &RunConfig) -> Result<Report> {
    let tol = config.tol_res.unwrap_or(SylvesterOptions::default().tol_res);
    let opts = SylvesterOptions {
        qcr: QcrOptions {
            tol_res: Some(f64::INFINITY),
            ..config.qcr_options()
        },
        tol_res: f64::INFINITY,
    };
    let problems: Vec<(String, GeneralizedSylvesterProblem)> = match &config.problem {
        ProblemSource::Input(path) => {
            let p = GeneralizedSylvesterProblem::read_text(BufReader::new(File::open(path)?))?;
            let stem = path
                .file_stem()
                .map_or("input".into(), |s| s.to_string_lossy().into_owned());
            vec![(stem, p)]
        }
        ProblemSource::Spec(spec) => problem_sizes(config, spec)
            .into_iter()
            .map(|s| Ok((format!("{}_n{}", s.kind, s.n), s.sylvester()?)))
            .collect::<Result<_>>()?,
    };
    let mut report = Report::new();
    report.residual_tol = Some(tol);
    let timing = config.table_path("timing");
    let mut runs = Vec::new();
    for (name, problem) in problems {
        let sol = sylvester::solve_sylvester(&problem, &opts)?;
        for w in &sol.qcr.warnings {
            eprintln!("warning: {w}");
        }
        let passed = sol.residual <= tol;
        let path = config.out.join(format!("solution_{name}.dat"));
        write_solution(&path, &sol.x)?;
        append_timing(&timing, config.emit, problem.n(), sol.qcr.solve_seconds, sol.residual)?;
        println!(
            "sylvester: {name} m={} n={} seconds={:.4} residual={:e} {}",
            problem.m(),
            problem.n(),
            sol.qcr.solve_seconds,
            sol.residual,
            if passed { "ok" } else { "FAILED" }
        );
        report.passed &= passed;
        report.files.push(path);
        let mut run = toml::Table::new();
        run.insert("m".into(), (problem.m() as i64).into());
        run.insert("n".into(), (problem.n() as i64).into());
        run.insert("seconds".into(), toml_f64(sol.qcr.solve_seconds));
        run.insert("residual".into(), toml_f64(sol.residual));
        run.insert("fallback".into(), sol.qcr.used_fallback.into());
        runs.push(toml::Value::Table(run));
    }
    report.files.push(timing);
    report.set("runs", toml::Value::Array(runs));
    Ok(report)
}

/// Least-squares slope of `log y` against `log x`; `None` with fewer than two
/// distinct sizes.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// One row of a size sweep.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub size: usize,
    pub seconds: f64,
    pub residual: f64,
    pub passed: bool,
    pub dense_seconds: Option<f64>,
}

/// Median timings of the Poisson `n = m = size` solve for each size.
pub fn bench_sweep(
    sizes: &[usize],
    seed: u64,
    opts: &QcrOptions,
    reps: usize,
    contrast: bool,
) -> Result<Vec<BenchRow>> {
    let reps = reps.max(1);
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let sys = problems::poisson_system(size, size, seed)?;
        let mut times = Vec::with_capacity(reps);
        let mut last = None;
        for _ in 0..reps {
            let sol = qcr::solve(&sys, opts)?;
            times.push(sol.solve_seconds);
            last = Some(sol);
        }
        let sol = last.expect("at least one repetition");
        let dense_seconds = if contrast {
            let mut times = Vec::with_capacity(reps);
            for _ in 0..reps {
                let started = Instant::now();
                qcr::solve_dense_block_lu(&sys, &opts.settings)?;
                times.push(started.elapsed().as_secs_f64());
            }
            Some(median(&mut times))
        } else {
            None
        };
        rows.push(BenchRow {
            size,
            seconds: median(&mut times),
            residual: sol.residual,
            passed: sol.passed(),
            dense_seconds,
        });
    }
    Ok(rows)
}

pub const DEFAULT_BENCH_SIZES: [usize; 4] = [63, 127, 255, 511];

pub fn cmd_bench(config: &RunConfig, reps: usize, contrast: bool) -> Result<Report> {
    let spec = config.spec()?;
    if spec.kind != ProblemKind::Poisson {
        return Err(Error::DomainError("bench sweeps the poisson problem".into()));
    }
    let sizes = if config.sizes.is_empty() {
        DEFAULT_BENCH_SIZES.to_vec()
    } else {
        config.sizes.clone()
    };
    let opts = config.qcr_options();
    let mut report = Report::new();
    report.residual_tol = Some(opts.residual_tolerance());
    let started = Instant::now();
    let rows = bench_sweep(&sizes, spec.seed, &opts, reps, contrast)?;
    report.time("sweep", started);

    let path = config.table_path("bench");
    let mut w = BufWriter::new(File::create(&path)?);
    config
        .emit
        .write_header(&mut w, &["size", "seconds", "residual", "dense_seconds"])?;
    for r in &rows {
        config.emit.write_row(
            &mut w,
            &[
                r.size.to_string(),
                cell(Some(r.seconds)),
                cell(Some(r.residual)),
                cell(r.dense_seconds),
            ],
        )?;
    }
    w.flush()?;
    report.files.push(path);

    let x: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    let slope = loglog_slope(&x, &t);
    match slope {
        Some(s) => {
            println!("bench: {} exponent {s:.3} (target 2 plus a log factor)", config.backend);
            report.set("exponent", toml_f64(s));
        }
        None => {
            println!("bench: exponent unavailable (needs at least two sizes)");
            report.set("exponent", "unavailable");
        }
    }
    if contrast {
        let d: Vec<f64> = rows.iter().filter_map(|r| r.dense_seconds).collect();
        match loglog_slope(&x, &d) {
            Some(s) => {
                println!("bench: dense block LU exponent {s:.3}");
                report.set("dense_exponent", toml_f64(s));
            }
            None => report.set("dense_exponent", "unavailable"),
        }
    }
    for r in &rows {
        println!(
            "  size={} seconds={:.4} residual={:e}{}",
            r.size,
            r.seconds,
            r.residual,
            r.dense_seconds
                .map_or(String::new(), |d| format!(" dense_seconds={d:.4}"))
        );
    }
    report.passed = rows.iter().all(|r| r.passed);
    report.set("reps", reps.max(1) as i64);
    report.set(
        "sizes",
        toml::Value::Array(sizes.iter().map(|&s| (s as i64).into()).collect()),
    );
    report.set("seconds", toml_floats(&t));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 20.0, 40.0, 80.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[10.0], &[1.0]), None);
        assert_eq!(loglog_slope(&[10.0, 10.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn median_of_three() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0]), 2.5);
    }

    #[test]
    fn spec_overrides() {
        let cli = Cli::try_parse_from(["qcr", "sylvester", "--n", "31", "--eps", "0.1"]).unwrap();
        let Command::Sylvester { common, eps, .. } = cli.command else {
            panic!("wrong command")
        };
        let spec = resolve_spec(CommandKind::Sylvester, &common, eps).unwrap();
        assert_eq!(
            (spec.kind, spec.m, spec.n, spec.eps()),
            (ProblemKind::ConvectionDiffusion, 31, 31, 0.1)
        );
        let cli = Cli::try_parse_from(["qcr", "solve", "--problem", "random-qbd", "--m", "8", "--n", "7"]).unwrap();
        let Command::Solve { common } = cli.command else {
            panic!("wrong command")
        };
        let spec = resolve_spec(CommandKind::Solve, &common, None).unwrap();
        assert_eq!((spec.kind, spec.m, spec.n), (ProblemKind::RandomQbd, 8, 7));
    }

    #[test]
    fn rejects_bad_flags() {
        assert!(Cli::try_parse_from(["qcr", "solve", "--backend", "gpu"]).is_err());
        assert!(Cli::try_parse_from(["qcr", "solve", "--emit", "xml"]).is_err());
        let cli = Cli::try_parse_from(["qcr", "solve", "--tol", "-1"]).unwrap();
        let Command::Solve { common } = cli.command else {
            panic!("wrong command")
        };
        assert!(RunConfig::build(CommandKind::Solve, &common, None, None).is_err());
    }
}
