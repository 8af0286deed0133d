//! Command-line benchmark driver: load a matrix, run a one-time or repeated
//! solve and report per-phase wall times and factor statistics as JSON.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{read_matrix_market, CsrMatrix};
use crate::numeric::{factorize, refactorize, FactorOptions};
use crate::preprocess::{analyze, AnalyzeOptions, KernelMode, OrderingMethod};
use crate::trisolve::{solve, SolveOptions};

#[derive(Debug, Parser)]
#[command(name = "hybrid-lu", version, about = "Parallel sparse LU solver benchmark driver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factorize a Matrix Market matrix and solve one right-hand side.
    Solve(SolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelChoice {
    Auto,
    Rowrow,
    Suprow,
    Supsup,
}

impl KernelChoice {
    fn mode(self) -> Option<KernelMode> {
        match self {
            KernelChoice::Auto => None,
            KernelChoice::Rowrow => Some(KernelMode::RowRow),
            KernelChoice::Suprow => Some(KernelMode::SupRow),
            KernelChoice::Supsup => Some(KernelMode::SupSup),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderingChoice {
    Amd,
    Natural,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Matrix Market file (coordinate format).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Right-hand side: `ones`, `random:SEED` or a file of whitespace-separated values.
    #[arg(long, default_value = "ones")]
    pub rhs: RhsMode,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    /// Refactorize-and-solve cycles after the first solve.
    #[arg(long, default_value_t = 0)]
    pub repeat: usize,
    #[arg(long, value_enum, default_value_t = KernelChoice::Auto)]
    pub kernel: KernelChoice,
    #[arg(long, value_enum, default_value_t = OrderingChoice::Amd)]
    pub ordering: OrderingChoice,
    /// Relative size below which pivots are perturbed; 0 disables perturbation.
    #[arg(long, default_value_t = 1e-8)]
    pub perturb_eps: f64,
    /// Where to write the JSON report (default: stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Override a threshold, e.g. `--set max_supernode_rows=32`.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub set: Vec<String>,
    /// Relative random change applied to the values before each repetition.
    #[arg(long, value_name = "EPS")]
    pub perturb_values: Option<f64>,
    /// Where to write the solution, one value per line.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

/// Source of the right-hand side vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhsMode {
    Ones,
    Random(u64),
    File(PathBuf),
}

impl FromStr for RhsMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "ones" {
            return Ok(RhsMode::Ones);
        }
        if let Some(seed) = s.strip_prefix("random:") {
            return seed
                .parse()
                .map(RhsMode::Random)
                .map_err(|e| format!("bad seed {seed:?}: {e}"));
        }
        if s.is_empty() {
            return Err("empty right-hand side".into());
        }
        Ok(RhsMode::File(PathBuf::from(s)))
    }
}

impl fmt::Display for RhsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsMode::Ones => f.write_str("ones"),
            RhsMode::Random(s) => write!(f, "random:{s}"),
            RhsMode::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Builds a right-hand side of length `n`.
pub fn generate_rhs(mode: &RhsMode, n: usize) -> Result<Vec<f64>> {
    match mode {
        RhsMode::Ones => Ok(vec![1.0; n]),
        RhsMode::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        }
        RhsMode::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut out = Vec::with_capacity(n);
            for (line_no, line) in text.lines().enumerate() {
                for tok in line.split_whitespace() {
                    let v: f64 = tok.parse().map_err(|_| Error::Parse {
                        path: path.clone(),
                        line: line_no + 1,
                        message: format!("not a number: {tok:?}"),
                    })?;
                    out.push(v);
                }
            }
            if out.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: out.len(),
                });
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub preprocess: f64,
    pub factorize: f64,
    pub solve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatTimes {
    pub refactorize: f64,
    pub solve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub matrix_name: String,
    pub n: usize,
    pub nnz: usize,
    pub kernel_mode: KernelMode,
    pub fill_nnz: usize,
    pub flops: u64,
    pub supernode_count: usize,
    pub standalone_row_count: usize,
    pub phase_times_seconds: PhaseTimes,
    pub repeat_times_seconds: Vec<RepeatTimes>,
    pub backward_error_final: f64,
    pub refinement_iterations: usize,
    pub refinement_backward_errors: Vec<f64>,
    pub perturbation_count: usize,
    pub threads: usize,
}

/// Options of all phases assembled from the flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub analyze: AnalyzeOptions,
    pub factor: FactorOptions,
    pub solve: SolveOptions,
}

impl RunConfig {
    pub fn from_args(args: &SolveArgs) -> Result<Self> {
        let threads = args.threads as usize;
        let kernel = args.kernel.mode();
        let mut analyze = AnalyzeOptions {
            threads,
            kernel_override: kernel,
            ordering: match args.ordering {
                OrderingChoice::Amd => OrderingMethod::Amd,
                OrderingChoice::Natural => OrderingMethod::Natural,
            },
            ..AnalyzeOptions::default()
        };
        let mut factor = FactorOptions {
            kernel_override: kernel,
            perturbation_epsilon: args.perturb_eps,
            threads,
        };
        let mut solve = SolveOptions {
            threads,
            ..SolveOptions::default()
        };
        for item in &args.set {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected NAME=VALUE, got {item:?}")))?;
            let (name, value) = (name.trim(), value.trim());
            let known = analyze.set(name, value)? | factor.set(name, value)? | solve.set(name, value)?;
            if !known {
                return Err(Error::InvalidConfig(format!("unknown setting {name:?}")));
            }
        }
        if let Some(eps) = args.perturb_values {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::InvalidConfig("--perturb-values must be a finite value >= 0".into()));
            }
        }
        analyze.validate()?;
        factor.validate()?;
        solve.validate()?;
        Ok(Self { analyze, factor, solve })
    }
}

fn matrix_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Values of `a` each scaled by `1 + eps * u`, `u` uniform in `[-1, 1)`.
fn perturbed_values(a: &CsrMatrix, eps: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    a.values()
        .iter()
        .map(|&v| v * (1.0 + eps * rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Runs the solve pipeline and returns the report and final solution.
pub fn run_solve(args: &SolveArgs, cfg: &RunConfig) -> Result<(SolveReport, Vec<f64>)> {
    let a = read_matrix_market(&args.matrix)?;
    let b = generate_rhs(&args.rhs, a.n())?;

    let t = Instant::now();
    let analysis = Arc::new(analyze(&a, &cfg.analyze)?);
    let t_pre = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut factors = factorize(&a, analysis.clone(), &cfg.factor)?;
    let t_fac = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (mut x, mut rep) = solve(&a, &factors, &b, &cfg.solve)?;
    let t_sol = t.elapsed().as_secs_f64();

    let mut repeats = Vec::with_capacity(args.repeat);
    for r in 0..args.repeat {
        let current = match args.perturb_values {
            Some(eps) => a.with_values(perturbed_values(&a, eps, r as u64))?,
            None => a.clone(),
        };
        let t = Instant::now();
        factors = refactorize(&current, &factors, &cfg.factor)?;
        let t_ref = t.elapsed().as_secs_f64();
        let t = Instant::now();
        (x, rep) = solve(&current, &factors, &b, &cfg.solve)?;
        repeats.push(RepeatTimes {
            refactorize: t_ref,
            solve: t.elapsed().as_secs_f64(),
        });
    }

    let sym = &analysis.symbolic;
    let report = SolveReport {
        matrix_name: matrix_name(&args.matrix),
        n: a.n(),
        nnz: a.nnz(),
        kernel_mode: factors.kernel_mode(),
        fill_nnz: sym.fill_nnz,
        flops: sym.flops,
        supernode_count: sym.supernode_count(),
        standalone_row_count: sym.standalone_row_count(),
        phase_times_seconds: PhaseTimes {
            preprocess: t_pre,
            factorize: t_fac,
            solve: t_sol,
        },
        repeat_times_seconds: repeats,
        backward_error_final: rep.final_backward_error(),
        refinement_iterations: rep.iterations,
        refinement_backward_errors: rep.backward_errors.clone(),
        perturbation_count: factors.perturbed().len(),
        threads: cfg.factor.threads,
    };
    Ok((report, x))
}

fn write_output(args: &SolveArgs, report: &SolveReport, x: &[f64]) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.into()))?;
    match &args.report {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.solution {
        let mut text = String::with_capacity(x.len() * 24);
        for v in x {
            text.push_str(&format!("{v:e}\n"));
        }
        std::fs::write(path, text)?;
    }
    Ok(())
}

/// Entry point of the binary. Returns the process exit code: 0 on success,
/// 1 on solver errors and 2 on usage errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Solve(args) => {
            let cfg = match RunConfig::from_args(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}\n");
                    let mut cmd = Cli::command();
                    if let Some(sub) = cmd.find_subcommand_mut("solve") {
                        let _ = sub.print_help();
                    }
                    return 2;
                }
            };
            match run_solve(&args, &cfg).and_then(|(report, x)| write_output(&args, &report, &x)) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {}: {}: {e}", e.class(), matrix_name(&args.matrix));
                    1
                }
            }
        }
    }
}
