use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use rsls::bench::{self, ExperimentConfig, Family, FamilyParams};
use rsls::diagnostics::{self, DEFAULT_C_H};
use rsls::generators::{consistent_rhs, noisy_rhs};
use rsls::solvers::{lsq_solve_cg, lsq_solve_rs, SolveReport};
use rsls::{read_matrix_market, sample_size, write_matrix_market, Matrix, MatrixOps, SamplingDensity, SolverConfig};

/// Row-sampling preconditioned least-squares solver.
#[derive(Debug, Parser)]
#[command(name = "rsls", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// RNG seed for generation, sampling and right-hand sides.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative normal-equation residual at which to stop [default: 1e-7].
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Sample size factor: s = ceil(factor * n ln n) [default: 4].
    #[arg(long, global = true)]
    sample_factor: Option<f64>,
    /// Forward (and backward) Gauss-Seidel sweeps [default: 5].
    #[arg(long, global = true)]
    sgs_sweeps: Option<usize>,
    /// Iteration cap [default: 5n].
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Global {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    /// `base` with every explicitly given flag applied.
    fn solver(&self, mut base: SolverConfig) -> SolverConfig {
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.tol {
            base.tol = v;
        }
        if let Some(v) = self.sample_factor {
            base.sample_factor = v;
        }
        if let Some(v) = self.sgs_sweeps {
            base.sgs_sweeps = v;
        }
        if self.max_iter.is_some() {
            base.max_iter = self.max_iter;
        }
        base
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a test matrix and its manifest.
    Gen(GenArgs),
    /// Solve a least-squares problem read from a Matrix Market file.
    Solve(SolveArgs),
    /// Run an experiment config and write CSV and Markdown tables.
    Bench(BenchArgs),
    /// Run a diagnostic on a matrix.
    Diag(DiagArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    cond: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    d2: Option<f64>,
    #[arg(long)]
    i0: Option<f64>,
    #[arg(long)]
    max_deg: Option<f64>,
    /// File stem; defaults to `<family>_<m>x<n>_seed<seed>`.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Cg,
    PcgRs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RhsMode {
    /// b = A x_true, x_true standard normal.
    Consistent,
    /// Consistent b plus Gaussian noise of relative size --noise.
    Noisy,
    /// b = 1.
    Ones,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Matrix Market file.
    matrix: PathBuf,
    #[arg(long, value_enum, default_value = "pcg-rs")]
    method: Method,
    #[arg(long, value_enum, default_value = "consistent")]
    rhs: RhsMode,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Override the number of repeats.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DiagTest {
    Spectral,
    Concentration,
    HighFrequency,
    Unbiasedness,
    FilteredGram,
}

#[derive(Debug, Args)]
struct DiagArgs {
    /// Matrix Market file.
    matrix: PathBuf,
    #[arg(long, value_enum)]
    test: DiagTest,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Sample size; defaults to ceil(sample_factor * n ln n).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_C_H)]
    c_h: f64,
    #[arg(long, default_value_t = 0.125)]
    theta: f64,
    /// Single-row draws for the unbiasedness test.
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<Matrix> {
    read_matrix_market(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_gen(g: &Global, args: &GenArgs) -> Result<ExitCode> {
    let params = FamilyParams {
        m: args.m,
        n: args.n,
        density: args.density,
        cond: args.cond,
        beta: args.beta,
        d: args.d,
        beta2: args.beta2,
        d2: args.d2,
        i0: args.i0,
        max_deg: args.max_deg,
    };
    let seed = g.seed();
    let a = bench::generate(args.family, &params, seed)?;
    let (m, n) = (a.nrows(), a.ncols());
    let stem = args
        .name
        .clone()
        .unwrap_or_else(|| format!("{}_{m}x{n}_seed{seed}", args.family.name()));
    let dir = g.out_dir()?;
    let mtx = dir.join(format!("{stem}.mtx"));
    write_matrix_market(&mtx, &a)?;

    let solver = g.solver(SolverConfig::default());
    let graph = match args.family {
        Family::GraphLaplacian => {
            let (first, second) = params.graph_specs()?;
            Some(json!({ "first": first, "second": second, "overlap": rsls::generators::GLUE_OVERLAP }))
        }
        _ => None,
    };
    let manifest = json!({
        "family": args.family,
        "params": params,
        "graph": graph,
        "seed": seed,
        "m": m,
        "n": n,
        "nnz": a.nnz(),
        "storage": if a.is_sparse() { "sparse" } else { "dense" },
        "matrix_file": mtx.file_name().map(|f| f.to_string_lossy().into_owned()),
        "solver_defaults": solver,
        "max_iter_resolved": solver.max_iter_for(n),
        "sample_size": sample_size(n.max(2), solver.sample_factor).ok(),
    });
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &manifest)?;
    println!("{}", mtx.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    matrix: &'a Path,
    method: Method,
    rhs: RhsMode,
    m: usize,
    n: usize,
    nnz: usize,
    /// `|A (x - x_true)| / |A x_true|` for generated right-hand sides.
    fit_error: Option<f64>,
    /// `|A x - b| / |b|`.
    relative_residual: f64,
    report: SolveReport,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cmd_solve(g: &Global, args: &SolveArgs) -> Result<ExitCode> {
    let a = load(&args.matrix)?;
    let seed = g.seed();
    let (b, x_true) = match args.rhs {
        RhsMode::Consistent => {
            let (b, x) = consistent_rhs(&a, seed)?;
            (b, Some(x))
        }
        RhsMode::Noisy => {
            let (b, x) = noisy_rhs(&a, args.noise, seed)?;
            (b, Some(x))
        }
        RhsMode::Ones => (vec![1.0; a.nrows()], None),
    };
    let cfg = g.solver(SolverConfig::default());
    let (x, report) = match args.method {
        Method::Cg => lsq_solve_cg(&a, &b, &cfg)?,
        Method::PcgRs => lsq_solve_rs(&a, &b, &cfg)?,
    };
    let ax = a.matvec(&x)?;
    let fit_error = x_true.map(|xt| {
        let at = a.matvec(&xt).expect("dimensions checked");
        norm(&ax.iter().zip(&at).map(|(u, v)| u - v).collect::<Vec<_>>()) / norm(&at)
    });
    let relative_residual = norm(&ax.iter().zip(&b).map(|(u, v)| u - v).collect::<Vec<_>>()) / norm(&b);
    let converged = report.converged;
    let out = SolveOutput {
        matrix: &args.matrix,
        method: args.method,
        rhs: args.rhs,
        m: a.nrows(),
        n: a.ncols(),
        nnz: a.nnz(),
        fit_error,
        relative_residual,
        report,
    };
    if let Some(dir) = &g.out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("solve_report.json"), &out)?;
    }
    print_json(&out)?;
    Ok(if converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_bench(g: &Global, args: &BenchArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    cfg.solver = g.solver(cfg.solver);
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    cfg.validate()?;
    let dir = match (&g.out, &cfg.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d.clone(),
        (None, None) => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = cfg.name.clone().unwrap_or_else(|| cfg.family.name().to_string());
    let rows = bench::run_experiment(&cfg)?;
    let csv = dir.join(format!("{name}.csv"));
    let md = dir.join(format!("{name}.md"));
    fs::write(&csv, bench::to_csv(&rows))?;
    fs::write(&md, bench::to_markdown(&name, &rows))?;
    write_json(&dir.join(format!("{name}.json")), &json!({ "config": cfg, "rows": rows }))?;
    println!("{}", csv.display());
    println!("{}", md.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_diag(g: &Global, args: &DiagArgs) -> Result<ExitCode> {
    let a = load(&args.matrix)?;
    let seed = g.seed();
    let factor = g.sample_factor.unwrap_or(4.0);
    let samples = || -> Result<usize> {
        match args.samples {
            Some(s) => Ok(s),
            None => Ok(sample_size(a.ncols().max(2), factor)?),
        }
    };
    match args.test {
        DiagTest::Spectral => print_json(&diagnostics::spectral_summary(&a)?)?,
        DiagTest::Unbiasedness => print_json(&diagnostics::unbiasedness_test(&a, args.draws, seed)?)?,
        DiagTest::Concentration => {
            let (an, _) = a.normalize_columns()?;
            print_json(&diagnostics::concentration_test(&an, samples()?, args.epsilon, args.trials, seed)?)?
        }
        DiagTest::HighFrequency => {
            let (an, _) = a.normalize_columns()?;
            print_json(&diagnostics::high_frequency_test(&an, samples()?, args.c_h, args.trials, seed)?)?
        }
        DiagTest::FilteredGram => {
            let (an, _) = a.normalize_columns()?;
            let plan = SamplingDensity::from_row_norms(&an)?.draw(samples()?, seed)?;
            let a_s = plan.apply(&an)?;
            let stem = args
                .matrix
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "gram".into());
            let report = diagnostics::filtered_gram_export(&an, &a_s, args.theta, g.out_dir()?, &stem)?;
            print_json(&report)?
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(t) = cli.global.tol {
        if !(t > 0.0 && t < 1.0) {
            bail!("--tol must be in (0, 1)");
        }
    }
    match &cli.cmd {
        Command::Gen(a) => cmd_gen(&cli.global, a),
        Command::Solve(a) => cmd_solve(&cli.global, a),
        Command::Bench(a) => cmd_bench(&cli.global, a),
        Command::Diag(a) => cmd_diag(&cli.global, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
