//! Experiment harness: generate a family of matrices, solve each with CG and
//! with the row-sampling PCG, repeat, and tabulate.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::diagnostics::spectral_summary;
use crate::error::{Error, Result};
use crate::generators::{
    consistent_rhs, gen_gaussian, gen_semi_gaussian, gen_sprand, gen_udv, graph_laplacian_pipeline, GraphSpec,
};
use crate::matrix::{Matrix, MatrixOps};
use crate::rng::derive_seed;
use crate::solvers::{lsq_solve_cg, lsq_solve_rs, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    SemiGaussian,
    Sprand,
    Udv,
    GraphLaplacian,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::SemiGaussian => "semi_gaussian",
            Family::Sprand => "sprand",
            Family::Udv => "udv",
            Family::GraphLaplacian => "graph_laplacian",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "semi_gaussian" => Ok(Family::SemiGaussian),
            "sprand" => Ok(Family::Sprand),
            "udv" => Ok(Family::Udv),
            "graph_laplacian" | "graph" => Ok(Family::GraphLaplacian),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }
}

/// Size and shape parameters of one generated instance.
///
/// For `graph_laplacian`, `n` is the vertex count of each of the two glued
/// component graphs; `beta`/`d` describe the sparse component and
/// `beta2`/`d2` the dense one (defaults 5, 30, 8, `5 n`), both with offset `i0`
/// (default 11) unless `max_deg` is given for the sparse component.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyParams {
    pub m: Option<usize>,
    pub n: usize,
    pub density: Option<f64>,
    pub cond: Option<f64>,
    pub beta: Option<f64>,
    pub d: Option<f64>,
    pub beta2: Option<f64>,
    pub d2: Option<f64>,
    pub i0: Option<f64>,
    pub max_deg: Option<f64>,
}

impl FamilyParams {
    fn need_m(&self, family: Family) -> Result<usize> {
        self.m
            .ok_or_else(|| Error::InvalidParameter(format!("{} needs m", family.name())))
    }

    fn need(&self, value: Option<f64>, what: &str, family: Family) -> Result<f64> {
        value.ok_or_else(|| Error::InvalidParameter(format!("{} needs {what}", family.name())))
    }

    /// The two component graphs of the graph-Laplacian family.
    pub fn graph_specs(&self) -> Result<(GraphSpec, GraphSpec)> {
        let n = self.n;
        let i0 = self.i0.unwrap_or(11.0);
        let mut first = GraphSpec {
            n,
            beta: self.beta.unwrap_or(5.0),
            d: self.d.unwrap_or(30.0),
            i0,
        };
        if let Some(max_deg) = self.max_deg {
            first = GraphSpec::with_max_degree(n, first.beta, first.d, max_deg)?;
        }
        let second = GraphSpec {
            n,
            beta: self.beta2.unwrap_or(8.0),
            d: self.d2.unwrap_or(5.0 * n as f64),
            i0,
        };
        Ok((first, second))
    }
}

/// Generates one instance of `family`.
pub fn generate(family: Family, p: &FamilyParams, seed: u64) -> Result<Matrix> {
    Ok(match family {
        Family::Gaussian => gen_gaussian(p.need_m(family)?, p.n, seed)?.into(),
        Family::SemiGaussian => gen_semi_gaussian(p.need_m(family)?, p.n, seed)?.into(),
        Family::Sprand => gen_sprand(
            p.need_m(family)?,
            p.n,
            p.need(p.density, "density", family)?,
            p.need(p.cond, "cond", family)?,
            seed,
        )?
        .into(),
        Family::Udv => gen_udv(p.need_m(family)?, p.n, p.need(p.cond, "cond", family)?, seed)?.into(),
        Family::GraphLaplacian => {
            let (first, second) = p.graph_specs()?;
            graph_laplacian_pipeline(&first, &second, seed)?.into()
        }
    })
}

/// One table = one family swept over `rows`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub family: Family,
    pub rows: Vec<FamilyParams>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_repeats() -> usize {
    10
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be at least 1".into()));
        }
        if self.rows.is_empty() {
            return Err(Error::InvalidParameter("experiment has no rows".into()));
        }
        self.solver.validate()
    }

    /// Seed of the matrix in row `r`.
    pub fn matrix_seed(&self, r: usize) -> u64 {
        derive_seed(self.seed, r as u64)
    }
}

/// One row of a results table. `*_rs` fields come from the first trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n: usize,
    pub m: usize,
    pub nnz: usize,
    pub kappa: f64,
    pub mu: Option<f64>,
    pub residual_cg: f64,
    pub iter_cg: usize,
    pub residual_rs: f64,
    pub iter_rs: usize,
    pub time_cg: f64,
    pub setup_cg: f64,
    pub time_rs: f64,
    pub setup_rs: f64,
    pub iter_mean: f64,
    pub iter_std: Option<f64>,
    pub time_mean: f64,
    pub time_std: Option<f64>,
    pub setup_mean: f64,
    pub setup_std: Option<f64>,
    pub converged_cg: bool,
    /// Trials in which the row-sampling solver converged.
    pub converged_rs: usize,
}

impl TableRow {
    pub fn sum_cg(&self) -> f64 {
        self.time_cg + self.setup_cg
    }

    pub fn sum_rs(&self) -> f64 {
        self.time_rs + self.setup_rs
    }
}

pub const CSV_HEADER: &str = "n,m,nnz,kappa,mu,Residual.CG,Iter.CG,Residual.RS,Iter.RS,Time.CG,Setup.CG,Time.RS,Setup.RS,Iter.Mean,Iter.Std,Time.Mean,Time.Std,Setup.Mean,Setup.Std";

/// CSV columns holding wall-clock times.
pub const TIMING_COLUMNS: [&str; 8] = [
    "Time.CG",
    "Setup.CG",
    "Time.RS",
    "Setup.RS",
    "Time.Mean",
    "Time.Std",
    "Setup.Mean",
    "Setup.Std",
];

/// Mean and sample standard deviation; the deviation is `None` for one value.
pub fn mean_std(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Runs every row of `cfg`. CG runs once per row; the row-sampling solver
/// runs `repeats` times with seeds `seed + t`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    cfg.validate()?;
    cfg.rows
        .iter()
        .enumerate()
        .map(|(r, p)| {
            let seed = cfg.matrix_seed(r);
            let a = generate(cfg.family, p, seed)?;
            run_row(&a, cfg, derive_seed(seed, u64::MAX))
        })
        .collect()
}

/// Benchmarks one matrix with a consistent right-hand side drawn from `rhs_seed`.
pub fn run_row(a: &Matrix, cfg: &ExperimentConfig, rhs_seed: u64) -> Result<TableRow> {
    let (b, _) = consistent_rhs(a, rhs_seed)?;
    let (normalized, _) = a.normalize_columns()?;
    let summary = spectral_summary(&normalized)?;

    let (_, cg) = lsq_solve_cg(a, &b, &cfg.solver)?;
    let mut trials = Vec::with_capacity(cfg.repeats);
    for t in 0..cfg.repeats {
        let solver = SolverConfig {
            seed: cfg.seed.wrapping_add(t as u64),
            ..cfg.solver.clone()
        };
        trials.push(lsq_solve_rs(a, &b, &solver)?.1);
    }
    let iters: Vec<f64> = trials.iter().map(|r| r.iterations as f64).collect();
    let times: Vec<f64> = trials.iter().map(|r| r.solve_seconds).collect();
    let setups: Vec<f64> = trials.iter().map(|r| r.setup_seconds).collect();
    let (iter_mean, iter_std) = mean_std(&iters);
    let (time_mean, time_std) = mean_std(&times);
    let (setup_mean, setup_std) = mean_std(&setups);
    let first = &trials[0];
    Ok(TableRow {
        n: a.ncols(),
        m: a.nrows(),
        nnz: a.nnz(),
        kappa: summary.kappa_normal,
        mu: summary.coherence,
        residual_cg: cg.final_relres,
        iter_cg: cg.iterations,
        residual_rs: first.final_relres,
        iter_rs: first.iterations,
        time_cg: cg.solve_seconds,
        setup_cg: cg.setup_seconds,
        time_rs: first.solve_seconds,
        setup_rs: first.setup_seconds,
        iter_mean,
        iter_std,
        time_mean,
        time_std,
        setup_mean,
        setup_std,
        converged_cg: cg.converged,
        converged_rs: trials.iter().filter(|r| r.converged).count(),
    })
}

fn sci(x: f64) -> String {
    format!("{x:.2e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

fn opt_md(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_else(|| "-".into())
}

fn iter_stat(x: f64) -> String {
    format!("{x:.4}")
}

/// CSV with [`CSV_HEADER`]; std cells are empty when there was one repeat.
pub fn to_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cells = [
            r.n.to_string(),
            r.m.to_string(),
            r.nnz.to_string(),
            sci(r.kappa),
            opt(r.mu),
            sci(r.residual_cg),
            r.iter_cg.to_string(),
            sci(r.residual_rs),
            r.iter_rs.to_string(),
            sci(r.time_cg),
            sci(r.setup_cg),
            sci(r.time_rs),
            sci(r.setup_rs),
            iter_stat(r.iter_mean),
            r.iter_std.map(iter_stat).unwrap_or_default(),
            sci(r.time_mean),
            opt(r.time_std),
            sci(r.setup_mean),
            opt(r.setup_std),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn md_table(out: &mut String, title: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) {
    let _ = writeln!(out, "### {title}\n");
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", vec!["---"; header.len()].join("|"));
    for cells in rows {
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out.push('\n');
}

/// The three tables: residuals and iterations, times, and repeat statistics.
pub fn to_markdown(title: &str, rows: &[TableRow]) -> String {
    let mut out = format!("## {title}\n\n");
    md_table(
        &mut out,
        "Residual and Iteration Steps",
        &["n", "m", "nnz(A)", "kappa(A^T A)", "mu(A)", "Residual.CG", "Iter.CG", "Residual.RS", "Iter.RS"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.m.to_string(),
                r.nnz.to_string(),
                sci(r.kappa),
                opt_md(r.mu),
                sci(r.residual_cg),
                r.iter_cg.to_string(),
                sci(r.residual_rs),
                r.iter_rs.to_string(),
            ]
        }),
    );
    md_table(
        &mut out,
        "Elapsed Time (s)",
        &["n", "m", "Time.CG", "Setup.CG", "Sum.CG", "Time.RS", "Setup.RS", "Sum.RS"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.m.to_string(),
                sci(r.time_cg),
                sci(r.setup_cg),
                sci(r.sum_cg()),
                sci(r.time_rs),
                sci(r.setup_rs),
                sci(r.sum_rs()),
            ]
        }),
    );
    md_table(
        &mut out,
        "Mean and Sample Standard Deviation",
        &["n", "m", "Iter.Mean", "Iter.Std", "Time.Mean", "Time.Std", "Setup.Mean", "Setup.Std"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.m.to_string(),
                iter_stat(r.iter_mean),
                r.iter_std.map(iter_stat).unwrap_or_else(|| "-".into()),
                sci(r.time_mean),
                opt_md(r.time_std),
                sci(r.setup_mean),
                opt_md(r.setup_std),
            ]
        }),
    );
    out
}
