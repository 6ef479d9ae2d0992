//! Command logic for the `mrfbound` binary.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mrfbound::format::{load_model, save_model};
use mrfbound::generate::{gen_grid, StrengthPreset};
use mrfbound::oracle::DEFAULT_STATE_CAP;
use mrfbound::{
    exact_marginals_bruteforce, marginal_intervals, par, run_bp, BpOptions, IntervalOptions, IntervalReport, Model,
    Roots, DEFAULT_BUDGET, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE,
};

/// Slack allowed when checking the exact marginal against an interval.
pub const CONTAINMENT_SLACK: f64 = 1e-9;

/// Exit status when `bound --exact` finds a marginal outside its interval.
pub const EXIT_CONTAINMENT_VIOLATED: u8 = 3;

pub const SWEEP_HEADER: &str = "d_target,seed,node,state,width,contains_truth";

#[derive(Debug, Parser)]
#[command(name = "mrfbound", version, about = "Loopy BP marginals with certified intervals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a model file.
    #[command(subcommand)]
    Gen(Gen),
    /// Run loopy BP and print the beliefs.
    Bp(BpArgs),
    /// BP beliefs with certified intervals, as CSV.
    Bound(BoundArgs),
    /// Exact marginals by enumeration.
    Exact(ExactArgs),
    /// Interval widths and containment over seeded grids.
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum Gen {
    /// Binary grid with symmetric couplings of strength at most the target.
    Grid(GridArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    /// weak, stronger, very-strong, or a number >= 1
    #[arg(long, default_value = "weak")]
    pub strength: StrengthPreset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout if omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
}

impl SolverArgs {
    fn options(&self) -> BpOptions {
        BpOptions { max_iters: self.max_iters, tolerance: self.tol, ..Default::default() }
    }
}

#[derive(Debug, Args)]
pub struct BpArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `all` or a comma-separated list of nodes.
    #[arg(long, default_value = "all", value_parser = parse_roots)]
    pub roots: Roots,
    /// Node budget for each self-avoiding-walk tree.
    #[arg(long, env = "MRFBOUND_BUDGET", default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Also enumerate exact marginals and check containment.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CSV output file (stdout if omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    pub rows: usize,
    #[arg(long, default_value_t = 3)]
    pub cols: usize,
    /// Comma-separated strength targets, each >= 1.
    #[arg(long = "d", value_delimiter = ',', required = true)]
    pub d_values: Vec<f64>,
    /// Seeds 0..K per strength.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, env = "MRFBOUND_BUDGET", default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn parse_roots(s: &str) -> Result<Roots, String> {
    if s.trim() == "all" {
        return Ok(Roots::All);
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad node index `{t}`")))
        .collect::<Result<Vec<_>, _>>()
        .map(Roots::List)
}

fn read_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_model(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
    }
}

/// Summary lines go to stdout when the CSV went to a file, stderr otherwise.
fn say(to_stdout: bool, line: &str) {
    if to_stdout {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen(Gen::Grid(a)) => {
            if a.rows == 0 || a.cols == 0 {
                bail!("grid needs at least one row and one column");
            }
            let m = gen_grid(a.rows, a.cols, a.strength.target_d(), a.seed);
            emit(a.output.as_deref(), &save_model(&m))?;
        }
        Command::Bp(a) => {
            let m = read_model(&a.model)?;
            let r = run_bp(&m, &a.solver.options());
            let mut out = String::from("node,state,belief\n");
            for (v, b) in r.beliefs.iter().enumerate() {
                for (s, p) in b.iter().enumerate() {
                    writeln!(out, "{v},{s},{p}").unwrap();
                }
            }
            print!("{out}");
            eprintln!("{} after {} iterations (residual {:e})", convergence(r.converged), r.iterations, r.residual);
        }
        Command::Bound(a) => return cmd_bound(&a),
        Command::Exact(a) => {
            let m = read_model(&a.model)?;
            let ex = exact_marginals_bruteforce(&m, DEFAULT_STATE_CAP)?;
            let mut out = String::from("node,state,probability\n");
            for (v, p) in ex.marginals.iter().enumerate() {
                for (s, x) in p.iter().enumerate() {
                    writeln!(out, "{v},{s},{x}").unwrap();
                }
            }
            print!("{out}");
            eprintln!("partition function {}", ex.partition);
        }
        Command::Sweep(a) => {
            let csv = sweep_csv(&a)?;
            emit(a.output.as_deref(), &csv)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn convergence(converged: bool) -> &'static str {
    if converged {
        "converged"
    } else {
        "not converged"
    }
}

/// BP, intervals and (optionally) exact marginals for one model.
pub fn bound_report(m: &Model, a: &BoundArgs) -> Result<IntervalReport> {
    let r = run_bp(m, &a.solver.options());
    let opts = IntervalOptions { budget: a.budget, roots: a.roots.clone(), ..Default::default() };
    let mut rep = marginal_intervals(m, &r, &opts)?;
    if a.exact {
        rep.attach_exact(&exact_marginals_bruteforce(m, DEFAULT_STATE_CAP)?);
    }
    Ok(rep)
}

fn cmd_bound(a: &BoundArgs) -> Result<ExitCode> {
    let m = read_model(&a.model)?;
    let rep = bound_report(&m, a)?;
    emit(a.output.as_deref(), &rep.to_csv())?;
    let to_stdout = a.output.is_some();
    say(to_stdout, &format!("bp: {}", convergence(rep.converged)));
    if !rep.converged {
        say(to_stdout, "warning: beliefs are from the last iteration, not a fixed point");
    }
    say(to_stdout, &format!("max interval width: {}", rep.max_width()));
    match rep.all_contain_exact(CONTAINMENT_SLACK) {
        Some(true) => say(to_stdout, "containment: PASS"),
        Some(false) => {
            say(to_stdout, "containment: FAIL");
            return Ok(ExitCode::from(EXIT_CONTAINMENT_VIOLATED));
        }
        None => {}
    }
    Ok(ExitCode::SUCCESS)
}

/// One row per (d, seed, node, state), in that order.
pub fn sweep_csv(a: &SweepArgs) -> Result<String> {
    if a.rows == 0 || a.cols == 0 {
        bail!("grid needs at least one row and one column");
    }
    if let Some(d) = a.d_values.iter().find(|d| !(**d >= 1.0 && d.is_finite())) {
        bail!("strength targets must be finite and >= 1, got {d}");
    }
    let cells: Vec<(f64, u64)> = a.d_values.iter().flat_map(|&d| (0..a.seeds).map(move |s| (d, s))).collect();
    let opts = IntervalOptions { budget: a.budget, ..Default::default() };
    let solver = a.solver.options();
    let results = par::map_indexed(cells.len(), |i| -> Result<String> {
        let (d, seed) = cells[i];
        let m = gen_grid(a.rows, a.cols, d, seed);
        let r = run_bp(&m, &solver);
        let mut rep = marginal_intervals(&m, &r, &opts)?;
        rep.attach_exact(&exact_marginals_bruteforce(&m, DEFAULT_STATE_CAP)?);
        let mut out = String::new();
        for row in &rep.rows {
            let ok = row.contains_exact(CONTAINMENT_SLACK).unwrap_or(false);
            writeln!(out, "{d},{seed},{},{},{},{ok}", row.node, row.state, row.width()).unwrap();
        }
        Ok(out)
    });
    let mut csv = format!("{SWEEP_HEADER}\n");
    for r in results {
        csv.push_str(&r?);
    }
    Ok(csv)
}
