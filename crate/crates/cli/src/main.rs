//! `muller`: command-line driver for the Müller density-matrix experiments
//! and the Thomas-Fermi reference solvers.
//!
//! Every subcommand prints one JSON document to stdout. Exit status is 0 on
//! success, 2 on invalid arguments, 3 when a required solve did not converge
//! and 1 on any other failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use muller_core::checks::inequality_report;
use muller_core::energy::{default_lieb_thirring_constant, lieb_thirring_slack};
use muller_core::experiments::{
    atom_system, binding_report, dissociation_scan, refine_curve_minimum, saturation_scan, united_atom_check,
    ExperimentOptions,
};
use muller_core::solver::{minimize_system, SolveOptions, TraceMode};
use muller_core::thomas_fermi::{
    check_constant_identity, default_kinetic_prefactor, tf_atom, tf_diatomic, tf_gamma_estimate, TfGridSpec,
};
use muller_core::Error;

#[derive(Parser)]
#[command(name = "muller", version, about = "Müller density-matrix functional and Thomas-Fermi experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-atom Müller minimisation.
    #[command(subcommand)]
    Atom(AtomCommand),
    /// Diatomic dissociation curves.
    #[command(subcommand)]
    Diatomic(DiatomicCommand),
    /// Binding-inequality reports.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Thomas-Fermi atoms, molecules and the binding defect.
    #[command(subcommand)]
    Tf(TfCommand),
    /// Randomised inequality audits.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Compare diatomic energies with the united atom.
    UnitedAtom(UnitedAtomArgs),
    /// Trace at the relaxed minimiser as the electron number grows.
    Saturation(SaturationArgs),
}

#[derive(Subcommand)]
enum AtomCommand {
    Solve(AtomSolveArgs),
}

#[derive(Subcommand)]
enum DiatomicCommand {
    Scan(ScanArgs),
}

#[derive(Subcommand)]
enum ReportCommand {
    Binding(BindingArgs),
}

#[derive(Subcommand)]
enum TfCommand {
    Atom(TfAtomArgs),
    Diatomic(TfDiatomicArgs),
    Gamma(TfGammaArgs),
}

#[derive(Subcommand)]
enum CheckCommand {
    Inequalities(InequalityArgs),
}

/// Options shared by every Müller solve.
#[derive(Args, Clone)]
struct SolverArgs {
    /// Even-tempered primitives per nucleus.
    #[arg(long, default_value_t = 6)]
    n_basis: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Upper bound on each occupation number.
    #[arg(long, default_value_t = 1.0)]
    cap: f64,
    /// Projected-gradient tolerance.
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iterations: usize,
    /// Cold starts per solve.
    #[arg(long, default_value_t = 3)]
    starts: usize,
}

impl SolverArgs {
    fn solve(&self, mode: TraceMode, shift_included: bool) -> SolveOptions {
        SolveOptions {
            mode,
            shift_included,
            seed: self.seed,
            occupation_cap: self.cap,
            gradient_tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            starts: self.starts,
            ..SolveOptions::default()
        }
    }

    fn experiment(&self, mode: TraceMode, shift_included: bool) -> ExperimentOptions {
        ExperimentOptions {
            n_basis: self.n_basis,
            solve: self.solve(mode, shift_included),
            ..ExperimentOptions::default()
        }
    }
}

#[derive(Args)]
struct AtomSolveArgs {
    #[arg(long = "Z")]
    z: f64,
    #[arg(long = "N")]
    n: f64,
    /// Minimise over `tr γ ≤ N` instead of `tr γ = N`.
    #[arg(long)]
    relaxed: bool,
    /// Include `tr γ/8` in the objective.
    #[arg(long)]
    shift: bool,
    /// Lieb-Thirring constant for the reported slack.
    #[arg(long)]
    lt_constant: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long = "Z1")]
    z1: f64,
    #[arg(long = "Z2")]
    z2: f64,
    #[arg(long = "N")]
    n: f64,
    #[arg(long)]
    r_min: f64,
    #[arg(long)]
    r_max: f64,
    /// Number of separations, evenly spaced from r-min to r-max.
    #[arg(long)]
    steps: usize,
    /// Refine the minimum by golden-section search.
    #[arg(long)]
    refine: bool,
    /// Electron split `N1:N2` defining the asymptote (default: even split).
    #[arg(long, value_parser = parse_split)]
    split: Option<(f64, f64)>,
    /// Minimise the plain energy instead of the shifted one.
    #[arg(long)]
    unshifted: bool,
    /// Solve every separation from scratch.
    #[arg(long)]
    cold: bool,
    /// CSV file for the curve.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct BindingArgs {
    #[arg(long = "Z1")]
    z1: f64,
    #[arg(long = "Z2")]
    z2: f64,
    #[arg(long = "N")]
    n: f64,
    /// Comma-separated electron splits, e.g. "1:1,2:0".
    #[arg(long, value_parser = parse_splits)]
    splits: Splits,
    #[arg(long, default_value_t = 0.8)]
    r_min: f64,
    #[arg(long, default_value_t = 6.0)]
    r_max: f64,
    #[arg(long, default_value_t = 14)]
    steps: usize,
    /// CSV file for the shifted-convention curve.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct TfAtomArgs {
    #[arg(long = "Z")]
    z: f64,
    #[arg(long = "N")]
    n: f64,
    /// Kinetic prefactor (default: the spin-summed value).
    #[arg(long)]
    c_k: Option<f64>,
    /// CSV file for the radial profile (r, rho, phi).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Grid points per axis.
    #[arg(long, default_value_t = 96)]
    grid: usize,
    /// Half-width of the cubic box in bohr.
    #[arg(long, default_value_t = 8.0)]
    half_width: f64,
    #[arg(long)]
    c_k: Option<f64>,
}

impl GridArgs {
    fn spec(&self) -> TfGridSpec {
        TfGridSpec {
            points: self.grid,
            half_width: self.half_width,
            c_k: self.c_k.unwrap_or_else(default_kinetic_prefactor),
            ..TfGridSpec::default()
        }
    }
}

#[derive(Args)]
struct TfDiatomicArgs {
    #[arg(long = "Z1")]
    z1: f64,
    #[arg(long = "Z2")]
    z2: f64,
    #[arg(long = "R")]
    r: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Writes the density to `<out>.f64` with a `<out>.json` sidecar.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TfGammaArgs {
    #[arg(long = "Z1")]
    z1: f64,
    #[arg(long = "Z2")]
    z2: f64,
    /// Comma-separated separations in bohr.
    #[arg(long, value_parser = parse_list)]
    r_list: List,
    #[command(flatten)]
    grid: GridArgs,
    /// CSV file (R, gamma, error bar, gamma R^7).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InequalityArgs {
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    lt_constant: Option<f64>,
}

#[derive(Args)]
struct UnitedAtomArgs {
    #[arg(long = "Z1")]
    z1: f64,
    #[arg(long = "Z2")]
    z2: f64,
    #[arg(long = "N")]
    n: f64,
    #[arg(long, value_parser = parse_list)]
    r_list: List,
    /// Minimise over `tr γ ≤ N` with the shift instead of `tr γ = N`.
    #[arg(long)]
    relaxed: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SaturationArgs {
    #[arg(long = "Z")]
    z: f64,
    #[arg(long, value_parser = parse_list)]
    n_list: List,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

type List = Vec<f64>;
type Splits = Vec<(f64, f64)>;

fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

fn parse_list(s: &str) -> Result<List, String> {
    let v = s.split(',').map(parse_number).collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

fn parse_split(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected N1:N2, got {s:?}"))?;
    Ok((parse_number(a)?, parse_number(b)?))
}

fn parse_splits(s: &str) -> Result<Splits, String> {
    s.split(',').map(parse_split).collect()
}

enum Failure {
    Invalid(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::UnsupportedGeometry(_) | Error::DimensionMismatch { .. } => {
                Failure::Invalid(e.to_string())
            }
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

/// The JSON document and whether every required solve converged.
struct Outcome {
    doc: Value,
    converged: bool,
}

fn outcome(command: &str, result: impl Serialize, converged: bool) -> Result<Outcome, Failure> {
    let result = serde_json::to_value(result).map_err(|e| Failure::Other(e.to_string()))?;
    Ok(Outcome {
        doc: json!({ "command": command, "converged": converged, "result": result }),
        converged,
    })
}

fn csv_file(path: &PathBuf) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn linspace(a: f64, b: f64, steps: usize) -> Result<Vec<f64>, Failure> {
    if steps < 2 || !(a > 0.0 && b > a) {
        return Err(Failure::Invalid(format!(
            "need 0 < r-min < r-max and at least 2 steps, got {a}, {b}, {steps}"
        )));
    }
    Ok((0..steps).map(|i| a + (b - a) * i as f64 / (steps - 1) as f64).collect())
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    match cli.command {
        Command::Atom(AtomCommand::Solve(a)) => {
            let mode = if a.relaxed { TraceMode::TraceLe } else { TraceMode::TraceEq };
            let system = atom_system(a.z, a.solver.n_basis)?;
            let res = minimize_system(&system, a.n, &a.solver.solve(mode, a.shift))?;
            let l = a.lt_constant.unwrap_or_else(default_lieb_thirring_constant);
            let body = json!({
                "z": a.z,
                "n": a.n,
                "n_basis": a.solver.n_basis,
                "mode": mode,
                "shift_included": a.shift,
                "energy": res.objective(a.shift),
                "breakdown": res.breakdown,
                "trace": res.trace_at_solution,
                "occupations": res.dm.occupations(),
                "iterations": res.iterations,
                "gradient_norm": res.gradient_norm,
                "seed": res.seed,
                "lieb_thirring_constant": l,
                "lieb_thirring_slack": lieb_thirring_slack(&res.dm, &system, l)?,
            });
            outcome("atom solve", body, res.converged)
        }
        Command::Diatomic(DiatomicCommand::Scan(a)) => {
            let r_list = linspace(a.r_min, a.r_max, a.steps)?;
            let mut opts = a.solver.experiment(TraceMode::TraceLe, !a.unshifted);
            opts.warm_start = !a.cold;
            let split = a.split.unwrap_or((a.n / 2.0, a.n / 2.0));
            let curve = dissociation_scan(a.z1, a.z2, a.n, split, &r_list, &opts)?;
            if let Some(path) = &a.out {
                curve.write_csv(csv_file(path)?)?;
            }
            let minimum = if a.refine { Some(refine_curve_minimum(&curve, &opts)?) } else { None };
            let converged = curve.points.iter().all(|p| p.converged) && minimum.as_ref().is_none_or(|m| m.converged);
            outcome("diatomic scan", json!({ "curve": curve, "minimum": minimum }), converged)
        }
        Command::Report(ReportCommand::Binding(a)) => {
            let r_list = linspace(a.r_min, a.r_max, a.steps)?;
            let opts = a.solver.experiment(TraceMode::TraceLe, true);
            let report = binding_report(a.z1, a.z2, a.n, &a.splits, &r_list, &opts)?;
            if let Some(path) = &a.out {
                report.shifted.curve.write_csv(csv_file(path)?)?;
            }
            let converged = [&report.shifted, &report.unshifted]
                .iter()
                .all(|c| c.minimum.converged && c.curve.points.iter().all(|p| p.converged));
            outcome("report binding", report, converged)
        }
        Command::Tf(TfCommand::Atom(a)) => {
            let sol = tf_atom(a.z, a.n, a.c_k.unwrap_or_else(default_kinetic_prefactor))?;
            if let Some(path) = &a.out {
                sol.write_csv(csv_file(path)?)?;
            }
            let body = json!({
                "z": sol.z,
                "n": sol.n,
                "n_bound": sol.n_bound,
                "slope": sol.slope,
                "mu": sol.mu,
                "x0": sol.x0,
                "b": sol.b,
                "c_k": sol.c_k,
                "energy": sol.energy,
                "energy_quadrature": sol.energy_quadrature,
                "kinetic": sol.kinetic,
                "attraction": sol.attraction,
                "repulsion": sol.repulsion,
                "electron_count": sol.electron_count,
                "equation_residual": sol.tf_equation_residual(),
            });
            outcome("tf atom", body, true)
        }
        Command::Tf(TfCommand::Diatomic(a)) => {
            let sol = tf_diatomic(a.z1, a.z2, a.r, &a.grid.spec())?;
            if let Some(stem) = &a.out {
                sol.write_density(stem)?;
            }
            let converged = sol.converged;
            outcome("tf diatomic", sol, converged)
        }
        Command::Tf(TfCommand::Gamma(a)) => {
            let spec = a.grid.spec();
            let estimates = a
                .r_list
                .iter()
                .map(|&r| tf_gamma_estimate(a.z1, a.z2, r, &spec))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(path) = &a.out {
                let mut w = csv_file(path)?;
                writeln!(w, "r,gamma,error_bar,gamma_r7")?;
                for e in &estimates {
                    writeln!(w, "{},{},{},{}", e.r, e.gamma, e.error_bar, e.gamma * e.r.powi(7))?;
                }
                w.flush()?;
            }
            let converged = estimates.iter().all(|e| e.converged);
            outcome("tf gamma", estimates, converged)
        }
        Command::Check(CheckCommand::Inequalities(a)) => {
            if a.trials == 0 {
                return Err(Failure::Invalid("need at least one trial".into()));
            }
            let l = a.lt_constant.unwrap_or_else(default_lieb_thirring_constant);
            let report = inequality_report(a.trials, a.seed, l)?;
            let converged = report.lieb_thirring.iter().all(|r| r.converged);
            outcome("check inequalities", report, converged)
        }
        Command::UnitedAtom(a) => {
            let opts = if a.relaxed {
                a.solver.experiment(TraceMode::TraceLe, true)
            } else {
                a.solver.experiment(TraceMode::TraceEq, false)
            };
            let report = united_atom_check(a.z1, a.z2, a.n, &a.r_list, &opts)?;
            if let Some(path) = &a.out {
                let mut w = csv_file(path)?;
                writeln!(w, "r,electronic,slack,converged")?;
                for p in &report.points {
                    writeln!(w, "{},{},{},{}", p.r, p.electronic, p.slack, p.converged)?;
                }
                w.flush()?;
            }
            let converged = report.united_converged && report.points.iter().all(|p| p.converged);
            outcome("united-atom", report, converged)
        }
        Command::Saturation(a) => {
            let opts = a.solver.experiment(TraceMode::TraceLe, true);
            let rows = saturation_scan(a.z, &a.n_list, &opts)?;
            if let Some(path) = &a.out {
                let mut w = csv_file(path)?;
                writeln!(w, "n,trace,shifted,electronic,converged")?;
                for r in &rows {
                    writeln!(w, "{},{},{},{},{}", r.n, r.trace, r.shifted, r.electronic, r.converged)?;
                }
                w.flush()?;
            }
            let converged = rows.iter().all(|r| r.converged);
            outcome("saturation", rows, converged)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = check_constant_identity() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(out) => {
            let text = serde_json::to_string_pretty(&out.doc).expect("JSON values always serialise");
            let mut stdout = std::io::stdout().lock();
            if writeln!(stdout, "{text}").and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            if out.converged {
                ExitCode::SUCCESS
            } else {
                log::warn!("a required solve did not converge");
                ExitCode::from(3)
            }
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
