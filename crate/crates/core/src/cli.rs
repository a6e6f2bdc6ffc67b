//! The `diverge` command-line tool.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calibration::{calibrate, CalibrationOptions, CoefficientBounds, DataPoint, SolverKind};
use crate::datagen::{demand_sweep, generate_dataset, SimulationConfig};
use crate::equilibrium::{solve_fixed_point, EquilibriumReport, SolverOptions};
use crate::error::{Error, Result};
use crate::io::{format_coefficients, parse_coefficients, read_dataset, write_dataset, CoefficientsFile};
use crate::model::{
    check_uniqueness_condition, wardrop_residuals, CostCoefficients, DemandConfig, DivergeInstance, Link,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_SOLVER_GUARD: i32 = 3;
pub const EXIT_CONDITION_FAILED: i32 = 4;

const EXIT_CODES: &str = "\
Exit status:
  0  success
  1  invalid input: flags, file syntax, infeasible data, I/O
  2  equilibrium iteration did not converge
  3  exact calibration refused: dataset too large, use --solver heuristic
  4  condition failed: uniqueness check (check) or Wardrop verdict (verify)";

#[derive(Parser, Debug)]
#[command(name = "diverge", version, about = "Lane-choice equilibrium at a diverge with a bifurcating lane", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the equilibrium for one demand split and print it as CSV.
    Solve {
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        q1: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve over a range of q1 and write a dataset CSV.
    Sweep {
        #[arg(long)]
        coeffs: PathBuf,
        /// q1 range as lo:hi.
        #[arg(long, default_value = "0.36:0.62")]
        range: String,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Total demand recorded in the total_demand_vph column.
        #[arg(long = "D", default_value_t = 3000.0)]
        total_demand: f64,
        /// Output path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Simulate drivers over a demand sweep and write a dataset CSV.
    Generate {
        #[arg(long)]
        coeffs: PathBuf,
        /// Total demand in vehicles per hour.
        #[arg(long = "D", default_value_t = 3000.0)]
        total_demand: f64,
        /// Exit-1 demands as start:end:step in vehicles per hour.
        #[arg(long, default_value = "1150:1850:50")]
        sweep: String,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        /// Number of simulated drivers per data point.
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        rounds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit coefficients to a dataset by minimising violated equilibrium conditions.
    Calibrate {
        #[arg(long)]
        data: PathBuf,
        /// Tie cf1 = cf2 = cb, lambda1 = lambda2, mu1 = mu2.
        #[arg(long)]
        symmetry: bool,
        #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
        solver: SolverArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        restarts: usize,
        /// Largest number of binaries the exact solver accepts.
        #[arg(long, default_value_t = 28)]
        max_binaries: usize,
        /// Bounds lo:hi for cf1, cf2, cb and nu.
        #[arg(long, default_value = "1:10")]
        rate_bounds: String,
        #[arg(long, default_value_t = 1e3)]
        big_m: f64,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        /// Where to write the fitted coefficient file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the uniqueness margin of each link.
    Check {
        #[arg(long)]
        coeffs: PathBuf,
    },
    /// Check every dataset row against the equilibrium conditions.
    Verify {
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Convergence tolerance of the iteration.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions { convergence_tol: self.tol, max_iterations: self.max_iterations, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Exact,
    Heuristic,
}

/// Runs the tool on `args` (including the program name) and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::SolverGuard { .. } = e {
                let _ = writeln!(err, "hint: rerun with --solver heuristic, or raise --max-binaries");
                EXIT_SOLVER_GUARD
            } else {
                EXIT_INPUT
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Solve { coeffs, q1, solver } => {
            let c = load_coefficients(&coeffs)?;
            let report = solve_at(&c, q1, &solver.options())?;
            writeln!(out, "q1,q2,xf1,xb1,xf2,xb2,converged,max_residual")?;
            write_solve_row(out, &report, q1)?;
            Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Sweep { coeffs, range, step, total_demand, out: path, solver } => {
            let c = load_coefficients(&coeffs)?;
            let (lo, hi) = parse_range(&range)?;
            let grid = q1_grid(lo, hi, step)?;
            let opts = solver.options();
            let mut all_converged = true;
            let mut data = Vec::with_capacity(grid.len());
            for q1 in grid {
                let report = solve_at(&c, q1, &opts)?;
                all_converged &= report.converged;
                let demand = DemandConfig::from_q1(q1)?;
                data.push(DataPoint { demand, flow: report.flow, total_demand_vph: total_demand });
            }
            emit_dataset(path.as_deref(), &data, out)?;
            Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Generate { coeffs, total_demand, sweep, sigma, n, seed, rounds, out: path } => {
            let c = load_coefficients(&coeffs)?;
            let (a, b, s) = parse_sweep(&sweep)?;
            let cfg = SimulationConfig {
                n_vehicles: n,
                sigma,
                rounds,
                seed,
                total_demand_vph: total_demand,
                demand_sweep: demand_sweep(a, b, s)?,
            };
            let data = generate_dataset(&c, &cfg)?;
            emit_dataset(path.as_deref(), &data, out)?;
            Ok(EXIT_OK)
        }
        Command::Calibrate {
            data,
            symmetry,
            solver,
            seed,
            restarts,
            max_binaries,
            rate_bounds,
            big_m,
            epsilon,
            out: path,
        } => {
            let points = load_dataset(&data)?;
            let (lo, hi) = parse_range(&rate_bounds)?;
            let opts = CalibrationOptions {
                big_m,
                epsilon,
                symmetry,
                bounds: CoefficientBounds::with_rate_range(lo, hi),
                solver: match solver {
                    SolverArg::Exact => SolverKind::Exact,
                    SolverArg::Heuristic => SolverKind::Heuristic,
                },
                seed,
                restarts,
                max_binaries,
            };
            let result = calibrate(&points, &opts)?;
            let file = format_coefficients(&CoefficientsFile { coefficients: result.coefficients, symmetry });
            match path {
                Some(p) => write_file(&p, file.as_bytes())?,
                None => write!(out, "{file}")?,
            }
            let conditions = 4 * points.len();
            writeln!(out, "# violations: {} of {conditions}", result.violations)?;
            writeln!(out, "# certificate: {:?}", result.certificate)?;
            for (link, (m, ok)) in Link::BOTH.iter().zip(result.uniqueness.margins.iter().zip(result.uniqueness.holds)) {
                writeln!(out, "# uniqueness link {}: margin {m} {}", link.index(), pass_word(ok))?;
            }
            writeln!(out, "# flags k,ef1,eb1,ef2,eb2")?;
            for (k, f) in result.indicator_assignment.iter().enumerate() {
                let [a, b, c, d] = f.to_array().map(u8::from);
                writeln!(out, "# {},{a},{b},{c},{d}", k + 1)?;
            }
            Ok(EXIT_OK)
        }
        Command::Check { coeffs } => {
            let c = load_coefficients(&coeffs)?;
            let u = check_uniqueness_condition(&c);
            writeln!(out, "link,margin,result")?;
            for (k, (m, ok)) in u.margins.iter().zip(u.holds).enumerate() {
                writeln!(out, "{},{m},{}", k + 1, pass_word(ok))?;
            }
            Ok(if u.both() { EXIT_OK } else { EXIT_CONDITION_FAILED })
        }
        Command::Verify { coeffs, data, tol } => {
            if !(tol >= 0.0) {
                return Err(Error::Argument(format!("tolerance must be non-negative, got {tol}")));
            }
            let c = load_coefficients(&coeffs)?;
            let points = load_dataset(&data)?;
            writeln!(out, "k,max_residual,equilibrium")?;
            let mut all = true;
            for (k, p) in points.iter().enumerate() {
                let g = DivergeInstance::new(p.demand, c)?;
                let r = wardrop_residuals(&g, &p.flow)?.max();
                let ok = r <= tol;
                all &= ok;
                writeln!(out, "{},{r},{ok}", k + 1)?;
            }
            Ok(if all { EXIT_OK } else { EXIT_CONDITION_FAILED })
        }
    }
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn solve_at(c: &CostCoefficients, q1: f64, opts: &SolverOptions) -> Result<EquilibriumReport> {
    let g = DivergeInstance::new(DemandConfig::from_q1(q1)?, *c)?;
    solve_fixed_point(&g, opts)
}

fn write_solve_row(out: &mut dyn Write, r: &EquilibriumReport, q1: f64) -> Result<()> {
    let x = &r.flow;
    writeln!(
        out,
        "{q1},{},{},{},{},{},{},{}",
        1.0 - q1,
        x.xf1(),
        x.xb1(),
        x.xf2(),
        x.xb2(),
        r.converged,
        r.residuals.max()
    )?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_coefficients(path: &Path) -> Result<CostCoefficients> {
    let text = read_file(path)?;
    parse_coefficients(&text).map(|f| f.coefficients).map_err(|e| with_path(path, e))
}

fn load_dataset(path: &Path) -> Result<Vec<DataPoint>> {
    let text = read_file(path)?;
    let data = read_dataset(text.as_bytes()).map_err(|e| with_path(path, e))?;
    if data.is_empty() {
        return Err(Error::Argument(format!("{}: dataset has no rows", path.display())));
    }
    Ok(data)
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, column, message } => {
            Error::Parse { line, column, message: format!("{}: {message}", path.display()) }
        }
        other => other,
    }
}

fn emit_dataset(path: Option<&Path>, data: &[DataPoint], out: &mut dyn Write) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, data)?;
    match path {
        Some(p) => write_file(p, &buf),
        None => Ok(out.write_all(&buf)?),
    }
}

fn parse_number(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Argument(format!("{what}: `{s}` is not a number")))
}

/// `lo:hi` with `lo <= hi`.
fn parse_range(s: &str) -> Result<(f64, f64)> {
    let Some((a, b)) = s.split_once(':') else {
        return Err(Error::Argument(format!("expected lo:hi, got `{s}`")));
    };
    let (lo, hi) = (parse_number(a, "range")?, parse_number(b, "range")?);
    if !(lo <= hi) {
        return Err(Error::Argument(format!("range `{s}` has lo > hi")));
    }
    Ok((lo, hi))
}

fn parse_sweep(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts[..] else {
        return Err(Error::Argument(format!("expected start:end:step, got `{s}`")));
    };
    Ok((parse_number(a, "sweep")?, parse_number(b, "sweep")?, parse_number(step, "sweep")?))
}

/// `lo, lo + step, ..` through `hi`, tolerating rounding in the last step.
fn q1_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::Argument(format!("step must be positive, got {step}")));
    }
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
        return Err(Error::Argument(format!("q1 range must lie in [0, 1], got {lo}:{hi}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| (lo + step * k as f64).min(hi)).collect())
}
