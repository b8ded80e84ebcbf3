mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use faircode_core::bounds::{kl_exponent_upper, lower_bound, min_k_for_convexity, optimal_theta, BoundInput};
use faircode_core::channel::exact_packet_error;
use faircode_core::model::{default_epsilon, minimum_load};
use faircode_core::oracle::{grid_joint_optimum, monte_carlo_packet_error, GridSpec, MAX_GRID_FLOWS};
use faircode_core::solver::{dual_value, solve, SolverOptions, Status, StepScaling};
use faircode_core::{validate, Error, Scenario};

#[derive(Parser)]
#[command(name = "faircode", version, about = "Fair coding-rate allocation over multi-hop lossy links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and print the derived channels and cell floors.
    Validate { scenario: PathBuf },
    /// Run the price iteration and write the report and trace.
    Solve {
        scenario: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        price_tol: Option<f64>,
        #[arg(long)]
        violation_tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = Scaling::Curvature)]
        step_scaling: Scaling,
        /// Report path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Tabulate the error bounds of one flow over a range of x.
    Bounds {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        x_from: f64,
        #[arg(long)]
        x_to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Smallest packet size whose error bound is convex on [β + ε, 1/2).
    Mink {
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        /// Margin above β; defaults to max(1e-4, 1e-3 β) per row.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Compare the solver with exhaustive grid search on a small scenario.
    Oracle {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        grid: f64,
        #[arg(long)]
        seed: u64,
        /// Monte Carlo trials per flow for the decoding-error check.
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scaling {
    Curvature,
    Unit,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible { .. } | Error::DegenerateChannel { .. } => 3,
            Error::NumericalFailure(_) => 4,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type Outcome = Result<u8, Failure>;

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(Scenario::from_json(&text)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_validate(path: &Path) -> Outcome {
    let scenario = load(path)?;
    let channels = validate(&scenario)?;
    println!("flow,alpha,beta,x_lower,x_upper");
    for ch in &channels {
        println!(
            "{},{},{},{},{}",
            ch.flow_id,
            report::fmt12(ch.alpha_end_to_end),
            report::fmt12(ch.beta),
            report::fmt12(ch.x_lower),
            report::fmt12(ch.x_upper)
        );
    }
    println!();
    println!("cell,period,minimum_load");
    for cell in &scenario.cells {
        let floor = minimum_load(&scenario, &channels, &cell.id);
        println!("{},{},{}", cell.id, report::fmt12(cell.period), report::fmt12(floor));
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    path: &Path,
    gamma: Option<f64>,
    max_iter: Option<usize>,
    price_tol: Option<f64>,
    violation_tol: Option<f64>,
    scaling: Scaling,
    report_path: Option<&Path>,
    trace_path: Option<&Path>,
) -> Outcome {
    let scenario = load(path)?;
    let defaults = SolverOptions::default();
    let options = SolverOptions {
        step_size: gamma.unwrap_or(defaults.step_size),
        max_iterations: max_iter.unwrap_or(defaults.max_iterations),
        price_tolerance: price_tol,
        violation_tolerance: violation_tol,
        scaling: match scaling {
            Scaling::Curvature => StepScaling::Curvature,
            Scaling::Unit => StepScaling::Unit,
        },
        ..defaults
    };
    let result = solve(&scenario, &options)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let mut text = serde_json::to_string_pretty(&report::report_json(&result))
        .map_err(|e| Failure::usage(e.to_string()))?;
    text.push('\n');
    match report_path {
        Some(p) => write_file(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    if let Some(p) = trace_path {
        let mut buf = Vec::new();
        report::write_trace(&result, &mut buf).map_err(|e| Failure::usage(e.to_string()))?;
        write_file(p, &buf)?;
    }
    if result.status == Status::NotConverged {
        eprintln!("error: price iteration stopped after {} iterations without converging", result.iterations);
        return Ok(4);
    }
    Ok(0)
}

fn cmd_bounds(k: u64, beta: f64, x_from: f64, x_to: f64, steps: usize) -> Outcome {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Failure::usage(format!("--beta must lie in (0, 0.5), got {beta}")));
    }
    if !(x_from > beta && x_to < 0.5 && x_from <= x_to) {
        return Err(Failure::usage(format!(
            "need beta < x-from <= x-to < 0.5, got beta = {beta}, x in [{x_from}, {x_to}]"
        )));
    }
    if steps == 0 || k == 0 {
        return Err(Failure::usage("--k and --steps must be positive"));
    }
    println!("x,theta_star,upper,lower,exact");
    for i in 0..steps {
        let x = if steps == 1 { x_from } else { x_from + (x_to - x_from) * i as f64 / (steps - 1) as f64 };
        let input = BoundInput::new(k, x, beta)?;
        let n = input.codeword_length();
        let exact = if (n - n.round()).abs() <= 1e-9 * n {
            report::fmt12(exact_packet_error(k, n.round() as u64, beta)?)
        } else {
            String::new()
        };
        println!(
            "{},{},{},{},{}",
            report::fmt12(x),
            report::fmt12(optimal_theta(x, beta)?),
            report::fmt12(kl_exponent_upper(input)?),
            report::fmt12(lower_bound(input)),
            exact
        );
    }
    Ok(0)
}

fn cmd_mink(betas: &[f64], eps: Option<f64>) -> Outcome {
    if let Some(e) = eps {
        if e.is_nan() || e <= 0.0 {
            return Err(Failure::usage(format!("--eps must be positive, got {e}")));
        }
    }
    println!("beta,epsilon,min_k");
    for &beta in betas {
        if !(beta > 0.0 && beta < 0.5) {
            return Err(Failure::usage(format!("beta must lie in (0, 0.5), got {beta}")));
        }
        let e = eps.unwrap_or_else(|| default_epsilon(beta));
        let k = min_k_for_convexity(beta, e)?;
        println!("{},{},{}", beta, e, k);
    }
    Ok(0)
}

fn cmd_oracle(path: &Path, spacing: f64, seed: u64, trials: u64) -> Outcome {
    let scenario = load(path)?;
    if scenario.flows.len() > MAX_GRID_FLOWS {
        return Err(Error::TooLarge(format!(
            "{} flows; grid search handles at most {MAX_GRID_FLOWS}",
            scenario.flows.len()
        ))
        .into());
    }
    if spacing.is_nan() || spacing <= 0.0 {
        return Err(Failure::usage(format!("--grid must be positive, got {spacing}")));
    }
    let result = solve(&scenario, &SolverOptions::default())?;
    let grid = grid_joint_optimum(&scenario, &GridSpec { spacing, ranges: None })?;
    let dual = dual_value(&scenario, &result.prices)?;
    let distance = result
        .allocation
        .flows
        .iter()
        .zip(&grid.x)
        .map(|(f, x)| (f.x_star - x).abs())
        .fold(0.0, f64::max);
    let margin = dual - grid.utility;
    println!("solver_utility,{}", report::fmt12(result.utilities.u));
    println!("grid_utility,{}", report::fmt12(grid.utility));
    println!("grid_points,{}", grid.feasible_points);
    println!("argmax_distance,{}", report::fmt12(distance));
    println!("dual_value,{}", report::fmt12(dual));
    println!("weak_duality_margin,{}", report::fmt12(margin));
    println!();
    println!("flow,n_int,exact_error,mc_mean,mc_std_error,seed");
    for f in &result.allocation.flows {
        let mc = monte_carlo_packet_error(f.k, f.codeword_length_int, f.beta, trials, seed)?;
        println!(
            "{},{},{},{},{},{}",
            f.flow_id,
            f.codeword_length_int,
            report::fmt12(f.exact_error),
            report::fmt12(mc.mean),
            report::fmt12(mc.std_error),
            mc.seed
        );
    }
    let agree = result.status == Status::Converged
        && result.utilities.u >= grid.utility - 1e-3
        && distance <= spacing
        && margin >= -1e-9 * grid.utility.abs().max(1.0);
    if agree {
        Ok(0)
    } else {
        eprintln!("error: solver and grid search disagree beyond tolerance");
        Ok(4)
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Solve { scenario, gamma, max_iter, price_tol, violation_tol, step_scaling, report, trace } => {
            cmd_solve(
                &scenario,
                gamma,
                max_iter,
                price_tol,
                violation_tol,
                step_scaling,
                report.as_deref(),
                trace.as_deref(),
            )
        }
        Command::Bounds { k, beta, x_from, x_to, steps } => cmd_bounds(k, beta, x_from, x_to, steps),
        Command::Mink { beta, eps } => cmd_mink(&beta, eps),
        Command::Oracle { scenario, grid, seed, trials } => cmd_oracle(&scenario, grid, seed, trials),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
