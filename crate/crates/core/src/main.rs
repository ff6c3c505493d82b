use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hbvm::coefficients::{rho_opt, MAX_DEGREE};
use hbvm::harness::{
    self, order_check, table1_experiment, Formulation, MethodSpec, ProblemKind, RunSpec, RunStatus,
    Table1Config, DEFAULT_T_END,
};
use hbvm::stepper::{SolverConfig, SolverKind};
use hbvm::HarnessError;

const EXIT_USAGE: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "hbvm",
    version,
    about = "Energy-conserving HBVM(k,s) integrators and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one problem with fixed steps and optionally write CSV output.
    Integrate(IntegrateArgs),
    /// Total iteration counts over step sizes, methods, formulations and solvers.
    Table1(Table1Args),
    /// Print the blending parameter rho_s for s = 1..=10.
    RhoTable,
    /// Measure the convergence order by repeated step halving.
    OrderCheck(OrderArgs),
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value = "blended", value_parser = parse_solver)]
    solver: SolverKind,
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-14)]
    abs_tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            kind: self.solver,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_iter: self.max_iter,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    #[arg(long, default_value = "quintic", value_parser = parse_problem)]
    problem: ProblemKind,
    #[arg(long, default_value = "second", value_parser = parse_formulation)]
    formulation: Formulation,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    #[arg(long, default_value_t = DEFAULT_T_END)]
    t_end: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Phase-portrait CSV (t, q..., p...).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Energy-error CSV (t, H_error).
    #[arg(long)]
    energy_out: Option<PathBuf>,
    /// Record every N-th step.
    #[arg(long, default_value_t = 1)]
    thin: usize,
}

#[derive(Args, Debug)]
struct Table1Args {
    #[arg(long, default_value = "quintic", value_parser = parse_problem)]
    problem: ProblemKind,
    /// Step sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 5e-3, 1e-2])]
    h: Vec<f64>,
    /// Node count of the energy-conserving method compared against GAUSS2.
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long, default_value_t = DEFAULT_T_END)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-14)]
    abs_tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

#[derive(Args, Debug)]
struct OrderArgs {
    #[arg(long, default_value = "pendulum", value_parser = parse_problem)]
    problem: ProblemKind,
    #[arg(long, default_value = "second", value_parser = parse_formulation)]
    formulation: Formulation,
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    /// Coarsest step size.
    #[arg(long, default_value_t = 0.2)]
    h: f64,
    #[arg(long, default_value_t = 4)]
    halvings: usize,
    #[arg(long, default_value_t = 2.0)]
    t_end: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

fn parse_problem(s: &str) -> Result<ProblemKind, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

fn parse_formulation(s: &str) -> Result<Formulation, String> {
    s.parse()
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse()
}

fn cmd_integrate(args: IntegrateArgs) -> Result<u8, HarnessError> {
    let spec = RunSpec {
        problem: args.problem,
        formulation: args.formulation,
        k: args.k,
        s: args.s,
        h: args.h,
        t_end: args.t_end,
        solver: args.solver.config(),
        thin: args.thin,
        phase_out: args.out,
        energy_out: args.energy_out,
    };
    let (traj, report) = harness::run(&spec)?;
    println!(
        "HBVM({},{}) {} {}-order {} h={:e} t_end={}",
        spec.k, spec.s, spec.problem, spec.formulation, spec.solver.kind, spec.h, spec.t_end
    );
    println!("steps:            {}", report.steps);
    println!("total iterations: {}", report.total_iterations);
    println!("gradient evals:   {}", report.total_gradient_evals);
    println!("max |H - H0|:     {:.3e}", report.max_abs_energy_error);
    println!("final state:      {:?}", traj.last_state());
    println!("wall time:        {:.3?}", report.wall_time);
    match report.status {
        RunStatus::Completed => {
            println!("status:           converged");
            Ok(0)
        }
        RunStatus::NoConvergence { step, time, reason } => {
            println!("status:           no convergence at step {step} (t = {time}): {reason}");
            Ok(EXIT_NO_CONVERGENCE)
        }
    }
}

fn cmd_table1(args: Table1Args) -> Result<u8, HarnessError> {
    let config = Table1Config {
        problem: args.problem,
        step_sizes: args.h,
        methods: vec![MethodSpec::gauss2(), MethodSpec::hbvm(args.k, args.s)],
        t_end: args.t_end,
        solver: SolverConfig {
            rel_tol: args.rel_tol,
            abs_tol: args.abs_tol,
            max_iter: args.max_iter,
            ..SolverConfig::default()
        },
        ..Table1Config::default()
    };
    let report = table1_experiment(&config)?;
    println!(
        "total iterations, {} on [0, {}] (-- if no convergence)",
        config.problem, config.t_end
    );
    print!("{}", report.render());
    Ok(0)
}

fn cmd_rho_table() -> Result<u8, HarnessError> {
    println!("{:>3}  {:>12}", "s", "rho_s");
    for s in 1..=MAX_DEGREE {
        println!("{s:>3}  {:>12.10}", rho_opt(s)?);
    }
    Ok(0)
}

fn cmd_order_check(args: OrderArgs) -> Result<u8, HarnessError> {
    let mut spec =
        RunSpec::new(args.problem, args.formulation, args.k, args.s, args.h).with_t_end(args.t_end);
    spec.solver = args.solver.config();
    let report = order_check(&spec, args.halvings)?;
    let kind = if report.exact_reference {
        "error vs exact"
    } else {
        "successive difference"
    };
    println!(
        "HBVM({},{}) {} {}-order, t_end={}",
        args.k, args.s, args.problem, args.formulation, args.t_end
    );
    println!("{:>10}  {:>22}  {:>8}", "h", kind, "slope");
    for (i, e) in report.errors.iter().enumerate() {
        let slope = if i == 0 {
            String::new()
        } else {
            format!("{:.3}", report.slopes[i - 1])
        };
        println!("{:>10.6}  {:>22.6e}  {:>8}", report.step_sizes[i], e, slope);
    }
    println!(
        "fitted order: {:.3} (expected {})",
        report.fitted_order,
        2 * args.s
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Integrate(a) => cmd_integrate(a),
        Command::Table1(a) => cmd_table1(a),
        Command::RhoTable => cmd_rho_table(),
        Command::OrderCheck(a) => cmd_order_check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
