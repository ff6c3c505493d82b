//! Fixed-step integration driver and experiment orchestration.

mod csv;
mod order;
mod table1;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::coefficients::MethodTableau;
use crate::error::{FailureKind, HarnessError};
use crate::problems::{
    as_first_order, harmonic, pendulum, quintic_oscillator, HamiltonianSystem, SeparableSystem,
};
use crate::stepper::{GeneralStepper, SeparableStepper, SolverConfig, SolverKind, StepStats};

pub use self::csv::{
    emit_csv, emit_energy_csv, read_energy_csv, read_phase_csv, write_energy_csv, write_phase_csv,
};
pub use self::order::{order_check, OrderReport};
pub use self::table1::{table1_experiment, MethodSpec, Table1Cell, Table1Config, Table1Report};

/// Default integration interval for desk-scale runs.
pub const DEFAULT_T_END: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemKind {
    Quintic,
    Pendulum,
    Harmonic,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Quintic => "quintic",
            Self::Pendulum => "pendulum",
            Self::Harmonic => "harmonic",
        }
    }
}

impl FromStr for ProblemKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quintic" => Ok(Self::Quintic),
            "pendulum" => Ok(Self::Pendulum),
            "harmonic" => Ok(Self::Harmonic),
            other => Err(HarnessError::UnknownProblem(other.to_string())),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formulation {
    /// `y' = J∇H(y)` with `y = (q, p)`.
    FirstOrder,
    /// `q'' = ∇U(q)`.
    SecondOrder,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Self::FirstOrder => "first",
            Self::SecondOrder => "second",
        }
    }
}

impl FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" | "first-order" => Ok(Self::FirstOrder),
            "second" | "second-order" => Ok(Self::SecondOrder),
            other => Err(format!("unknown formulation '{other}'")),
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: ProblemKind,
    pub formulation: Formulation,
    pub k: usize,
    pub s: usize,
    pub h: f64,
    pub t_end: f64,
    pub solver: SolverConfig,
    /// Record every `thin`-th step (the final state is always recorded).
    pub thin: usize,
    pub phase_out: Option<PathBuf>,
    pub energy_out: Option<PathBuf>,
}

impl RunSpec {
    pub fn new(problem: ProblemKind, formulation: Formulation, k: usize, s: usize, h: f64) -> Self {
        Self {
            problem,
            formulation,
            k,
            s,
            h,
            t_end: DEFAULT_T_END,
            solver: SolverConfig::default(),
            thin: 1,
            phase_out: None,
            energy_out: None,
        }
    }

    pub fn with_solver(mut self, kind: SolverKind) -> Self {
        self.solver.kind = kind;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidSpec(msg));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.h));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if self.s == 0 || self.k < self.s {
            return bad(format!("HBVM({},{}) requires 1 <= s <= k", self.k, self.s));
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        self.solver.validate().map_err(HarnessError::InvalidSpec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Degrees of freedom; each state is `(q_1..q_m, p_1..p_m)`.
    pub dof: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `H(y_n) − H(y_0)` per recorded sample.
    pub energy_error: Vec<f64>,
    /// Stats of every attempted step, including a failed last one.
    pub step_stats: Vec<StepStats>,
}

impl Trajectory {
    fn new(dof: usize, y0: Vec<f64>) -> Self {
        Self {
            dof,
            times: vec![0.0],
            states: vec![y0],
            energy_error: vec![0.0],
            step_stats: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map_or(&[], |v| v)
    }

    pub fn max_abs_energy_error(&self) -> f64 {
        self.energy_error.iter().fold(0.0, |a, e| a.max(e.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Rendered as "--" in iteration tables.
    NoConvergence {
        step: usize,
        time: f64,
        reason: FailureKind,
    },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, Self::Completed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub status: RunStatus,
    pub steps: usize,
    pub total_iterations: usize,
    pub total_gradient_evals: usize,
    pub max_abs_energy_error: f64,
    /// iterations-per-step → number of steps.
    pub iteration_histogram: BTreeMap<usize, usize>,
    pub wall_time: Duration,
}

impl RunReport {
    fn from_trajectory(traj: &Trajectory, status: RunStatus, wall_time: Duration) -> Self {
        let mut hist = BTreeMap::new();
        for st in &traj.step_stats {
            *hist.entry(st.iterations).or_insert(0) += 1;
        }
        Self {
            status,
            steps: traj.step_stats.len(),
            total_iterations: traj.step_stats.iter().map(|s| s.iterations).sum(),
            total_gradient_evals: traj.step_stats.iter().map(|s| s.gradient_evals).sum(),
            max_abs_energy_error: traj.max_abs_energy_error(),
            iteration_histogram: hist,
            wall_time,
        }
    }

    /// Equality on everything but wall time.
    pub fn same_outcome(&self, other: &RunReport) -> bool {
        self.status == other.status
            && self.steps == other.steps
            && self.total_iterations == other.total_iterations
            && self.total_gradient_evals == other.total_gradient_evals
            && self.max_abs_energy_error.to_bits() == other.max_abs_energy_error.to_bits()
            && self.iteration_histogram == other.iteration_histogram
    }
}

/// Step intervals `(t_n, t_{n+1})` covering `[0, t_end]`: uniform `h`, with
/// the last one clipped.
pub fn step_schedule(h: f64, t_end: f64) -> Vec<(f64, f64)> {
    if t_end <= 0.0 {
        return Vec::new();
    }
    let ratio = t_end / h;
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    };
    (0..n)
        .map(|i| {
            let t0 = i as f64 * h;
            let t1 = if i + 1 == n {
                t_end
            } else {
                (i + 1) as f64 * h
            };
            (t0, t1)
        })
        .collect()
}

fn drive(
    dof: usize,
    y0: Vec<f64>,
    h: f64,
    t_end: f64,
    thin: usize,
    energy: impl Fn(&[f64]) -> f64,
    mut step: impl FnMut(&[f64], f64) -> Result<(Vec<f64>, StepStats), crate::error::StepFailure>,
) -> (Trajectory, RunReport) {
    let start = Instant::now();
    let h0 = energy(&y0);
    let mut traj = Trajectory::new(dof, y0.clone());
    let mut y = y0;
    let schedule = step_schedule(h, t_end);
    let n = schedule.len();
    let mut status = RunStatus::Completed;
    for (i, (t0, t1)) in schedule.into_iter().enumerate() {
        match step(&y, t1 - t0) {
            Ok((y1, stats)) => {
                traj.step_stats.push(stats);
                y = y1;
                if (i + 1) % thin == 0 || i + 1 == n {
                    traj.times.push(t1);
                    traj.energy_error.push(energy(&y) - h0);
                    traj.states.push(y.clone());
                }
            }
            Err(fail) => {
                traj.step_stats.push(fail.stats);
                status = RunStatus::NoConvergence {
                    step: i,
                    time: t0,
                    reason: fail.kind,
                };
                break;
            }
        }
    }
    let report = RunReport::from_trajectory(&traj, status, start.elapsed());
    (traj, report)
}

/// Integrates a general Hamiltonian system with fixed steps.
pub fn integrate_hamiltonian<P: HamiltonianSystem + ?Sized>(
    problem: &P,
    tab: &MethodTableau,
    cfg: SolverConfig,
    h: f64,
    t_end: f64,
    thin: usize,
) -> (Trajectory, RunReport) {
    let mut stepper = GeneralStepper::new(tab, problem, cfg);
    drive(
        problem.dof(),
        problem.initial_state(),
        h,
        t_end,
        thin.max(1),
        |y| problem.energy(y),
        |y, dt| stepper.step(y, dt),
    )
}

/// Integrates a separable system in the second-order formulation.
pub fn integrate_separable<S: SeparableSystem + ?Sized>(
    problem: &S,
    tab: &MethodTableau,
    cfg: SolverConfig,
    h: f64,
    t_end: f64,
    thin: usize,
) -> (Trajectory, RunReport) {
    let m = problem.dof();
    let mut stepper = SeparableStepper::new(tab, problem, cfg);
    let mut y0 = problem.initial_position();
    y0.extend(problem.initial_momentum());
    drive(
        m,
        y0,
        h,
        t_end,
        thin.max(1),
        |y| problem.energy(&y[..m], &y[m..]),
        |y, dt| {
            stepper.step(&y[..m], &y[m..], dt).map(|(mut q, p, st)| {
                q.extend(p);
                (q, st)
            })
        },
    )
}

fn integrate_with<S: SeparableSystem>(
    problem: S,
    spec: &RunSpec,
    tab: &MethodTableau,
) -> (Trajectory, RunReport) {
    match spec.formulation {
        Formulation::FirstOrder => integrate_hamiltonian(
            &as_first_order(problem),
            tab,
            spec.solver,
            spec.h,
            spec.t_end,
            spec.thin,
        ),
        Formulation::SecondOrder => {
            integrate_separable(&problem, tab, spec.solver, spec.h, spec.t_end, spec.thin)
        }
    }
}

/// Runs one fixed-step integration. Step failures end the run early and are
/// reported in [`RunReport::status`]; only an invalid spec is an error.
pub fn integrate(spec: &RunSpec) -> Result<(Trajectory, RunReport), HarnessError> {
    spec.validate()?;
    let tab = MethodTableau::new(spec.k, spec.s)?;
    Ok(integrate_on(spec, &tab))
}

/// [`integrate`] with a prebuilt tableau (must match `spec.k`, `spec.s`).
pub fn integrate_on(spec: &RunSpec, tab: &MethodTableau) -> (Trajectory, RunReport) {
    debug_assert_eq!((tab.k, tab.s), (spec.k, spec.s));
    match spec.problem {
        ProblemKind::Quintic => integrate_with(quintic_oscillator(), spec, tab),
        ProblemKind::Pendulum => integrate_with(pendulum(), spec, tab),
        ProblemKind::Harmonic => integrate_with(harmonic(), spec, tab),
    }
}

/// [`integrate`], then writes whichever CSV outputs the spec names.
pub fn run(spec: &RunSpec) -> Result<(Trajectory, RunReport), HarnessError> {
    let (traj, report) = integrate(spec)?;
    if let Some(path) = &spec.phase_out {
        emit_csv(&traj, path)?;
    }
    if let Some(path) = &spec.energy_out {
        emit_energy_csv(&traj, path)?;
    }
    Ok((traj, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_uniform_and_clipped() {
        let s = step_schedule(0.1, 1.0);
        assert_eq!(s.len(), 10);
        assert_eq!(s.last().unwrap().1, 1.0);
        let s = step_schedule(0.3, 1.0);
        assert_eq!(s.len(), 4);
        assert!((s[3].1 - s[3].0 - 0.1).abs() < 1e-12);
        assert!(step_schedule(0.1, 0.0).is_empty());
    }

    #[test]
    fn zero_interval_gives_initial_state_only() {
        let spec =
            RunSpec::new(ProblemKind::Harmonic, Formulation::FirstOrder, 2, 2, 0.1).with_t_end(0.0);
        let (traj, report) = integrate(&spec).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.states[0], vec![1.0, 0.0]);
        assert_eq!(report.total_iterations, 0);
        assert!(report.status.is_completed());
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = RunSpec::new(ProblemKind::Quintic, Formulation::SecondOrder, 8, 2, 1e-3);
        for bad in [
            RunSpec {
                h: 0.0,
                ..base.clone()
            },
            RunSpec {
                h: -1.0,
                ..base.clone()
            },
            RunSpec {
                t_end: -1.0,
                ..base.clone()
            },
            RunSpec {
                k: 1,
                ..base.clone()
            },
            RunSpec {
                s: 0,
                ..base.clone()
            },
            RunSpec {
                thin: 0,
                ..base.clone()
            },
        ] {
            assert!(
                matches!(integrate(&bad), Err(HarnessError::InvalidSpec(_))),
                "{bad:?}"
            );
        }
        assert!("kepler".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn thinning_keeps_final_state() {
        let mut spec = RunSpec::new(ProblemKind::Pendulum, Formulation::SecondOrder, 3, 2, 0.1)
            .with_t_end(1.05);
        let (full, _) = integrate(&spec).unwrap();
        spec.thin = 4;
        let (thin, report) = integrate(&spec).unwrap();
        assert_eq!(full.len(), 12);
        assert_eq!(thin.times, vec![0.0, 0.4, 0.8, 1.05]);
        assert_eq!(thin.last_state(), full.last_state());
        assert_eq!(report.steps, 11);
    }

    #[test]
    fn report_totals_sum_steps() {
        let spec = RunSpec::new(ProblemKind::Quintic, Formulation::FirstOrder, 8, 2, 1e-3)
            .with_t_end(0.05);
        let (traj, report) = integrate(&spec).unwrap();
        let sum: usize = traj.step_stats.iter().map(|s| s.iterations).sum();
        assert_eq!(report.total_iterations, sum);
        assert_eq!(
            report.iteration_histogram.values().sum::<usize>(),
            report.steps
        );
    }
}
