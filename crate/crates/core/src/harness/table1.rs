//! Iteration-count sweep over methods × formulations × solvers × step sizes.

use std::fmt::Write as _;
use std::thread;

use super::{integrate_on, Formulation, ProblemKind, RunReport, RunSpec};
use crate::coefficients::MethodTableau;
use crate::error::HarnessError;
use crate::stepper::{SolverConfig, SolverKind};

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub k: usize,
    pub s: usize,
}

impl MethodSpec {
    pub fn new(label: impl Into<String>, k: usize, s: usize) -> Self {
        Self {
            label: label.into(),
            k,
            s,
        }
    }

    /// The 2-stage Gauss method, i.e. HBVM(2,2).
    pub fn gauss2() -> Self {
        Self::new("GAUSS2", 2, 2)
    }

    pub fn hbvm(k: usize, s: usize) -> Self {
        Self::new(format!("HBVM({k},{s})"), k, s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Config {
    pub problem: ProblemKind,
    pub step_sizes: Vec<f64>,
    pub methods: Vec<MethodSpec>,
    pub formulations: Vec<Formulation>,
    pub solvers: Vec<SolverKind>,
    pub t_end: f64,
    /// Tolerances and limits; `kind` is overridden per cell.
    pub solver: SolverConfig,
    /// Run cells on separate threads. Results do not depend on this.
    pub parallel: bool,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Quintic,
            step_sizes: vec![1e-3, 5e-3, 1e-2],
            methods: vec![MethodSpec::gauss2(), MethodSpec::hbvm(8, 2)],
            formulations: vec![Formulation::SecondOrder, Formulation::FirstOrder],
            solvers: vec![SolverKind::Blended, SolverKind::FixedPoint],
            t_end: super::DEFAULT_T_END,
            solver: SolverConfig::default(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Cell {
    pub method: MethodSpec,
    pub h: f64,
    pub formulation: Formulation,
    pub solver: SolverKind,
    pub report: RunReport,
}

impl Table1Cell {
    /// Total iterations, or `None` for a run that failed to converge.
    pub fn total(&self) -> Option<usize> {
        self.report
            .status
            .is_completed()
            .then_some(self.report.total_iterations)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Report {
    pub config: Table1Config,
    pub cells: Vec<Table1Cell>,
}

impl Table1Report {
    pub fn cell(
        &self,
        method: &str,
        h: f64,
        formulation: Formulation,
        solver: SolverKind,
    ) -> Option<&Table1Cell> {
        self.cells.iter().find(|c| {
            c.method.label == method
                && c.h == h
                && c.formulation == formulation
                && c.solver == solver
        })
    }

    /// Plain-text table: one row per step size, one column per
    /// method/formulation/solver, `--` for non-convergence.
    pub fn render(&self) -> String {
        let cfg = &self.config;
        let mut cols = Vec::new();
        for m in &cfg.methods {
            for f in &cfg.formulations {
                for s in &cfg.solvers {
                    cols.push((m.label.clone(), *f, *s));
                }
            }
        }
        let width = 14;
        let mut out = String::new();
        let _ = write!(out, "{:>8}", "h");
        for (m, f, _) in &cols {
            let _ = write!(out, " {:>width$}", format!("{m}/{}", &f.name()[..1]));
        }
        out.push('\n');
        let _ = write!(out, "{:>8}", "");
        for (_, _, s) in &cols {
            let _ = write!(out, " {:>width$}", s.name());
        }
        out.push('\n');
        for &h in &cfg.step_sizes {
            let _ = write!(out, "{h:>8.0e}");
            for (m, f, s) in &cols {
                let text = match self.cell(m, h, *f, *s).and_then(Table1Cell::total) {
                    Some(n) => n.to_string(),
                    None => "--".to_string(),
                };
                let _ = write!(out, " {text:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every cell of the grid. Each run is independent and deterministic,
/// so parallel and serial execution give identical reports.
pub fn table1_experiment(config: &Table1Config) -> Result<Table1Report, HarnessError> {
    let mut jobs = Vec::new();
    for method in &config.methods {
        for &h in &config.step_sizes {
            for &formulation in &config.formulations {
                for &solver in &config.solvers {
                    let mut spec = RunSpec::new(config.problem, formulation, method.k, method.s, h)
                        .with_t_end(config.t_end);
                    spec.solver = SolverConfig {
                        kind: solver,
                        ..config.solver
                    };
                    spec.thin = usize::MAX;
                    spec.validate()?;
                    jobs.push((method.clone(), spec));
                }
            }
        }
    }
    let mut tableaus: Vec<((usize, usize), MethodTableau)> = Vec::new();
    for m in &config.methods {
        if !tableaus.iter().any(|(key, _)| *key == (m.k, m.s)) {
            tableaus.push(((m.k, m.s), MethodTableau::new(m.k, m.s)?));
        }
    }
    let tab_for = |spec: &RunSpec| {
        &tableaus
            .iter()
            .find(|(key, _)| *key == (spec.k, spec.s))
            .expect("built above")
            .1
    };

    let reports: Vec<RunReport> = if config.parallel {
        thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(_, spec)| {
                    let tab = tab_for(spec);
                    scope.spawn(move || integrate_on(spec, tab).1)
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("integration thread panicked"))
                .collect()
        })
    } else {
        jobs.iter()
            .map(|(_, spec)| integrate_on(spec, tab_for(spec)).1)
            .collect()
    };

    let cells = jobs
        .into_iter()
        .zip(reports)
        .map(|((method, spec), report)| Table1Cell {
            method,
            h: spec.h,
            formulation: spec.formulation,
            solver: spec.solver.kind,
            report,
        })
        .collect();
    Ok(Table1Report {
        config: config.clone(),
        cells,
    })
}
