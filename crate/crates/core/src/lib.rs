//! Hamiltonian Boundary Value Methods HBVM(k,s).
//!
//! Energy-conserving one-step methods for canonical Hamiltonian systems
//! `y' = J∇H(y)`. HBVM(k,s) has order `2s` for every `k ≥ s`, reduces to
//! the s-stage Gauss method when `k = s`, and conserves polynomial
//! Hamiltonians of degree `ν` exactly once `k ≥ sν/2`.
//!
//! The k-stage implicit system is solved in a reduced form with only `s`
//! block unknowns, by fixed-point iteration, simplified Newton, or the
//! blended iteration, which needs a single factorization of a matrix the
//! size of the phase space per step. Separable problems
//! `H = ½pᵀp − U(q)` additionally get a second-order formulation in
//! position space.
//!
//! ```
//! use hbvm::coefficients::MethodTableau;
//! use hbvm::problems::{quintic_oscillator, SeparableSystem};
//! use hbvm::stepper::{SeparableStepper, SolverConfig};
//!
//! let tab = MethodTableau::new(8, 2).unwrap();
//! let problem = quintic_oscillator();
//! let mut stepper = SeparableStepper::new(&tab, &problem, SolverConfig::default());
//! let (q1, p1, stats) = stepper.step(&[0.0], &[1.0], 1e-3).unwrap();
//! assert!(stats.converged);
//! let drift = problem.energy(&q1, &p1) - problem.energy(&[0.0], &[1.0]);
//! assert!(drift.abs() < 1e-12);
//! ```

pub mod coefficients;
pub mod densecore;
pub mod error;
pub mod harness;
pub mod problems;
pub mod stepper;

pub use coefficients::{build_tableau, gauss_rule, legendre_eval, rho_opt, MethodTableau};
pub use error::{CoefficientError, DimensionError, FailureKind, HarnessError, StepFailure};
pub use stepper::{SolverConfig, SolverKind, StepStats};
