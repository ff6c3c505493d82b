//! Stage solvers for HBVM(k,s) in the reduced γ-formulation.
//!
//! Both formulations reduce to a nonlinear system `F(γ) = 0` with `s`
//! blocks whose simplified-Newton matrix has the Kronecker form
//! `I − τ S ⊗ G₀`:
//!
//! | formulation  | τ   | S      | ρ used in blending | G₀          |
//! |--------------|-----|--------|--------------------|-------------|
//! | first order  | h   | X_s    | ρ_s                | J ∇²H(y₀)   |
//! | second order | h²  | X_s²   | ρ_s²               | ∇²U(q₀)     |
//!
//! [`ReducedLinearization`] captures that triple so the Newton and blended
//! solvers are shared between [`general`] and [`separable`].

pub mod general;
pub mod separable;

use std::fmt;
use std::str::FromStr;

use crate::densecore::{
    blockwise_apply, kron_apply, kron_scalar_apply, BlockVector, LuFactor, Matrix,
};
use crate::error::{FailureKind, StepFailure};

pub use general::{advance, residual, GeneralStepper};
pub use separable::{advance_qp, residual_q, SeparableStepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    FixedPoint,
    NewtonDirect,
    Blended,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [Self::FixedPoint, Self::NewtonDirect, Self::Blended];

    pub fn name(self) -> &'static str {
        match self {
            Self::FixedPoint => "fixed-point",
            Self::NewtonDirect => "newton",
            Self::Blended => "blended",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed-point" | "fixed_point" | "fixedpoint" => Ok(Self::FixedPoint),
            "newton" | "newton-direct" => Ok(Self::NewtonDirect),
            "blended" => Ok(Self::Blended),
            other => Err(format!("unknown solver '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Consecutive growing increments tolerated before declaring divergence.
    pub divergence_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Blended,
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_iter: 100,
            divergence_window: 5,
        }
    }
}

impl SolverConfig {
    pub fn with_kind(kind: SolverKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if self.max_iter == 0 {
            return Err("max_iter must be at least 1".into());
        }
        if self.divergence_window == 0 {
            return Err("divergence window must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-step accounting. One iteration is one residual evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    pub converged: bool,
    /// `‖F(γ)‖∞` at the last residual evaluation.
    pub residual_norm: f64,
    /// `‖Δ‖∞` of the last update, the quantity tested by the stopping rule.
    pub increment_norm: f64,
    pub gradient_evals: usize,
    pub factorizations: usize,
}

/// The Kronecker-structured linear part `I − τ S ⊗ G₀` of a reduced system,
/// together with the blending data.
#[derive(Debug, Clone)]
pub struct ReducedLinearization {
    pub s_mat: Matrix,
    pub s_inv: Matrix,
    pub tau: f64,
    pub rho: f64,
    pub g0: Matrix,
}

impl ReducedLinearization {
    pub fn blocks(&self) -> usize {
        self.s_mat.rows()
    }

    pub fn block_dim(&self) -> usize {
        self.g0.rows()
    }

    /// Dense `I − τ S ⊗ G₀`, size `s·d`.
    pub fn newton_matrix(&self) -> Matrix {
        let mut m = self.s_mat.kron(&self.g0).scaled(-self.tau);
        for i in 0..m.rows() {
            m[(i, i)] += 1.0;
        }
        m
    }

    /// `(I − τ S ⊗ G₀) v`, without forming the matrix.
    pub fn apply(&self, v: &BlockVector) -> BlockVector {
        let mut out = kron_apply(&self.s_mat, &self.g0, v).expect("conforming blocks");
        for (o, x) in out.as_mut_slice().iter_mut().zip(v.as_slice()) {
            *o = x - self.tau * *o;
        }
        out
    }
}

/// The blended solver for `(I − τ S ⊗ G₀) Δ = η`.
///
/// The weight `θ = I_s ⊗ (I − ρτG₀)⁻¹` is applied as a block-wise solve with
/// a single d×d factorization.
#[derive(Debug, Clone)]
pub struct BlendedOperator {
    lin: ReducedLinearization,
    sigma: LuFactor,
}

impl BlendedOperator {
    /// Factors `I − ρτG₀`; `None` if it is singular.
    pub fn new(lin: ReducedLinearization) -> Option<Self> {
        let d = lin.block_dim();
        let mut m = lin.g0.scaled(-lin.rho * lin.tau);
        for i in 0..d {
            m[(i, i)] += 1.0;
        }
        let sigma = LuFactor::new(&m).ok()?;
        (!sigma.is_singular()).then_some(Self { lin, sigma })
    }

    pub fn linearization(&self) -> &ReducedLinearization {
        &self.lin
    }

    /// `θ v`.
    pub fn theta_apply(&self, v: &BlockVector) -> BlockVector {
        let mut out = v.clone();
        for j in 0..out.blocks() {
            self.sigma.solve_in_place(out.block_mut(j));
        }
        out
    }

    /// `η₁ = ρ (S⁻¹ ⊗ I) η`.
    pub fn eta1(&self, eta: &BlockVector) -> BlockVector {
        let mut out = kron_scalar_apply(&self.lin.s_inv, eta).expect("conforming blocks");
        out.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v *= self.lin.rho);
        out
    }

    /// The blended residual
    /// `T(Δ) = θ[(I − τS⊗G₀)Δ − η] + (I − θ)[ρ(S⁻¹⊗I − τ I⊗G₀)Δ − η₁]`.
    pub fn blended_residual(
        &self,
        delta: &BlockVector,
        eta: &BlockVector,
        eta1: &BlockVector,
    ) -> BlockVector {
        let lin = &self.lin;
        let mut r1 = lin.apply(delta);
        r1.axpy(-1.0, eta);

        let mut r2 = kron_scalar_apply(&lin.s_inv, delta).expect("conforming blocks");
        let g_delta = blockwise_apply(&lin.g0, delta);
        for (o, g) in r2.as_mut_slice().iter_mut().zip(g_delta.as_slice()) {
            *o = lin.rho * (*o - lin.tau * g);
        }
        r2.axpy(-1.0, eta1);

        // T = r2 + θ (r1 − r2)
        let mut diff = r1;
        diff.axpy(-1.0, &r2);
        let mut t = self.theta_apply(&diff);
        t.axpy(1.0, &r2);
        t
    }

    /// One blended sweep `Δ ← Δ − θ T(Δ)`.
    pub fn sweep(&self, delta: &BlockVector, eta: &BlockVector, eta1: &BlockVector) -> BlockVector {
        let t = self.blended_residual(delta, eta, eta1);
        let mut next = delta.clone();
        next.axpy(-1.0, &self.theta_apply(&t));
        next
    }
}

/// How each outer iteration turns `η = −F(γ)` into an update `Δ`.
pub(crate) enum Correction {
    FixedPoint,
    Newton(LuFactor),
    Blended(BlendedOperator),
}

impl Correction {
    /// Builds the correction for `kind`, counting factorizations in `stats`.
    pub(crate) fn prepare(
        kind: SolverKind,
        lin: impl FnOnce() -> ReducedLinearization,
        stats: &mut StepStats,
    ) -> Result<Self, FailureKind> {
        match kind {
            SolverKind::FixedPoint => Ok(Self::FixedPoint),
            SolverKind::NewtonDirect => {
                let m = lin().newton_matrix();
                let lu = LuFactor::new(&m).expect("square");
                stats.factorizations += 1;
                if lu.is_singular() {
                    return Err(FailureKind::Singular);
                }
                Ok(Self::Newton(lu))
            }
            SolverKind::Blended => {
                stats.factorizations += 1;
                BlendedOperator::new(lin())
                    .map(Self::Blended)
                    .ok_or(FailureKind::Singular)
            }
        }
    }

    fn correct(&self, eta: BlockVector) -> BlockVector {
        match self {
            Self::FixedPoint => eta,
            Self::Newton(lu) => {
                let mut d = eta;
                lu.solve_in_place(d.as_mut_slice());
                d
            }
            Self::Blended(op) => {
                let eta1 = op.eta1(&eta);
                let zero = BlockVector::zeros(eta.blocks(), eta.block_dim());
                op.sweep(&zero, &eta, &eta1)
            }
        }
    }
}

/// Outer iteration shared by every solver: `γ ← γ + correction(−F(γ))`
/// until `‖Δ‖∞ ≤ abs_tol + rel_tol ‖γ‖∞`.
pub(crate) fn iterate(
    cfg: &SolverConfig,
    gamma: &mut BlockVector,
    correction: &Correction,
    mut stats: StepStats,
    mut residual: impl FnMut(&BlockVector, &mut StepStats) -> Result<BlockVector, FailureKind>,
) -> Result<StepStats, StepFailure> {
    let mut prev = f64::INFINITY;
    let mut growth = 0;
    for it in 1..=cfg.max_iter {
        stats.iterations = it;
        let mut eta = match residual(gamma, &mut stats) {
            Ok(f) => f,
            Err(kind) => return Err(StepFailure { kind, stats }),
        };
        stats.residual_norm = eta.norm_inf();
        eta.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        let delta = correction.correct(eta);
        let norm = delta.norm_inf();
        stats.increment_norm = norm;
        if !norm.is_finite() {
            return Err(StepFailure {
                kind: FailureKind::Diverged,
                stats,
            });
        }
        gamma.axpy(1.0, &delta);
        if norm <= cfg.abs_tol + cfg.rel_tol * gamma.norm_inf() {
            stats.converged = true;
            return Ok(stats);
        }
        if norm > prev {
            growth += 1;
            if growth >= cfg.divergence_window {
                return Err(StepFailure {
                    kind: FailureKind::Diverged,
                    stats,
                });
            }
        } else {
            growth = 0;
        }
        prev = norm;
    }
    Err(StepFailure {
        kind: FailureKind::MaxIterations(cfg.max_iter),
        stats,
    })
}
