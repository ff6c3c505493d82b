//! HBVM(k,s) step for a general canonical Hamiltonian system.
//!
//! The unknown is `γ = (γ_0, …, γ_{s−1})`, `γ_j ∈ ℝ^{2m}`, the coefficients of
//! `σ'(t₀ + τh)` in the orthonormal basis. Stages are
//! `Y_i = y₀ + h Σ_j Iint_ij γ_j` and the system to solve is
//! `F(γ) = γ − (P_sᵀΩ ⊗ J) ∇H(Y) = 0`.

use crate::coefficients::MethodTableau;
use crate::densecore::BlockVector;
use crate::error::{FailureKind, StepFailure};
use crate::problems::{apply_j, j_times, HamiltonianSystem};

use super::{iterate, Correction, ReducedLinearization, SolverConfig, SolverKind, StepStats};

/// One-step integrator over an immutable tableau and problem. Holds stage
/// scratch buffers, so a single instance is not meant to be shared.
pub struct GeneralStepper<'a, P: ?Sized> {
    tab: &'a MethodTableau,
    problem: &'a P,
    cfg: SolverConfig,
    stages: Vec<f64>,
    grads: Vec<f64>,
}

impl<'a, P: HamiltonianSystem + ?Sized> GeneralStepper<'a, P> {
    pub fn new(tab: &'a MethodTableau, problem: &'a P, cfg: SolverConfig) -> Self {
        let d = problem.state_dim();
        Self {
            tab,
            problem,
            cfg,
            stages: vec![0.0; tab.k * d],
            grads: vec![0.0; tab.k * d],
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn set_config(&mut self, cfg: SolverConfig) {
        self.cfg = cfg;
    }

    pub fn tableau(&self) -> &MethodTableau {
        self.tab
    }

    fn dim(&self) -> usize {
        self.problem.state_dim()
    }

    /// Stage values `Y_i`, flattened `k × 2m`.
    pub fn stage_values(&mut self, gamma: &BlockVector, y0: &[f64], h: f64) -> &[f64] {
        self.fill_stages(gamma, y0, h);
        &self.stages
    }

    fn fill_stages(&mut self, gamma: &BlockVector, y0: &[f64], h: f64) {
        let d = self.dim();
        let tab = self.tab;
        for i in 0..tab.k {
            let yi = &mut self.stages[i * d..(i + 1) * d];
            yi.copy_from_slice(y0);
            for j in 0..tab.s {
                let w = h * tab.iint[(i, j)];
                for (y, g) in yi.iter_mut().zip(gamma.block(j)) {
                    *y += w * g;
                }
            }
        }
    }

    /// `F(γ)`. Reports the first stage whose gradient is not finite.
    pub fn residual(
        &mut self,
        gamma: &BlockVector,
        y0: &[f64],
        h: f64,
    ) -> Result<BlockVector, FailureKind> {
        let d = self.dim();
        let tab = self.tab;
        self.fill_stages(gamma, y0, h);
        for i in 0..tab.k {
            let (y, g) = (
                &self.stages[i * d..(i + 1) * d],
                &mut self.grads[i * d..(i + 1) * d],
            );
            self.problem.gradient(y, g);
            if !g.iter().all(|v| v.is_finite()) {
                return Err(FailureKind::NonFinite { stage: i });
            }
        }
        let mut out = gamma.clone();
        let mut proj = vec![0.0; d];
        let mut jproj = vec![0.0; d];
        for j in 0..tab.s {
            proj.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..tab.k {
                let w = tab.projection[(j, i)];
                for (p, g) in proj.iter_mut().zip(&self.grads[i * d..(i + 1) * d]) {
                    *p += w * g;
                }
            }
            apply_j(&proj, &mut jproj);
            for (o, v) in out.block_mut(j).iter_mut().zip(&jproj) {
                *o -= v;
            }
        }
        Ok(out)
    }

    /// Linear part of the simplified Newton iteration, frozen at `y₀`.
    pub fn linearization(&self, y0: &[f64], h: f64) -> ReducedLinearization {
        ReducedLinearization {
            s_mat: self.tab.x_s.clone(),
            s_inv: self.tab.x_s_inv.clone(),
            tau: h,
            rho: self.tab.rho,
            g0: j_times(&self.problem.hessian(y0)),
        }
    }

    fn solve_with(
        &mut self,
        kind: SolverKind,
        y0: &[f64],
        h: f64,
    ) -> Result<(BlockVector, StepStats), StepFailure> {
        let mut stats = StepStats::default();
        if !(h > 0.0 && h.is_finite()) {
            return Err(StepFailure {
                kind: FailureKind::InvalidStepSize(h),
                stats,
            });
        }
        let correction = Correction::prepare(kind, || self.linearization(y0, h), &mut stats)
            .map_err(|kind| StepFailure {
                kind,
                stats: stats.clone(),
            })?;
        let mut gamma = BlockVector::zeros(self.tab.s, self.dim());
        let cfg = self.cfg;
        let k = self.tab.k;
        let stats = iterate(&cfg, &mut gamma, &correction, stats, |g, st| {
            st.gradient_evals += k;
            self.residual(g, y0, h)
        })?;
        Ok((gamma, stats))
    }

    /// Direct substitution `γ ← (P_sᵀΩ ⊗ J) ∇H(Y(γ))`.
    pub fn solve_fixed_point(
        &mut self,
        y0: &[f64],
        h: f64,
    ) -> Result<(BlockVector, StepStats), StepFailure> {
        self.solve_with(SolverKind::FixedPoint, y0, h)
    }

    /// Simplified Newton with the dense `(I − hX_s ⊗ G₀)` factored once.
    pub fn solve_newton_direct(
        &mut self,
        y0: &[f64],
        h: f64,
    ) -> Result<(BlockVector, StepStats), StepFailure> {
        self.solve_with(SolverKind::NewtonDirect, y0, h)
    }

    /// Nonlinear blended iteration: one blended sweep from `Δ = 0` per
    /// residual evaluation.
    pub fn solve_blended(
        &mut self,
        y0: &[f64],
        h: f64,
    ) -> Result<(BlockVector, StepStats), StepFailure> {
        self.solve_with(SolverKind::Blended, y0, h)
    }

    /// Solves with the configured solver.
    pub fn solve(&mut self, y0: &[f64], h: f64) -> Result<(BlockVector, StepStats), StepFailure> {
        self.solve_with(self.cfg.kind, y0, h)
    }

    /// One step `y₀ → y₁`.
    pub fn step(&mut self, y0: &[f64], h: f64) -> Result<(Vec<f64>, StepStats), StepFailure> {
        let (gamma, stats) = self.solve(y0, h)?;
        Ok((advance(y0, h, &gamma), stats))
    }
}

/// `y₁ = σ(t₀ + h) = y₀ + h γ_0`; only `P̂_0` has nonzero mean on `[0, 1]`.
pub fn advance(y0: &[f64], h: f64, gamma: &BlockVector) -> Vec<f64> {
    y0.iter()
        .zip(gamma.block(0))
        .map(|(y, g)| y + h * g)
        .collect()
}

/// Free-function form of [`GeneralStepper::residual`].
pub fn residual<P: HamiltonianSystem + ?Sized>(
    gamma: &BlockVector,
    y0: &[f64],
    h: f64,
    tab: &MethodTableau,
    problem: &P,
) -> Result<BlockVector, FailureKind> {
    GeneralStepper::new(tab, problem, SolverConfig::default()).residual(gamma, y0, h)
}
