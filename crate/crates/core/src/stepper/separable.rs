//! Second-order formulation for separable systems `q'' = ∇U(q)`.
//!
//! Here `γ_j ∈ ℝ^m` lives in position space. Stages are
//! `q_i = q₀ + h c_i p₀ + h² Σ_j (Iint X_s)_ij γ_j` and the system is
//! `F(γ) = γ − (P_sᵀΩ ⊗ I_m) ∇U(q) = 0`. The simplified Newton matrix is
//! `I − h² X_s² ⊗ ∇²U(q₀)`, the first-order one with `h → h²`,
//! `X_s → X_s²` and `ρ → ρ²`.

use crate::coefficients::MethodTableau;
use crate::densecore::BlockVector;
use crate::error::{FailureKind, StepFailure};
use crate::problems::SeparableSystem;

use super::{iterate, Correction, ReducedLinearization, SolverConfig, SolverKind, StepStats};

pub struct SeparableStepper<'a, P: ?Sized> {
    tab: &'a MethodTableau,
    problem: &'a P,
    cfg: SolverConfig,
    stages: Vec<f64>,
    /// `∇U` at the stages of the last residual evaluation.
    grads: Vec<f64>,
}

impl<'a, P: SeparableSystem + ?Sized> SeparableStepper<'a, P> {
    pub fn new(tab: &'a MethodTableau, problem: &'a P, cfg: SolverConfig) -> Self {
        let m = problem.dof();
        Self {
            tab,
            problem,
            cfg,
            stages: vec![0.0; tab.k * m],
            grads: vec![0.0; tab.k * m],
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn set_config(&mut self, cfg: SolverConfig) {
        self.cfg = cfg;
    }

    /// Stage positions, flattened `k × m`.
    pub fn stage_positions(
        &mut self,
        gamma: &BlockVector,
        q0: &[f64],
        p0: &[f64],
        h: f64,
    ) -> &[f64] {
        self.fill_stages(gamma, q0, p0, h);
        &self.stages
    }

    /// Stage gradients cached by the last call to [`residual`](Self::residual).
    pub fn cached_gradients(&self) -> &[f64] {
        &self.grads
    }

    fn fill_stages(&mut self, gamma: &BlockVector, q0: &[f64], p0: &[f64], h: f64) {
        let m = self.problem.dof();
        let tab = self.tab;
        let h2 = h * h;
        for i in 0..tab.k {
            let qi = &mut self.stages[i * m..(i + 1) * m];
            let hc = h * tab.quad.c[i];
            for ((q, a), b) in qi.iter_mut().zip(q0).zip(p0) {
                *q = a + hc * b;
            }
            for j in 0..tab.s {
                let w = h2 * tab.iint_x[(i, j)];
                for (q, g) in qi.iter_mut().zip(gamma.block(j)) {
                    *q += w * g;
                }
            }
        }
    }

    /// `F(γ)`; leaves the stage gradients in the cache.
    pub fn residual(
        &mut self,
        gamma: &BlockVector,
        q0: &[f64],
        p0: &[f64],
        h: f64,
    ) -> Result<BlockVector, FailureKind> {
        let m = self.problem.dof();
        let tab = self.tab;
        self.fill_stages(gamma, q0, p0, h);
        for i in 0..tab.k {
            let (q, g) = (
                &self.stages[i * m..(i + 1) * m],
                &mut self.grads[i * m..(i + 1) * m],
            );
            self.problem.potential_gradient(q, g);
            if !g.iter().all(|v| v.is_finite()) {
                return Err(FailureKind::NonFinite { stage: i });
            }
        }
        let mut out = gamma.clone();
        for j in 0..tab.s {
            let oj = out.block_mut(j);
            for i in 0..tab.k {
                let w = tab.projection[(j, i)];
                for (o, g) in oj.iter_mut().zip(&self.grads[i * m..(i + 1) * m]) {
                    *o -= w * g;
                }
            }
        }
        Ok(out)
    }

    pub fn linearization(&self, q0: &[f64], h: f64) -> ReducedLinearization {
        ReducedLinearization {
            s_mat: self.tab.x_s_squared.clone(),
            s_inv: self.tab.x_s_inv_squared.clone(),
            tau: h * h,
            rho: self.tab.rho * self.tab.rho,
            g0: self.problem.potential_hessian(q0),
        }
    }

    fn solve_with(
        &mut self,
        kind: SolverKind,
        q0: &[f64],
        p0: &[f64],
        h: f64,
    ) -> Result<(BlockVector, StepStats), StepFailure> {
        let mut stats = StepStats::default();
        if !(h > 0.0 && h.is_finite()) {
            return Err(StepFailure {
                kind: FailureKind::InvalidStepSize(h),
                stats,
            });
        }
        let correction = Correction::prepare(kind, || self.linearization(q0, h), &mut stats)
            .map_err(|kind| StepFailure {
                kind,
                stats: stats.clone(),
            })?;
        let mut gamma = BlockVector::zeros(self.tab.s, self.problem.dof());
        let cfg = self.cfg;
        let k = self.tab.k;
        let stats = iterate(&cfg, &mut gamma, &correction, stats, |g, st| {
            st.gradient_evals += k;
            self.residual(g, q0, p0, h)
        })?;
        Ok((gamma, stats))
    }

    pub fn solve_fixed_point_q(
        &mut self,
        q0: &[f64],
        p0: &[f64],
        h: f64,
    ) -> Result<(BlockVector, StepStats), StepFailure> {
        self.solve_with(SolverKind::FixedPoint, q0, p0, h)
    }

    pub fn solve_newton_direct_q(
        &mut self,
        q0: &[f64],
        p0: &[f64],
        h: f64,
    ) -> Result<(BlockVector, StepStats), StepFailure> {
        self.solve_with(SolverKind::NewtonDirect, q0, p0, h)
    }

    pub fn solve_blended_q(
        &mut self,
        q0: &[f64],
        p0: &[f64],
        h: f64,
    ) -> Result<(BlockVector, StepStats), StepFailure> {
        self.solve_with(SolverKind::Blended, q0, p0, h)
    }

    pub fn solve(
        &mut self,
        q0: &[f64],
        p0: &[f64],
        h: f64,
    ) -> Result<(BlockVector, StepStats), StepFailure> {
        self.solve_with(self.cfg.kind, q0, p0, h)
    }

    /// One step `(q₀, p₀) → (q₁, p₁)`, reusing the cached stage gradients.
    pub fn step(
        &mut self,
        q0: &[f64],
        p0: &[f64],
        h: f64,
    ) -> Result<(Vec<f64>, Vec<f64>, StepStats), StepFailure> {
        let (_, stats) = self.solve(q0, p0, h)?;
        let (q1, p1) = advance_qp(q0, p0, h, self.tab, &self.grads);
        Ok((q1, p1, stats))
    }
}

/// `q₁ = q₀ + h p₀ + h² Σ_i (bᵀA)_i ∇U(q_i)`, `p₁ = p₀ + h Σ_i b_i ∇U(q_i)`.
///
/// `stage_grads` is the flattened `k × m` array of `∇U(q_i)`.
pub fn advance_qp(
    q0: &[f64],
    p0: &[f64],
    h: f64,
    tab: &MethodTableau,
    stage_grads: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let m = q0.len();
    let h2 = h * h;
    let mut q1: Vec<f64> = q0.iter().zip(p0).map(|(q, p)| q + h * p).collect();
    let mut p1 = p0.to_vec();
    for i in 0..tab.k {
        let g = &stage_grads[i * m..(i + 1) * m];
        let (wq, wp) = (h2 * tab.b_a[i], h * tab.quad.b[i]);
        for l in 0..m {
            q1[l] += wq * g[l];
            p1[l] += wp * g[l];
        }
    }
    (q1, p1)
}

/// Free-function form of [`SeparableStepper::residual`].
pub fn residual_q<P: SeparableSystem + ?Sized>(
    gamma: &BlockVector,
    q0: &[f64],
    p0: &[f64],
    h: f64,
    tab: &MethodTableau,
    problem: &P,
) -> Result<BlockVector, FailureKind> {
    SeparableStepper::new(tab, problem, SolverConfig::default()).residual(gamma, q0, p0, h)
}
