//! Problem definitions.
//!
//! A canonical Hamiltonian system `y' = J ∇H(y)` with `y = (q, p) ∈ ℝ^{2m}`
//! and `J = [[0, I], [−I, 0]]`, and the separable special case
//! `H(q, p) = ½ pᵀp − U(q)`, i.e. `q'' = ∇U(q)`. Note the minus sign on the
//! potential; the quintic benchmark is stated in that convention.
//!
//! Implementations must be pure: evaluating any method twice on the same
//! input returns the same value.

use thiserror::Error;

use crate::densecore::Matrix;

/// Step used by the finite-difference Hessian fallbacks.
pub const FD_HESSIAN_STEP: f64 = 1e-5;

/// `out = J v` for `v = (a, b)`: `(b, −a)`.
pub fn apply_j(v: &[f64], out: &mut [f64]) {
    let m = v.len() / 2;
    for i in 0..m {
        out[i] = v[m + i];
        out[m + i] = -v[i];
    }
}

/// `J M` for a 2m×2m matrix.
pub fn j_times(mat: &Matrix) -> Matrix {
    let n = mat.rows();
    let m = n / 2;
    Matrix::from_fn(n, mat.cols(), |i, j| {
        if i < m {
            mat[(m + i, j)]
        } else {
            -mat[(i - m, j)]
        }
    })
}

fn fd_jacobian(n: usize, x: &[f64], step: f64, grad: impl Fn(&[f64], &mut [f64])) -> Matrix {
    let mut out = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    for j in 0..n {
        let h = step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        grad(&xp, &mut gp);
        xp[j] = x[j] - h;
        grad(&xp, &mut gm);
        xp[j] = x[j];
        for i in 0..n {
            out[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    // symmetrize
    Matrix::from_fn(n, n, |i, j| 0.5 * (out[(i, j)] + out[(j, i)]))
}

/// General canonical Hamiltonian system on `ℝ^{2m}`.
pub trait HamiltonianSystem {
    /// Degrees of freedom `m`; the state has length `2m`.
    fn dof(&self) -> usize;

    fn energy(&self, y: &[f64]) -> f64;

    fn gradient(&self, y: &[f64], out: &mut [f64]);

    /// `∇²H(y)`. Defaults to central differences of [`gradient`](Self::gradient).
    fn hessian(&self, y: &[f64]) -> Matrix {
        fd_jacobian(2 * self.dof(), y, FD_HESSIAN_STEP, |x, g| {
            self.gradient(x, g)
        })
    }

    fn initial_state(&self) -> Vec<f64>;

    fn state_dim(&self) -> usize {
        2 * self.dof()
    }

    /// `J ∇H(y)`.
    fn vector_field(&self, y: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; y.len()];
        self.gradient(y, &mut g);
        apply_j(&g, out);
    }
}

/// Separable system `H(q, p) = ½ pᵀp − U(q)`.
pub trait SeparableSystem {
    fn dof(&self) -> usize;

    fn potential(&self, q: &[f64]) -> f64;

    fn potential_gradient(&self, q: &[f64], out: &mut [f64]);

    /// `∇²U(q)`. Defaults to central differences of the gradient.
    fn potential_hessian(&self, q: &[f64]) -> Matrix {
        fd_jacobian(self.dof(), q, FD_HESSIAN_STEP, |x, g| {
            self.potential_gradient(x, g)
        })
    }

    fn initial_position(&self) -> Vec<f64>;

    fn initial_momentum(&self) -> Vec<f64>;

    fn energy(&self, q: &[f64], p: &[f64]) -> f64 {
        0.5 * p.iter().map(|v| v * v).sum::<f64>() - self.potential(q)
    }
}

impl<T: HamiltonianSystem + ?Sized> HamiltonianSystem for &T {
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn energy(&self, y: &[f64]) -> f64 {
        (**self).energy(y)
    }
    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        (**self).gradient(y, out)
    }
    fn hessian(&self, y: &[f64]) -> Matrix {
        (**self).hessian(y)
    }
    fn initial_state(&self) -> Vec<f64> {
        (**self).initial_state()
    }
}

impl<T: SeparableSystem + ?Sized> SeparableSystem for &T {
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn potential(&self, q: &[f64]) -> f64 {
        (**self).potential(q)
    }
    fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        (**self).potential_gradient(q, out)
    }
    fn potential_hessian(&self, q: &[f64]) -> Matrix {
        (**self).potential_hessian(q)
    }
    fn initial_position(&self) -> Vec<f64> {
        (**self).initial_position()
    }
    fn initial_momentum(&self) -> Vec<f64> {
        (**self).initial_momentum()
    }
}

/// First-order view `y = (q, p)` of a separable system.
#[derive(Debug, Clone)]
pub struct FirstOrder<S>(pub S);

pub fn as_first_order<S: SeparableSystem>(problem: S) -> FirstOrder<S> {
    FirstOrder(problem)
}

impl<S: SeparableSystem> HamiltonianSystem for FirstOrder<S> {
    fn dof(&self) -> usize {
        self.0.dof()
    }

    fn energy(&self, y: &[f64]) -> f64 {
        let m = self.0.dof();
        self.0.energy(&y[..m], &y[m..])
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        let m = self.0.dof();
        self.0.potential_gradient(&y[..m], &mut out[..m]);
        out[..m].iter_mut().for_each(|v| *v = -*v);
        out[m..].copy_from_slice(&y[m..]);
    }

    fn hessian(&self, y: &[f64]) -> Matrix {
        let m = self.0.dof();
        let u = self.0.potential_hessian(&y[..m]);
        Matrix::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
            (true, true) => -u[(i, j)],
            (false, false) if i == j => 1.0,
            _ => 0.0,
        })
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut y = self.0.initial_position();
        y.extend(self.0.initial_momentum());
        y
    }
}

/// `q'' = 10⁴ q (4q³ − 3q² − 2q + 1)`, `q(0) = 0`, `q'(0) = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuinticOscillator;

pub fn quintic_oscillator() -> QuinticOscillator {
    QuinticOscillator
}

const QUINTIC_SCALE: f64 = 1e4;

impl SeparableSystem for QuinticOscillator {
    fn dof(&self) -> usize {
        1
    }

    fn potential(&self, q: &[f64]) -> f64 {
        let x = q[0];
        QUINTIC_SCALE * x * x * (((0.8 * x - 0.75) * x - 2.0 / 3.0) * x + 0.5)
    }

    fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        let x = q[0];
        out[0] = QUINTIC_SCALE * x * (((4.0 * x - 3.0) * x - 2.0) * x + 1.0);
    }

    fn potential_hessian(&self, q: &[f64]) -> Matrix {
        let x = q[0];
        Matrix::from_rows(&[&[QUINTIC_SCALE * (((16.0 * x - 9.0) * x - 4.0) * x + 1.0)]])
    }

    fn initial_position(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn initial_momentum(&self) -> Vec<f64> {
        vec![1.0]
    }
}

/// `U(q) = cos q − 1`, so `H = ½p² + 1 − cos q`.
#[derive(Debug, Clone, Copy)]
pub struct Pendulum {
    pub q0: f64,
    pub p0: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self { q0: 1.0, p0: 0.0 }
    }
}

pub fn pendulum() -> Pendulum {
    Pendulum::default()
}

impl SeparableSystem for Pendulum {
    fn dof(&self) -> usize {
        1
    }

    fn potential(&self, q: &[f64]) -> f64 {
        q[0].cos() - 1.0
    }

    fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        out[0] = -q[0].sin();
    }

    fn potential_hessian(&self, q: &[f64]) -> Matrix {
        Matrix::from_rows(&[&[-q[0].cos()]])
    }

    fn initial_position(&self) -> Vec<f64> {
        vec![self.q0]
    }

    fn initial_momentum(&self) -> Vec<f64> {
        vec![self.p0]
    }
}

/// `U(q) = −½ qᵀq`, so `H = ½(pᵀp + qᵀq)`. Exact flow is a rotation.
#[derive(Debug, Clone)]
pub struct Harmonic {
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
}

impl Default for Harmonic {
    fn default() -> Self {
        Self {
            q0: vec![1.0],
            p0: vec![0.0],
        }
    }
}

pub fn harmonic() -> Harmonic {
    Harmonic::default()
}

impl Harmonic {
    /// Exact `(q(t), p(t))`.
    pub fn exact(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (s, c) = t.sin_cos();
        let q = self
            .q0
            .iter()
            .zip(&self.p0)
            .map(|(q, p)| c * q + s * p)
            .collect();
        let p = self
            .q0
            .iter()
            .zip(&self.p0)
            .map(|(q, p)| -s * q + c * p)
            .collect();
        (q, p)
    }
}

impl SeparableSystem for Harmonic {
    fn dof(&self) -> usize {
        self.q0.len()
    }

    fn potential(&self, q: &[f64]) -> f64 {
        -0.5 * q.iter().map(|v| v * v).sum::<f64>()
    }

    fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(q) {
            *o = -v;
        }
    }

    fn potential_hessian(&self, q: &[f64]) -> Matrix {
        Matrix::identity(q.len()).scaled(-1.0)
    }

    fn initial_position(&self) -> Vec<f64> {
        self.q0.clone()
    }

    fn initial_momentum(&self) -> Vec<f64> {
        self.p0.clone()
    }
}

type EnergyFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type HessFn = Box<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

/// User-supplied Hamiltonian from closures. Without an explicit Hessian the
/// finite-difference fallback is used.
pub struct CustomHamiltonian {
    m: usize,
    energy: EnergyFn,
    gradient: GradFn,
    hessian: Option<HessFn>,
    y0: Vec<f64>,
}

impl CustomHamiltonian {
    pub fn new(
        y0: Vec<f64>,
        energy: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(y0.len() % 2 == 0, "state dimension must be even");
        Self {
            m: y0.len() / 2,
            energy: Box::new(energy),
            gradient: Box::new(gradient),
            hessian: None,
            y0,
        }
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }
}

impl HamiltonianSystem for CustomHamiltonian {
    fn dof(&self) -> usize {
        self.m
    }

    fn energy(&self, y: &[f64]) -> f64 {
        (self.energy)(y)
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        (self.gradient)(y, out)
    }

    fn hessian(&self, y: &[f64]) -> Matrix {
        match &self.hessian {
            Some(h) => h(y),
            None => fd_jacobian(2 * self.m, y, FD_HESSIAN_STEP, |x, g| (self.gradient)(x, g)),
        }
    }

    fn initial_state(&self) -> Vec<f64> {
        self.y0.clone()
    }
}

/// Tolerance on the relative derivative deviation, calibrated for
/// `fd_step = 1e-5`.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DerivativeCheckError {
    #[error("finite-difference step {0} outside (0, 1e-3]")]
    BadStep(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCheck {
    pub point: Vec<f64>,
    /// `‖∇ − ∇_fd‖∞ / max(‖∇‖∞, 1)`.
    pub gradient_deviation: f64,
    /// Same measure for the Hessian against differences of the gradient.
    pub hessian_deviation: f64,
    pub finite: bool,
}

impl PointCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.finite && self.gradient_deviation <= tol && self.hessian_deviation <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub points: Vec<PointCheck>,
    pub tolerance: f64,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| p.passed(self.tolerance))
    }

    pub fn max_gradient_deviation(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.gradient_deviation)
            .fold(0.0, f64::max)
    }

    pub fn max_hessian_deviation(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.hessian_deviation)
            .fold(0.0, f64::max)
    }
}

fn rel_dev(exact: &[f64], approx: &[f64]) -> f64 {
    let scale = exact.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    exact
        .iter()
        .zip(approx)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

fn check_scalar_field(
    n: usize,
    points: &[Vec<f64>],
    fd_step: f64,
    value: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64], &mut [f64]),
    hessian: impl Fn(&[f64]) -> Matrix,
) -> Result<DerivativeReport, DerivativeCheckError> {
    if !(fd_step > 0.0 && fd_step <= 1e-3) {
        return Err(DerivativeCheckError::BadStep(fd_step));
    }
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let mut g = vec![0.0; n];
        gradient(x, &mut g);
        let hess = hessian(x);

        let mut xp = x.clone();
        let mut g_fd = vec![0.0; n];
        for j in 0..n {
            let h = fd_step * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let fp = value(&xp);
            xp[j] = x[j] - h;
            let fm = value(&xp);
            xp[j] = x[j];
            g_fd[j] = (fp - fm) / (2.0 * h);
        }
        let h_fd = fd_jacobian(n, x, fd_step, &gradient);

        let finite = g.iter().chain(&g_fd).all(|v| v.is_finite())
            && hess.is_finite()
            && h_fd.is_finite()
            && value(x).is_finite();
        out.push(PointCheck {
            point: x.clone(),
            gradient_deviation: rel_dev(&g, &g_fd),
            hessian_deviation: rel_dev(hess.as_slice(), h_fd.as_slice()),
            finite,
        });
    }
    Ok(DerivativeReport {
        points: out,
        tolerance: DERIVATIVE_TOLERANCE,
    })
}

/// Compares `∇H` and `∇²H` with central differences at each point.
pub fn check_derivatives<H: HamiltonianSystem + ?Sized>(
    problem: &H,
    points: &[Vec<f64>],
    fd_step: f64,
) -> Result<DerivativeReport, DerivativeCheckError> {
    check_scalar_field(
        problem.state_dim(),
        points,
        fd_step,
        |y| problem.energy(y),
        |y, g| problem.gradient(y, g),
        |y| problem.hessian(y),
    )
}

/// Compares `∇U` and `∇²U` with central differences at each point.
pub fn check_potential_derivatives<S: SeparableSystem + ?Sized>(
    problem: &S,
    points: &[Vec<f64>],
    fd_step: f64,
) -> Result<DerivativeReport, DerivativeCheckError> {
    check_scalar_field(
        problem.dof(),
        points,
        fd_step,
        |q| problem.potential(q),
        |q, g| problem.potential_gradient(q, g),
        |q| problem.potential_hessian(q),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_values() {
        let p = quintic_oscillator();
        assert_eq!(p.potential(&[0.0]), 0.0);
        let mut g = [1.0];
        p.potential_gradient(&[0.0], &mut g);
        assert_eq!(g[0], 0.0);
        assert_eq!(p.energy(&[0.0], &[1.0]), 0.5);
        p.potential_gradient(&[0.1], &mut g);
        assert!((g[0] - 774.0).abs() < 1e-10, "{}", g[0]);
    }

    #[test]
    fn quintic_gradient_is_derivative_at_rationals() {
        // U(q) expanded: 10⁴ (4/5 q⁵ − 3/4 q⁴ − 2/3 q³ + 1/2 q²)
        let p = quintic_oscillator();
        for &x in &[0.25f64, -0.5, 0.375, 1.0 / 3.0] {
            let u_direct =
                1e4 * (0.8 * x.powi(5) - 0.75 * x.powi(4) - 2.0 / 3.0 * x.powi(3) + 0.5 * x * x);
            assert!((p.potential(&[x]) - u_direct).abs() < 1e-11);
            let du = 1e4 * (4.0 * x.powi(4) - 3.0 * x.powi(3) - 2.0 * x * x + x);
            let mut g = [0.0];
            p.potential_gradient(&[x], &mut g);
            assert!((g[0] - du).abs() < 1e-11);
        }
    }

    #[test]
    fn quintic_first_order_hessian_sign() {
        let fo = as_first_order(quintic_oscillator());
        let h = fo.hessian(&[0.0, 1.0]);
        assert_eq!(h[(0, 0)], -1e4);
        assert_eq!(h[(1, 1)], 1.0);
        assert_eq!(h[(0, 1)], 0.0);
        // finite-difference oracle on H itself
        let eps = 1e-4;
        let e = |q: f64| fo.energy(&[q, 1.0]);
        let fd = (e(eps) - 2.0 * e(0.0) + e(-eps)) / (eps * eps);
        assert!((fd - h[(0, 0)]).abs() < 1e-3 * 1e4);
    }

    #[test]
    fn harmonic_first_order_gradient() {
        let fo = as_first_order(harmonic());
        let mut g = [0.0; 2];
        fo.gradient(&[0.3, -0.7], &mut g);
        assert_eq!(g, [0.3, -0.7]);
    }

    #[test]
    fn vector_field_is_p_and_grad_u() {
        let sep = quintic_oscillator();
        let fo = as_first_order(sep);
        for &(q, p) in &[(0.1, 2.0), (-0.4, 0.5), (0.6, -3.0)] {
            let mut f = [0.0; 2];
            fo.vector_field(&[q, p], &mut f);
            let mut gu = [0.0];
            sep.potential_gradient(&[q], &mut gu);
            assert_eq!(f, [p, gu[0]]);
            assert_eq!(fo.energy(&[q, p]), sep.energy(&[q], &[p]));
        }
    }

    #[test]
    fn pendulum_values() {
        let p = pendulum();
        let mut g = [1.0];
        p.potential_gradient(&[0.0], &mut g);
        assert_eq!(g[0], 0.0);
        assert!((p.energy(&[1.0], &[0.0]) - (1.0 - 1f64.cos())).abs() < 1e-16);
        assert!((p.energy(&[1.0], &[0.0]) - 0.459_697_7).abs() < 1e-7);
    }

    #[test]
    fn derivative_checks() {
        let q = quintic_oscillator();
        let r = check_potential_derivatives(&q, &[vec![0.3]], 1e-5).unwrap();
        assert!(r.passed(), "{r:?}");
        let r = check_derivatives(&as_first_order(q), &[vec![0.3, 1.2]], 1e-5).unwrap();
        assert!(r.passed(), "{r:?}");

        let h = as_first_order(harmonic());
        let r = check_derivatives(&h, &[vec![0.4, -2.0], vec![5.0, 1.0]], 1e-5).unwrap();
        assert!(r.max_gradient_deviation() < 1e-9);
        assert!(r.max_hessian_deviation() < 1e-9);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let bad = CustomHamiltonian::new(
            vec![1.0, 0.0],
            |y| 0.5 * (y[0] * y[0] + y[1] * y[1]),
            |y, g| {
                g[0] = y[0] + 1e-3;
                g[1] = y[1];
            },
        );
        let r = check_derivatives(&bad, &[vec![0.3, 0.2]], 1e-5).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn non_finite_point_reported() {
        let bad = CustomHamiltonian::new(
            vec![1.0, 0.0],
            |y| y[0].ln() + 0.5 * y[1] * y[1],
            |y, g| {
                g[0] = 1.0 / y[0];
                g[1] = y[1];
            },
        );
        let r = check_derivatives(&bad, &[vec![-1.0, 0.0], vec![2.0, 0.0]], 1e-5).unwrap();
        assert!(!r.points[0].finite);
        assert!(r.points[1].finite);
    }

    #[test]
    fn fd_step_validated() {
        let h = as_first_order(harmonic());
        assert!(check_derivatives(&h, &[vec![0.0, 0.0]], 0.0).is_err());
        assert!(check_derivatives(&h, &[vec![0.0, 0.0]], 1e-2).is_err());
    }

    #[test]
    fn custom_fd_hessian_fallback() {
        let p = CustomHamiltonian::new(
            vec![0.5, 0.1],
            |y| y[0].powi(4) / 4.0 + 0.5 * y[1] * y[1],
            |y, g| {
                g[0] = y[0].powi(3);
                g[1] = y[1];
            },
        );
        let h = p.hessian(&[0.5, 0.1]);
        assert!((h[(0, 0)] - 0.75).abs() < 1e-8);
        assert!((h[(1, 1)] - 1.0).abs() < 1e-8);
        assert!(h[(0, 1)].abs() < 1e-8);
    }

    #[test]
    fn j_helpers() {
        let mut out = [0.0; 4];
        apply_j(&[1.0, 2.0, 3.0, 4.0], &mut out);
        assert_eq!(out, [3.0, 4.0, -1.0, -2.0]);
        let m = Matrix::from_fn(4, 4, |i, j| (4 * i + j) as f64);
        let jm = j_times(&m);
        let v = [1.0, -1.0, 2.0, 0.5];
        let mut mv = [0.0; 4];
        m.matvec_into(&v, &mut mv);
        let mut jmv = [0.0; 4];
        apply_j(&mv, &mut jmv);
        assert_eq!(jm.matvec(&v).unwrap(), jmv.to_vec());
    }
}
