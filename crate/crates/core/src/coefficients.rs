//! Constant data of an HBVM(k,s): the orthonormal shifted Legendre basis on
//! `[0, 1]`, Gauss–Legendre quadrature, and the structured matrices that
//! turn the k-stage collocation system into an s-block system.

use num_complex::Complex64;

use crate::densecore::{invert, Matrix};
use crate::error::CoefficientError;

pub const MAX_NODES: usize = 64;
pub const MAX_DEGREE: usize = 10;

/// Shifted and scaled Legendre polynomials `P̂_j(x) = √(2j+1) P_j(2x − 1)`,
/// orthonormal on `[0, 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct OrthoLegendre;

impl OrthoLegendre {
    /// `P̂_j(x)` for `x ∈ [0, 1]`.
    pub fn eval(j: usize, x: f64) -> Result<f64, CoefficientError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(CoefficientError::OutsideUnitInterval(x));
        }
        Ok(legendre_std(j, 2.0 * x - 1.0).0 * ((2 * j + 1) as f64).sqrt())
    }

    /// `[P̂_0(x), …, P̂_{n-1}(x)]` in one recurrence pass. No domain check.
    pub fn eval_all(n: usize, x: f64) -> Vec<f64> {
        let t = 2.0 * x - 1.0;
        let mut out = Vec::with_capacity(n);
        let (mut prev, mut cur) = (0.0, 1.0);
        for j in 0..n {
            out.push(cur * ((2 * j + 1) as f64).sqrt());
            let jf = j as f64;
            let next = ((2.0 * jf + 1.0) * t * cur - jf * prev) / (jf + 1.0);
            prev = cur;
            cur = next;
        }
        out
    }
}

/// Convenience wrapper for [`OrthoLegendre::eval`].
pub fn legendre_eval(j: usize, x: f64) -> Result<f64, CoefficientError> {
    OrthoLegendre::eval(j, x)
}

/// Standard Legendre `(P_n(t), P_{n-1}(t))` on `[-1, 1]` by the three-term
/// recurrence.
fn legendre_std(n: usize, t: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * t * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Nodes, strictly increasing in `(0, 1)`.
    pub c: Vec<f64>,
    /// Positive weights summing to one.
    pub b: Vec<f64>,
}

impl QuadratureRule {
    pub fn k(&self) -> usize {
        self.c.len()
    }

    /// `Ω = diag(b)`.
    pub fn omega(&self) -> Matrix {
        Matrix::diagonal(&self.b)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.c.iter().zip(&self.b).map(|(c, b)| b * f(*c)).sum()
    }

    /// `∫_lo^hi f` by the affinely mapped rule.
    pub fn integrate_on(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let w = hi - lo;
        w * self.integrate(|x| f(lo + w * x))
    }
}

/// k-point Gauss–Legendre rule on `[0, 1]`, exact for degree `2k − 1`.
///
/// Roots of `P_k` are found by Newton's method from Chebyshev-type initial
/// guesses; weights come from `w = 2 / ((1 − t²) P_k'(t)²)`, halved for the
/// unit interval.
pub fn gauss_rule(k: usize) -> Result<QuadratureRule, CoefficientError> {
    if k == 0 {
        return Err(CoefficientError::EmptyRule);
    }
    if k > MAX_NODES {
        return Err(CoefficientError::TooManyNodes { k, max: MAX_NODES });
    }
    let mut c = vec![0.0; k];
    let mut b = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        // i-th largest root of P_k
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        for _ in 0..100 {
            let (p, pm1) = legendre_std(k, t);
            let dp = kf * (t * p - pm1) / (t * t - 1.0);
            let dt = p / dp;
            t -= dt;
            if dt.abs() <= 1e-16 * t.abs().max(1.0) {
                break;
            }
        }
        let (p, pm1) = legendre_std(k, t);
        let dp = kf * (t * p - pm1) / (t * t - 1.0);
        let w = 1.0 / ((1.0 - t * t) * dp * dp);
        c[i] = 0.5 * (1.0 - t);
        c[k - 1 - i] = 0.5 * (1.0 + t);
        b[i] = w;
        b[k - 1 - i] = w;
    }
    if k % 2 == 1 {
        c[k / 2] = 0.5;
    }
    Ok(QuadratureRule { c, b })
}

/// `ξ_j = 1 / (2√(4j² − 1))`, `j ≥ 1`.
pub fn xi(j: usize) -> f64 {
    let j = j as f64;
    0.5 / (4.0 * j * j - 1.0).sqrt()
}

/// The s×s tridiagonal matrix expressing `∫_0^x P̂_j` in the basis: `1/2` in
/// the corner, `ξ_j` below and `−ξ_j` above the diagonal.
pub fn x_matrix(s: usize) -> Matrix {
    let mut x = Matrix::zeros(s, s);
    if s > 0 {
        x[(0, 0)] = 0.5;
    }
    for j in 1..s {
        x[(j, j - 1)] = xi(j);
        x[(j - 1, j)] = -xi(j);
    }
    x
}

/// `X_s` stacked over the extra row `ξ_s e_sᵀ`.
pub fn x_hat_matrix(s: usize) -> Matrix {
    let x = x_matrix(s);
    Matrix::from_fn(s + 1, s, |i, j| {
        if i < s {
            x[(i, j)]
        } else if j + 1 == s {
            xi(s)
        } else {
            0.0
        }
    })
}

/// Coefficients (ascending powers) of the monic polynomial `det(λI − X_s)`.
fn x_char_poly(s: usize) -> Vec<f64> {
    // p_{j+1}(λ) = λ p_j(λ) + ξ_j² p_{j−1}(λ), p_0 = 1, p_1 = λ − 1/2
    let mut prev = vec![1.0];
    let mut cur = vec![-0.5, 1.0];
    for j in 1..s {
        let x2 = xi(j) * xi(j);
        let mut next = vec![0.0; cur.len() + 1];
        for (i, v) in cur.iter().enumerate() {
            next[i + 1] += v;
        }
        for (i, v) in prev.iter().enumerate() {
            next[i] += x2 * v;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Roots of a monic polynomial (ascending coefficients) by Durand–Kerner.
fn durand_kerner(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let eval = |z: Complex64| {
        coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..1000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let zi = roots[i];
            let denom = roots
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, (_, zj)| acc * (zi - zj));
            let delta = eval(zi) / denom;
            roots[i] = zi - delta;
            change = change.max(delta.norm());
        }
        if change < 1e-16 {
            break;
        }
    }
    roots
}

/// Eigenvalues of `X_s`.
pub fn x_eigenvalues(s: usize) -> Result<Vec<Complex64>, CoefficientError> {
    if s == 0 || s > MAX_DEGREE {
        return Err(CoefficientError::DegreeOutOfRange(s));
    }
    Ok(durand_kerner(&x_char_poly(s)))
}

/// Blending parameter `ρ_s = min |λ(X_s)|`.
pub fn rho_opt(s: usize) -> Result<f64, CoefficientError> {
    Ok(x_eigenvalues(s)?
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min))
}

/// All constant data of HBVM(k,s).
#[derive(Debug, Clone)]
pub struct MethodTableau {
    pub k: usize,
    pub s: usize,
    pub quad: QuadratureRule,
    /// `P̂_{j}(c_i)`, k×s.
    pub p_s: Matrix,
    /// `P̂_{j}(c_i)`, k×(s+1).
    pub p_s1: Matrix,
    /// `∫_0^{c_i} P̂_j`, k×s.
    pub iint: Matrix,
    pub x_s: Matrix,
    pub x_hat: Matrix,
    /// Butcher matrix, k×k.
    pub a: Matrix,
    pub x_s_inv: Matrix,
    pub x_s_squared: Matrix,
    pub x_s_inv_squared: Matrix,
    pub rho: f64,
    /// `P_sᵀ Ω`, s×k: projection of stage values onto the basis.
    pub projection: Matrix,
    /// `Iint · X_s`, k×s: second-order stage map (`A² = Iint X_s P_sᵀΩ`).
    pub iint_x: Matrix,
    /// `bᵀ A`, length k.
    pub b_a: Vec<f64>,
}

impl MethodTableau {
    pub fn new(k: usize, s: usize) -> Result<Self, CoefficientError> {
        build_tableau(k, s)
    }

    /// Number of free parameters per block of γ.
    pub fn blocks(&self) -> usize {
        self.s
    }

    pub fn c(&self) -> &[f64] {
        &self.quad.c
    }

    pub fn b(&self) -> &[f64] {
        &self.quad.b
    }
}

pub fn build_tableau(k: usize, s: usize) -> Result<MethodTableau, CoefficientError> {
    if s == 0 || s > MAX_DEGREE {
        return Err(CoefficientError::DegreeOutOfRange(s));
    }
    if k < s {
        return Err(CoefficientError::TooFewNodes { k, s });
    }
    let quad = gauss_rule(k)?;
    let values: Vec<Vec<f64>> = quad
        .c
        .iter()
        .map(|&c| OrthoLegendre::eval_all(s + 1, c))
        .collect();
    let p_s1 = Matrix::from_fn(k, s + 1, |i, j| values[i][j]);
    let p_s = Matrix::from_fn(k, s, |i, j| values[i][j]);
    let x_s = x_matrix(s);
    let x_hat = x_hat_matrix(s);

    let iint = p_s1.matmul(&x_hat).expect("conforming");
    let projection = p_s.transpose().matmul(&quad.omega()).expect("conforming");
    let a = iint.matmul(&projection).expect("conforming");
    let x_s_inv = invert(&x_s).expect("X_s is nonsingular");
    let x_s_squared = x_s.matmul(&x_s).expect("conforming");
    let x_s_inv_squared = x_s_inv.matmul(&x_s_inv).expect("conforming");
    let iint_x = iint.matmul(&x_s).expect("conforming");
    let b_a = (0..k)
        .map(|j| (0..k).map(|i| quad.b[i] * a[(i, j)]).sum())
        .collect();

    Ok(MethodTableau {
        k,
        s,
        quad,
        p_s,
        p_s1,
        iint,
        x_s,
        x_hat,
        a,
        x_s_inv,
        x_s_squared,
        x_s_inv_squared,
        rho: rho_opt(s)?,
        projection,
        iint_x,
        b_a,
    })
}
