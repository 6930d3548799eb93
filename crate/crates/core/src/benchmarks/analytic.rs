use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Result, SolverError};
use crate::linalg::{spectral_norm, SymMat};
use crate::problem::{Lipschitz, NsdpProblem, Vector};

use super::rng_for;

/// `min c·x s.t. x ≥ 0`, whose barrier central path is `x(μ) = μ/c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProblem {
    c: f64,
}

pub fn analytic_scalar_problem(c: f64) -> Result<ScalarProblem> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(SolverError::InvalidInput(format!("c must be positive, got {c}")));
    }
    Ok(ScalarProblem { c })
}

impl ScalarProblem {
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Exact minimum of the merit function over the strictly feasible set:
    /// `μ − μ log(μ/c) + ν(μ − μ log μ)`, attained at `x = μ/c`, `z = c`.
    pub fn merit_lower_bound(&self, mu: f64, nu: f64) -> f64 {
        mu - mu * (mu / self.c).ln() + nu * (mu - mu * mu.ln())
    }
}

impl NsdpProblem for ScalarProblem {
    fn n(&self) -> usize {
        1
    }
    fn m(&self) -> usize {
        1
    }
    fn objective(&self, x: &Vector) -> f64 {
        self.c * x[0]
    }
    fn objective_gradient(&self, _x: &Vector) -> Vector {
        Vector::from_element(1, self.c)
    }
    fn objective_hessian(&self, _x: &Vector) -> SymMat {
        SymMat::zeros(1)
    }
    fn constraint(&self, x: &Vector) -> SymMat {
        SymMat::from_diagonal(&[x[0]])
    }
    fn constraint_derivative(&self, _x: &Vector, _i: usize) -> SymMat {
        SymMat::identity(1)
    }
    fn constraint_second_derivative(&self, _x: &Vector, _i: usize, _j: usize) -> SymMat {
        SymMat::zeros(1)
    }
    fn lipschitz(&self) -> Option<Lipschitz> {
        Some(Lipschitz { l0: 1.0, l1: 0.0, l2: 0.0 })
    }
    fn constraint_is_affine(&self) -> bool {
        true
    }
}

fn random_sym(dim: usize, scale: f64, rng: &mut impl Rng) -> SymMat {
    SymMat::from_upper_fn(dim, |_, _| scale * rng.gen_range(-1.0..1.0))
}

/// `min ½xᵀQx + gᵀx s.t. I + Σ xᵢAᵢ ⪰ 0` with random data.
///
/// The constraint is affine and `f` quadratic, so the Lipschitz constants
/// hold globally: `L0 = Σ‖Aᵢ‖_F`, `L1 = ‖Q‖₂`, `L2 = 0`.
#[derive(Debug, Clone)]
pub struct AffineProblem {
    q: SymMat,
    g: Vector,
    base: SymMat,
    coeffs: Vec<SymMat>,
    lipschitz: Lipschitz,
}

impl AffineProblem {
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(SolverError::InvalidInput("n and m must be positive".into()));
        }
        let mut rng = rng_for(seed, 7);
        let q = random_sym(n, 1.0, &mut rng);
        let g = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let coeffs: Vec<SymMat> = (0..n).map(|_| random_sym(m, 0.3, &mut rng)).collect();
        let l0 = coeffs.iter().map(SymMat::frobenius_norm).sum();
        let l1 = spectral_norm(&q)?;
        Ok(Self {
            q,
            g,
            base: SymMat::identity(m),
            coeffs,
            lipschitz: Lipschitz { l0, l1, l2: 0.0 },
        })
    }
}

impl NsdpProblem for AffineProblem {
    fn n(&self) -> usize {
        self.g.len()
    }
    fn m(&self) -> usize {
        self.base.dim()
    }
    fn objective(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(self.q.as_matrix() * x)) + self.g.dot(x)
    }
    fn objective_gradient(&self, x: &Vector) -> Vector {
        self.q.as_matrix() * x + &self.g
    }
    fn objective_difference(&self, x: &Vector, y: &Vector) -> f64 {
        let d = x - y;
        0.5 * d.dot(&(self.q.as_matrix() * (x + y))) + self.g.dot(&d)
    }
    fn objective_hessian(&self, _x: &Vector) -> SymMat {
        self.q.clone()
    }
    fn constraint(&self, x: &Vector) -> SymMat {
        self.coeffs
            .iter()
            .zip(x.iter())
            .fold(self.base.clone(), |acc, (a, &xi)| acc.add_scaled(xi, a))
    }
    fn constraint_derivative(&self, _x: &Vector, i: usize) -> SymMat {
        self.coeffs[i].clone()
    }
    fn constraint_second_derivative(&self, _x: &Vector, _i: usize, _j: usize) -> SymMat {
        SymMat::zeros(self.m())
    }
    fn lipschitz(&self) -> Option<Lipschitz> {
        Some(self.lipschitz)
    }
    fn constraint_is_affine(&self) -> bool {
        true
    }
}

/// A problem with a genuinely nonlinear constraint
/// `X(x) = I + Σ xᵢAᵢ + ½ Σᵢⱼ xᵢxⱼBᵢⱼ` and objective
/// `½xᵀQx + gᵀx + ¼Σ xᵢ⁴`. Lipschitz constants are not supplied.
#[derive(Debug, Clone)]
pub struct CurvedProblem {
    affine: AffineProblem,
    second: Vec<Vec<SymMat>>,
}

impl CurvedProblem {
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Self> {
        let affine = AffineProblem::random(n, m, seed)?;
        let mut rng = rng_for(seed, 8);
        let mut second = vec![vec![SymMat::zeros(m); n]; n];
        for i in 0..n {
            for j in i..n {
                let b = random_sym(m, 0.2, &mut rng);
                second[i][j] = b.clone();
                second[j][i] = b;
            }
        }
        Ok(Self { affine, second })
    }
}

impl NsdpProblem for CurvedProblem {
    fn n(&self) -> usize {
        self.affine.n()
    }
    fn m(&self) -> usize {
        self.affine.m()
    }
    fn objective(&self, x: &Vector) -> f64 {
        self.affine.objective(x) + 0.25 * x.iter().map(|v| v.powi(4)).sum::<f64>()
    }
    fn objective_gradient(&self, x: &Vector) -> Vector {
        self.affine.objective_gradient(x) + x.map(|v| v.powi(3))
    }
    fn objective_difference(&self, x: &Vector, y: &Vector) -> f64 {
        let quartic: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a + b) * (a * a + b * b)).sum();
        self.affine.objective_difference(x, y) + 0.25 * quartic
    }
    fn objective_hessian(&self, x: &Vector) -> SymMat {
        let diag = SymMat::from_matrix(DMatrix::from_diagonal(&x.map(|v| 3.0 * v * v)))
            .expect("square");
        &self.affine.objective_hessian(x) + &diag
    }
    fn constraint(&self, x: &Vector) -> SymMat {
        let mut acc = self.affine.constraint(x);
        for i in 0..self.n() {
            for j in 0..self.n() {
                acc = acc.add_scaled(0.5 * x[i] * x[j], &self.second[i][j]);
            }
        }
        acc
    }
    fn constraint_derivative(&self, x: &Vector, i: usize) -> SymMat {
        (0..self.n()).fold(self.affine.coeffs[i].clone(), |acc, j| {
            acc.add_scaled(x[j], &self.second[i][j])
        })
    }
    fn constraint_second_derivative(&self, _x: &Vector, i: usize, j: usize) -> SymMat {
        self.second[i][j].clone()
    }
    fn lipschitz(&self) -> Option<Lipschitz> {
        None
    }
}

/// Wraps a problem and perturbs the first gradient component. Negative
/// control for derivative checks.
#[derive(Debug, Clone)]
pub struct CorruptedGradient<P> {
    pub inner: P,
    pub bias: f64,
}

impl<P: NsdpProblem> NsdpProblem for CorruptedGradient<P> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn m(&self) -> usize {
        self.inner.m()
    }
    fn objective(&self, x: &Vector) -> f64 {
        self.inner.objective(x)
    }
    fn objective_gradient(&self, x: &Vector) -> Vector {
        let mut g = self.inner.objective_gradient(x);
        g[0] += self.bias;
        g
    }
    fn objective_hessian(&self, x: &Vector) -> SymMat {
        self.inner.objective_hessian(x)
    }
    fn constraint(&self, x: &Vector) -> SymMat {
        self.inner.constraint(x)
    }
    fn constraint_derivative(&self, x: &Vector, i: usize) -> SymMat {
        self.inner.constraint_derivative(x, i)
    }
    fn constraint_second_derivative(&self, x: &Vector, i: usize, j: usize) -> SymMat {
        self.inner.constraint_second_derivative(x, i, j)
    }
    fn lipschitz(&self) -> Option<Lipschitz> {
        self.inner.lipschitz()
    }
    fn constraint_is_affine(&self) -> bool {
        self.inner.constraint_is_affine()
    }
}
