//! The primal-dual merit function
//!
//! ```text
//!   ψ_{μ,ν}(x, Z) = f(x) − μ logdet X(x) + ν (⟨X(x), Z⟩ − μ logdet X(x) − μ logdet Z)
//! ```
//!
//! with its partial derivatives, the multiplier surrogate
//! `Λ = (1+ν)μX⁻¹ − νZ`, and the local Lipschitz constants that set the
//! fixed step sizes of the inner solver.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::linalg::{pair_traces, Spectrum, SymMat};
use crate::problem::{Iterate, Lipschitz, NsdpProblem, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeritParams {
    pub mu: f64,
    /// Weight of the barrier-complementarity term; `0` gives the pure
    /// primal barrier.
    pub nu: f64,
}

impl MeritParams {
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        let p = Self { mu, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(SolverError::InvalidInput(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(SolverError::InvalidInput(format!(
                "nu must be nonnegative, got {}",
                self.nu
            )));
        }
        Ok(())
    }
}

/// Value and derivatives of the merit function at one iterate.
#[derive(Debug, Clone)]
pub struct MeritEval {
    pub value: f64,
    pub grad_x: Vector,
    pub grad_z: SymMat,
    pub hess_xx: Option<SymMat>,
    pub lambda: SymMat,
}

impl MeritEval {
    pub fn new<P: NsdpProblem + ?Sized>(
        prob: &P,
        it: &Iterate,
        p: &MeritParams,
        with_hessian: bool,
    ) -> Result<Self> {
        p.validate()?;
        let lambda = lambda_surrogate(it, p);
        let grad_x = prob.objective_gradient(it.x()) - it.adjoint(prob, &lambda);
        let hess_xx = if with_hessian {
            Some(merit_hess_xx(prob, it, p)?)
        } else {
            None
        };
        Ok(Self {
            value: merit_value(prob, it, p)?,
            grad_x,
            grad_z: merit_grad_z(it, p),
            hess_xx,
            lambda,
        })
    }
}

pub fn merit_value<P: NsdpProblem + ?Sized>(prob: &P, it: &Iterate, p: &MeritParams) -> Result<f64> {
    p.validate()?;
    let logdet_x = it.x_spectrum().log_det();
    let logdet_z = it.z_spectrum().log_det();
    if !(logdet_x.is_finite() && logdet_z.is_finite()) {
        return Err(SolverError::DomainViolation("log-determinant not finite".into()));
    }
    let f = prob.objective(it.x());
    let coupling = if p.nu == 0.0 {
        0.0
    } else {
        p.nu * (it.x_mat().inner(it.z()) - p.mu * logdet_x - p.mu * logdet_z)
    };
    Ok(f - p.mu * logdet_x + coupling)
}

/// `Λ = (1+ν)μX⁻¹ − νZ`, so that `∇ₓψ = ∇ₓL(x, Λ)`.
pub fn lambda_surrogate(it: &Iterate, p: &MeritParams) -> SymMat {
    it.x_inv()
        .scale((1.0 + p.nu) * p.mu)
        .add_scaled(-p.nu, it.z())
}

/// `∇f(x) − Σᵢ ⟨Aᵢ(x), (1+ν)μX⁻¹ − νZ⟩ eᵢ`.
pub fn merit_grad_x<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    p: &MeritParams,
) -> Result<Vector> {
    p.validate()?;
    let lambda = lambda_surrogate(it, p);
    Ok(prob.objective_gradient(it.x()) - it.adjoint(prob, &lambda))
}

/// `ν (X(x) − μZ⁻¹)`.
pub fn merit_grad_z(it: &Iterate, p: &MeritParams) -> SymMat {
    if p.nu == 0.0 {
        return SymMat::zeros(it.z().dim());
    }
    it.x_mat()
        .add_scaled(-p.mu, it.z_inv())
        .scale(p.nu)
}

/// `[tr(Aᵢ X⁻¹ Aⱼ X⁻¹)]ᵢⱼ`, the curvature of `−logdet X(x)` through the
/// constraint derivatives.
pub fn barrier_curvature(derivs: &[SymMat], x_inv: &SymMat) -> SymMat {
    pair_traces(derivs, x_inv, x_inv)
}

/// `∇²ₓₓL(x, Λ) = ∇²f(x) − [⟨Λ, ∂²X/∂xᵢ∂xⱼ⟩]ᵢⱼ`.
pub fn lagrangian_hessian<P: NsdpProblem + ?Sized>(prob: &P, x: &Vector, lambda: &SymMat) -> SymMat {
    let hf = prob.objective_hessian(x);
    if prob.constraint_is_affine() {
        return hf;
    }
    let n = prob.n();
    let curv = SymMat::from_upper_fn(n, |i, j| {
        lambda.inner(&prob.constraint_second_derivative(x, i, j))
    });
    &hf - &curv
}

/// `∇²ₓₓψ = ∇²ₓₓL(x, Λ) + (1+ν)μ [tr(Aᵢ X⁻¹ Aⱼ X⁻¹)]ᵢⱼ`.
pub fn merit_hess_xx<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    p: &MeritParams,
) -> Result<SymMat> {
    p.validate()?;
    let lambda = lambda_surrogate(it, p);
    let lag = lagrangian_hessian(prob, it.x(), &lambda);
    let curv = barrier_curvature(it.derivatives(prob), it.x_inv());
    Ok(lag.add_scaled((1.0 + p.nu) * p.mu, &curv))
}

/// `log det B − log det A = Σ log1p(λᵢ(A^{-1/2}(B − A)A^{-1/2}))`.
fn logdet_change(a: &Spectrum, delta: &SymMat) -> Result<f64> {
    if delta.frobenius_norm() == 0.0 {
        return Ok(0.0);
    }
    let s = a.map(|l| 1.0 / l.sqrt());
    let rel = SymMat::from_matrix(s.matmul(delta) * s.as_matrix())?;
    let w = rel.spectrum()?;
    let total: f64 = w.values().iter().map(|v| v.ln_1p()).sum();
    if !total.is_finite() {
        return Err(SolverError::DomainViolation("log-determinant change not finite".into()));
    }
    Ok(total)
}

/// `ψ(from) − ψ(to)` assembled from differences of each term, so that
/// decreases far below the rounding level of `ψ` itself stay resolvable.
pub fn merit_decrease<P: NsdpProblem + ?Sized>(
    prob: &P,
    from: &Iterate,
    to: &Iterate,
    p: &MeritParams,
) -> Result<f64> {
    p.validate()?;
    let dx = to.x_mat() - from.x_mat();
    let mut dec = prob.objective_difference(from.x(), to.x())
        + (1.0 + p.nu) * p.mu * logdet_change(from.x_spectrum(), &dx)?;
    if p.nu != 0.0 {
        let dz = to.z() - from.z();
        // ⟨X, Z⟩ − ⟨X', Z'⟩ = −⟨ΔX, Z⟩ − ⟨X', ΔZ⟩
        dec += p.nu * (-dx.inner(from.z()) - to.x_mat().inner(&dz))
            + p.nu * p.mu * logdet_change(from.z_spectrum(), &dz)?;
    }
    Ok(dec)
}

/// Local Lipschitz constant of `∇_Zψ` around `Z`: `2μν‖Z⁻¹‖²_F`.
pub fn local_lipschitz_z(it: &Iterate, p: &MeritParams) -> f64 {
    let zi = it.z_spectrum().inverse_frobenius_norm();
    2.0 * p.mu * p.nu * zi * zi
}

/// Local Lipschitz constant of `∇ₓψ` around `x`:
/// `L1 + νL1‖Z‖_F + 2(1+ν)μL0²‖X⁻¹‖²_F + (1+ν)μL1‖X⁻¹‖_F`.
pub fn local_lipschitz_x(it: &Iterate, p: &MeritParams, constants: Option<Lipschitz>) -> Result<f64> {
    let Lipschitz { l0, l1, .. } = constants.ok_or(SolverError::ConstantsRequired)?;
    let xi = it.x_spectrum().inverse_frobenius_norm();
    let zf = it.z_spectrum().frobenius_norm();
    let w = (1.0 + p.nu) * p.mu;
    Ok(l1 + p.nu * l1 * zf + 2.0 * w * l0 * l0 * xi * xi + w * l1 * xi)
}

/// Local Lipschitz constant of `∇²ₓₓψ` around `x`:
/// `L2 + νL2‖Z‖_F + (1+ν)μ(L2‖X⁻¹‖_F + 4L1L0‖X⁻¹‖²_F + 6L0³‖X⁻¹‖³_F)`.
pub fn local_lipschitz_xx(it: &Iterate, p: &MeritParams, constants: Option<Lipschitz>) -> Result<f64> {
    let Lipschitz { l0, l1, l2 } = constants.ok_or(SolverError::ConstantsRequired)?;
    let xi = it.x_spectrum().inverse_frobenius_norm();
    let zf = it.z_spectrum().frobenius_norm();
    let w = (1.0 + p.nu) * p.mu;
    Ok(l2 + p.nu * l2 * zf + w * (l2 * xi + 4.0 * l1 * l0 * xi * xi + 6.0 * l0.powi(3) * xi.powi(3)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merit_decrease_matches_value_difference() {
        let p = CurvedProblem::random(3, 3, 6).unwrap();
        let mp = MeritParams { mu: 0.3, nu: 0.8 };
        let z = SymMat::from_upper_fn(3, |i, j| if i == j { 1.0 + 0.2 * i as f64 } else { 0.05 });
        let a = Iterate::new(&p, Vector::from_element(3, 0.02), z.clone()).unwrap();
        let b = Iterate::new(&p, Vector::from_element(3, -0.03), z.add_scaled(0.1, &SymMat::identity(3))).unwrap();
        let direct = merit_value(&p, &a, &mp).unwrap() - merit_value(&p, &b, &mp).unwrap();
        let dec = merit_decrease(&p, &a, &b, &mp).unwrap();
        assert!((dec - direct).abs() < 1e-12 * (1.0 + direct.abs()), "{dec} vs {direct}");
        assert_eq!(merit_decrease(&p, &a, &a, &mp).unwrap(), 0.0);
    }
    use crate::benchmarks::{analytic_scalar_problem, AffineProblem, CurvedProblem};

    /// `f(x) = x²`, `X(x) = x`.
    struct Square;
    impl NsdpProblem for Square {
        fn n(&self) -> usize {
            1
        }
        fn m(&self) -> usize {
            1
        }
        fn objective(&self, x: &Vector) -> f64 {
            x[0] * x[0]
        }
        fn objective_gradient(&self, x: &Vector) -> Vector {
            Vector::from_element(1, 2.0 * x[0])
        }
        fn objective_hessian(&self, _: &Vector) -> SymMat {
            SymMat::from_diagonal(&[2.0])
        }
        fn constraint(&self, x: &Vector) -> SymMat {
            SymMat::from_diagonal(&[x[0]])
        }
        fn constraint_derivative(&self, _: &Vector, _: usize) -> SymMat {
            SymMat::identity(1)
        }
        fn constraint_second_derivative(&self, _: &Vector, _: usize, _: usize) -> SymMat {
            SymMat::zeros(1)
        }
        fn lipschitz(&self) -> Option<Lipschitz> {
            None
        }
    }

    /// `f ≡ 0`, `X(x) ≡ I_m`.
    struct ConstantIdentity(usize);
    impl NsdpProblem for ConstantIdentity {
        fn n(&self) -> usize {
            1
        }
        fn m(&self) -> usize {
            self.0
        }
        fn objective(&self, _: &Vector) -> f64 {
            0.0
        }
        fn objective_gradient(&self, _: &Vector) -> Vector {
            Vector::zeros(1)
        }
        fn objective_hessian(&self, _: &Vector) -> SymMat {
            SymMat::zeros(1)
        }
        fn constraint(&self, _: &Vector) -> SymMat {
            SymMat::identity(self.0)
        }
        fn constraint_derivative(&self, _: &Vector, _: usize) -> SymMat {
            SymMat::zeros(self.0)
        }
        fn constraint_second_derivative(&self, _: &Vector, _: usize, _: usize) -> SymMat {
            SymMat::zeros(self.0)
        }
        fn lipschitz(&self) -> Option<Lipschitz> {
            None
        }
    }

    fn scalar_iterate<P: NsdpProblem>(p: &P, x: f64, z: f64) -> Iterate {
        Iterate::new(p, Vector::from_element(1, x), SymMat::from_diagonal(&[z])).unwrap()
    }

    #[test]
    fn value_at_identity_constraint() {
        for (mu, nu) in [(1.0, 0.5), (0.3, 2.0), (2.0, 1.0)] {
            let p = ConstantIdentity(3);
            let it = Iterate::new(&p, Vector::zeros(1), SymMat::scaled_identity(3, mu)).unwrap();
            let v = merit_value(&p, &it, &MeritParams::new(mu, nu).unwrap()).unwrap();
            let expect = nu * mu * 3.0 * (1.0 - mu.ln());
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
    }

    #[test]
    fn value_scalar_closed_form() {
        let it = scalar_iterate(&Square, 2.0, 1.0);
        let v = merit_value(&Square, &it, &MeritParams::new(1.0, 1.0).unwrap()).unwrap();
        assert!((v - (6.0 - 2.0 * 2f64.ln())).abs() < 1e-14);
        // ν = 0 is the pure primal barrier
        let v0 = merit_value(&Square, &it, &MeritParams::new(1.0, 0.0).unwrap()).unwrap();
        assert!((v0 - (4.0 - 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn gradients_scalar_closed_form() {
        // f(x) = c·x contributes c; the barrier part at x = 1, z = μ is −μ
        let p = analytic_scalar_problem(1.0).unwrap();
        for (mu, nu) in [(1.0, 1.0), (0.5, 3.0)] {
            let it = scalar_iterate(&p, 1.0, mu);
            let g = merit_grad_x(&p, &it, &MeritParams::new(mu, nu).unwrap()).unwrap();
            assert!((g[0] - (1.0 - mu)).abs() < 1e-14);
        }
        let it = scalar_iterate(&Square, 2.0, 1.0);
        let gz = merit_grad_z(&it, &MeritParams::new(1.0, 1.0).unwrap());
        assert!((gz.get(0, 0) - 1.0).abs() < 1e-15);
        assert_eq!(merit_grad_z(&it, &MeritParams::new(1.0, 0.0).unwrap()), SymMat::zeros(1));
    }

    #[test]
    fn grad_z_vanishes_on_central_path() {
        let p = AffineProblem::random(3, 4, 9).unwrap();
        let it = Iterate::on_central_path(&p, Vector::from_element(3, 0.05), 0.7).unwrap();
        let gz = merit_grad_z(&it, &MeritParams::new(0.7, 1.3).unwrap());
        assert!(gz.frobenius_norm() < 1e-12);
        let lam = lambda_surrogate(&it, &MeritParams::new(0.7, 1.3).unwrap());
        assert!(lam.max_abs_diff(&it.x_inv().scale(0.7)) < 1e-12);
    }

    #[test]
    fn lambda_closed_forms() {
        struct Diag;
        impl NsdpProblem for Diag {
            fn n(&self) -> usize { 1 }
            fn m(&self) -> usize { 2 }
            fn objective(&self, _: &Vector) -> f64 { 0.0 }
            fn objective_gradient(&self, _: &Vector) -> Vector { Vector::zeros(1) }
            fn objective_hessian(&self, _: &Vector) -> SymMat { SymMat::zeros(1) }
            fn constraint(&self, _: &Vector) -> SymMat { SymMat::from_diagonal(&[1.0, 2.0]) }
            fn constraint_derivative(&self, _: &Vector, _: usize) -> SymMat { SymMat::zeros(2) }
            fn constraint_second_derivative(&self, _: &Vector, _: usize, _: usize) -> SymMat { SymMat::zeros(2) }
            fn lipschitz(&self) -> Option<Lipschitz> { None }
        }
        let it = Iterate::new(&Diag, Vector::zeros(1), SymMat::identity(2)).unwrap();
        let lam = lambda_surrogate(&it, &MeritParams::new(1.0, 1.0).unwrap());
        assert!(lam.max_abs_diff(&SymMat::from_diagonal(&[1.0, 0.0])) < 1e-15);
        let lam0 = lambda_surrogate(&it, &MeritParams::new(0.4, 0.0).unwrap());
        assert!(lam0.max_abs_diff(&it.x_inv().scale(0.4)) < 1e-15);
    }

    #[test]
    fn hessian_scalar_closed_form() {
        let p = analytic_scalar_problem(2.0).unwrap();
        for (mu, nu) in [(1.0, 0.0), (0.5, 2.0)] {
            let it = scalar_iterate(&p, 1.0, 0.8);
            let h = merit_hess_xx(&p, &it, &MeritParams::new(mu, nu).unwrap()).unwrap();
            assert!((h.get(0, 0) - (1.0 + nu) * mu).abs() < 1e-14);
        }
    }

    #[test]
    fn hessian_matches_finite_difference_of_gradient_on_curved_problem() {
        let p = CurvedProblem::random(3, 3, 4).unwrap();
        let x = Vector::from_vec(vec![0.05, -0.1, 0.08]);
        let it = Iterate::new(&p, x.clone(), SymMat::scaled_identity(3, 0.4)).unwrap();
        let mp = MeritParams::new(0.3, 0.7).unwrap();
        let h = merit_hess_xx(&p, &it, &mp).unwrap();
        let step = 1e-6;
        for j in 0..3 {
            let mut xp = x.clone();
            xp[j] += step;
            let mut xm = x.clone();
            xm[j] -= step;
            let gp = merit_grad_x(&p, &it.with_x(&p, xp).unwrap(), &mp).unwrap();
            let gm = merit_grad_x(&p, &it.with_x(&p, xm).unwrap(), &mp).unwrap();
            let col = (gp - gm) / (2.0 * step);
            for i in 0..3 {
                let err = (col[i] - h.get(i, j)).abs();
                assert!(err <= 1e-5 * (1.0 + h.get(i, j).abs()), "({i},{j}): {err}");
            }
        }
    }

    #[test]
    fn lipschitz_closed_forms() {
        let p = analytic_scalar_problem(1.0).unwrap();
        let it = scalar_iterate(&p, 1.0, 1.0);
        let mp = MeritParams::new(1.0, 1.0).unwrap();
        let c = Some(Lipschitz { l0: 1.0, l1: 1.0, l2: 1.0 });
        assert_eq!(local_lipschitz_z(&it, &mp), 2.0);
        assert_eq!(local_lipschitz_x(&it, &mp, c).unwrap(), 8.0);
        assert_eq!(local_lipschitz_xx(&it, &mp, c).unwrap(), 24.0);
        assert_eq!(local_lipschitz_z(&it, &MeritParams::new(1.0, 0.0).unwrap()), 0.0);
        assert!(matches!(
            local_lipschitz_x(&it, &mp, None),
            Err(SolverError::ConstantsRequired)
        ));
        assert!(matches!(
            local_lipschitz_xx(&it, &mp, None),
            Err(SolverError::ConstantsRequired)
        ));
        let big = Iterate::new(&ConstantIdentity(4), Vector::zeros(1), SymMat::identity(4)).unwrap();
        assert_eq!(local_lipschitz_z(&big, &mp), 8.0);
    }

    #[test]
    fn lipschitz_x_without_coupling() {
        let p = AffineProblem::random(2, 3, 1).unwrap();
        let it = Iterate::new(&p, Vector::zeros(2), SymMat::scaled_identity(3, 5.0)).unwrap();
        let c = Lipschitz { l0: 2.0, l1: 3.0, l2: 0.5 };
        let mu = 0.2;
        let xi = it.x_spectrum().inverse_frobenius_norm();
        let got = local_lipschitz_x(&it, &MeritParams::new(mu, 0.0).unwrap(), Some(c)).unwrap();
        let expect = 3.0 + 2.0 * mu * 4.0 * xi * xi + mu * 3.0 * xi;
        assert!((got - expect).abs() < 1e-12);
        let tiny = local_lipschitz_xx(&it, &MeritParams::new(1e-300, 0.0).unwrap(), Some(c)).unwrap();
        assert!((tiny - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(MeritParams::new(0.0, 1.0).is_err());
        assert!(MeritParams::new(1.0, -0.1).is_err());
        assert!(MeritParams::new(f64::NAN, 0.0).is_err());
    }
}
