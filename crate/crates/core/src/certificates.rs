//! Computable stationarity diagnostics: KKT residuals for a multiplier
//! estimate, scaled Fritz-John multipliers, the sigma term of the
//! semidefinite cone and a curvature check on the weak second-order
//! subspace.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::linalg::{pair_traces, Spectrum, SymMat};
use crate::merit::{lagrangian_hessian, lambda_surrogate, merit_hess_xx, MeritParams};
use crate::problem::{adjoint_with, Iterate, NsdpProblem, Vector};

pub const DEFAULT_RANK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖∇f(x) − [⟨Aᵢ(x), Λ⟩]ᵢ‖`.
    pub stationarity: f64,
    /// `max(0, −λ_min(X(x)))`.
    pub primal_feas: f64,
    /// `max(0, −λ_min(Λ))`.
    pub dual_feas: f64,
    /// `‖X(x)Λ‖_F`.
    pub complementarity: f64,
}

pub fn kkt_residuals<P: NsdpProblem + ?Sized>(
    prob: &P,
    x: &Vector,
    lambda: &SymMat,
) -> Result<KktResiduals> {
    if x.len() != prob.n() || lambda.dim() != prob.m() {
        return Err(SolverError::InvalidInput("dimension mismatch in kkt_residuals".into()));
    }
    let xm = prob.constraint(x);
    let derivs = prob.constraint_derivatives(x);
    let stationarity = (prob.objective_gradient(x) - adjoint_with(&derivs, lambda)).norm();
    Ok(KktResiduals {
        stationarity,
        primal_feas: (-xm.spectrum()?.min()).max(0.0),
        dual_feas: (-lambda.spectrum()?.min()).max(0.0),
        complementarity: xm.matmul(lambda).norm(),
    })
}

/// Multipliers `(λ_k, Ω_k) = (1, Λ)/s` with `s = 1 + μ‖X⁻¹‖_F + ‖Z‖_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FjScaled {
    pub lambda_k: f64,
    pub omega_k: SymMat,
    pub scale: f64,
    /// `‖λ_k∇f(x) − [⟨Aᵢ(x), Ω_k⟩]ᵢ‖`.
    pub scaled_stationarity: f64,
}

pub fn fj_scaled_multipliers<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    p: &MeritParams,
) -> Result<FjScaled> {
    p.validate()?;
    let scale =
        1.0 + p.mu * it.x_spectrum().inverse_frobenius_norm() + it.z_spectrum().frobenius_norm();
    let lambda_k = 1.0 / scale;
    let omega_k = lambda_surrogate(it, p).scale(lambda_k);
    let scaled_stationarity = (prob.objective_gradient(it.x()) * lambda_k
        - it.adjoint(prob, &omega_k))
    .norm();
    Ok(FjScaled { lambda_k, omega_k, scale, scaled_stationarity })
}

/// Eigenvalues at or below `rank_tol·max(λ_max, 1)` count as zero.
pub fn kernel_threshold(spec: &Spectrum, rank_tol: f64) -> f64 {
    rank_tol * spec.max().max(1.0)
}

/// `H(i, j) = 2 tr(Aᵢ(x) X(x)† Aⱼ(x) Λ)`.
pub fn sigma_term<P: NsdpProblem + ?Sized>(
    prob: &P,
    x: &Vector,
    lambda: &SymMat,
    rank_tol: f64,
) -> Result<SymMat> {
    let spec = prob.constraint(x).spectrum()?;
    let pinv = spec.pseudo_inverse(kernel_threshold(&spec, rank_tol));
    Ok(pair_traces(&prob.constraint_derivatives(x), &pinv, lambda).scale(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedCurvature {
    /// `+∞` when the subspace is `{0}`.
    pub min_restricted_curvature: f64,
    pub subspace_dim: usize,
}

/// Smallest eigenvalue of `∇²ₓₓL(x, Λ) + H(x, Λ)` restricted to
/// `Ker(G)`, where the rows of `G` are `(uₚᵀAᵢ(x)u_q)ᵢ` for kernel vectors
/// `uₚ, u_q` (`p ≤ q`) of `X(x)`. With a trivial kernel the subspace is ℝⁿ.
pub fn wsosp_curvature_check<P: NsdpProblem + ?Sized>(
    prob: &P,
    x: &Vector,
    lambda: &SymMat,
    rank_tol: f64,
) -> Result<RestrictedCurvature> {
    let n = prob.n();
    let spec = prob.constraint(x).spectrum()?;
    let tol = kernel_threshold(&spec, rank_tol);
    let kernel: Vec<usize> = (0..spec.dim()).filter(|&j| spec.values()[j] <= tol).collect();
    let basis = if kernel.is_empty() {
        DMatrix::identity(n, n)
    } else {
        let derivs = prob.constraint_derivatives(x);
        let u = spec.vectors().select_columns(&kernel);
        let k = kernel.len();
        let mut g = DMatrix::zeros(k * (k + 1) / 2, n);
        for (i, a) in derivs.iter().enumerate() {
            let uau = u.transpose() * a.as_matrix() * &u;
            let mut row = 0;
            for p in 0..k {
                for q in p..k {
                    g[(row, i)] = uau[(p, q)];
                    row += 1;
                }
            }
        }
        let gtg = SymMat::from_matrix(g.transpose() * g)?.spectrum()?;
        let gtol = kernel_threshold(&gtg, rank_tol);
        let null: Vec<usize> = (0..n).filter(|&j| gtg.values()[j] <= gtol).collect();
        gtg.vectors().select_columns(&null)
    };
    let dim = basis.ncols();
    if dim == 0 {
        return Ok(RestrictedCurvature { min_restricted_curvature: f64::INFINITY, subspace_dim: 0 });
    }
    let full = &lagrangian_hessian(prob, x, lambda) + &sigma_term(prob, x, lambda, rank_tol)?;
    let restricted = SymMat::from_matrix(basis.transpose() * full.as_matrix() * &basis)?;
    Ok(RestrictedCurvature {
        min_restricted_curvature: restricted.spectrum()?.min(),
        subspace_dim: dim,
    })
}

/// Relative gap between `∇²ₓₓψ` and `∇²ₓₓL(x, Λ) + (1+ν)μ[tr(AᵢX⁻¹AⱼX⁻¹)]`,
/// the barrier curvature here computed through a Cholesky factor of `X`.
pub fn hessian_identity_gap<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    p: &MeritParams,
) -> Result<f64> {
    let hess = merit_hess_xx(prob, it, p)?;
    let chol = Cholesky::new(it.x_mat().as_matrix().clone())
        .ok_or_else(|| SolverError::DomainViolation("X(x) is not positive definite".into()))?;
    let l = chol.l();
    // L⁻¹AᵢL⁻ᵀ so that tr(AᵢX⁻¹AⱼX⁻¹) = ⟨L⁻¹AᵢL⁻ᵀ, L⁻¹AⱼL⁻ᵀ⟩
    let whitened: Vec<DMatrix<f64>> = it
        .derivatives(prob)
        .iter()
        .map(|a| {
            let left = l.solve_lower_triangular(a.as_matrix()).expect("nonsingular factor");
            l.solve_lower_triangular(&left.transpose()).expect("nonsingular factor")
        })
        .collect();
    let w = (1.0 + p.nu) * p.mu;
    let barrier = SymMat::from_upper_fn(whitened.len(), |i, j| whitened[i].dot(&whitened[j]));
    let rhs = lagrangian_hessian(prob, it.x(), &lambda_surrogate(it, p)).add_scaled(w, &barrier);
    Ok(hess.max_abs_diff(&rhs) / hess.frobenius_norm().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{analytic_scalar_problem, AffineProblem, CurvedProblem};

    #[test]
    fn scalar_central_path_kkt() {
        let (c, mu) = (2.0, 0.3);
        let p = analytic_scalar_problem(c).unwrap();
        let x = Vector::from_element(1, mu / c);
        let r = kkt_residuals(&p, &x, &SymMat::from_diagonal(&[c])).unwrap();
        assert!(r.stationarity.abs() < 1e-15);
        assert!((r.complementarity - mu).abs() < 1e-15);
        assert_eq!(r.primal_feas, 0.0);
        assert_eq!(r.dual_feas, 0.0);
    }

    #[test]
    fn zero_multiplier_zero_gradient() {
        let p = analytic_scalar_problem(1.0).unwrap();
        // f = cx has constant gradient c; use Λ = O and compare to |c|
        let r = kkt_residuals(&p, &Vector::from_element(1, -0.5), &SymMat::zeros(1)).unwrap();
        assert_eq!(r.stationarity, 1.0);
        assert_eq!(r.primal_feas, 0.5);
        assert_eq!(r.complementarity, 0.0);
    }

    #[test]
    fn fj_on_central_path_ignores_nu() {
        let p = AffineProblem::random(3, 3, 5).unwrap();
        let mu = 0.2;
        let it = Iterate::on_central_path(&p, Vector::from_element(3, 0.1), mu).unwrap();
        let a = fj_scaled_multipliers(&p, &it, &MeritParams { mu, nu: 0.0 }).unwrap();
        let b = fj_scaled_multipliers(&p, &it, &MeritParams { mu, nu: 3.0 }).unwrap();
        assert!(a.omega_k.max_abs_diff(&b.omega_k) < 1e-12);
        let expected = it.x_inv().scale(mu / a.scale);
        assert!(a.omega_k.max_abs_diff(&expected) < 1e-12);
        assert!((a.lambda_k - 1.0 / a.scale).abs() < 1e-15);
    }

    #[test]
    fn sigma_term_scalar() {
        let p = analytic_scalar_problem(1.0).unwrap();
        let x = Vector::from_element(1, 0.4);
        let h = sigma_term(&p, &x, &SymMat::from_diagonal(&[3.0]), DEFAULT_RANK_TOL).unwrap();
        assert!((h.get(0, 0) - 2.0 * 3.0 / 0.4).abs() < 1e-12);
        let zero = sigma_term(&p, &x, &SymMat::zeros(1), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(zero.frobenius_norm(), 0.0);
    }

    #[test]
    fn sigma_term_matches_direct_inverse() {
        let p = AffineProblem::random(4, 3, 9).unwrap();
        let x = Vector::from_element(4, 0.05);
        let lambda = SymMat::from_upper_fn(3, |i, j| 0.3 * (i + 2 * j) as f64 - 0.4);
        let h = sigma_term(&p, &x, &lambda, DEFAULT_RANK_TOL).unwrap();
        let xinv = p.constraint(&x).as_matrix().clone().try_inverse().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let ai = p.constraint_derivative(&x, i);
                let aj = p.constraint_derivative(&x, j);
                let direct = 2.0 * (ai.as_matrix() * &xinv * aj.as_matrix() * lambda.as_matrix()).trace();
                assert!((h.get(i, j) - direct).abs() < 1e-10 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn wsosp_interior_is_full_space() {
        let p = AffineProblem::random(3, 3, 2).unwrap();
        let x = Vector::from_element(3, 0.0);
        let lambda = SymMat::identity(3);
        let r = wsosp_curvature_check(&p, &x, &lambda, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.subspace_dim, 3);
        let full = &lagrangian_hessian(&p, &x, &lambda)
            + &sigma_term(&p, &x, &lambda, DEFAULT_RANK_TOL).unwrap();
        assert!((r.min_restricted_curvature - full.spectrum().unwrap().min()).abs() < 1e-12);
    }

    #[test]
    fn wsosp_scalar_boundary_empty_subspace() {
        let p = analytic_scalar_problem(1.0).unwrap();
        let x = Vector::from_element(1, 1e-9);
        let r = wsosp_curvature_check(&p, &x, &SymMat::identity(1), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.subspace_dim, 0);
        assert_eq!(r.min_restricted_curvature, f64::INFINITY);
    }

    #[test]
    fn hessian_identity_holds() {
        let p = CurvedProblem::random(3, 3, 4).unwrap();
        let x = Vector::from_element(3, 0.05);
        let z = SymMat::from_upper_fn(3, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 });
        let it = Iterate::new(&p, x, z).unwrap();
        let gap = hessian_identity_gap(&p, &it, &MeritParams { mu: 0.3, nu: 0.7 }).unwrap();
        assert!(gap < 1e-10, "gap {gap}");
    }
}
