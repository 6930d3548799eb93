//! The problem interface `min f(x) s.t. X(x) ⪰ 0` and the primal-dual
//! iterate shared by every solver.

use std::sync::{Arc, OnceLock};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::linalg::{sparse_family, Spectrum, SymMat};

pub type Vector = DVector<f64>;

/// Relative floor below which an eigenvalue is treated as nonpositive.
pub const INTERIORITY_FLOOR: f64 = 1e-14;

/// Bounds on the derivatives of `f` and `X` (see [`NsdpProblem::lipschitz`]).
///
/// * `l0` bounds `Σᵢ ‖Aᵢ(x)‖_F`, and therefore the Lipschitz constant of `X`.
/// * `l1` bounds the Lipschitz constant of `∇f` and `Σᵢⱼ ‖∂²X/∂xᵢ∂xⱼ‖_F`.
/// * `l2` bounds the Lipschitz constants of `∇²f` and of `∂²X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lipschitz {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Lipschitz {
    pub fn new(l0: f64, l1: f64, l2: f64) -> Result<Self> {
        if !(l0 > 0.0 && l1 >= 0.0 && l2 >= 0.0) || !(l0 + l1 + l2).is_finite() {
            return Err(SolverError::InvalidInput(format!(
                "Lipschitz constants must be finite with L0 > 0, L1 >= 0, L2 >= 0 (got {l0}, {l1}, {l2})"
            )));
        }
        Ok(Self { l0, l1, l2 })
    }
}

/// A nonlinear semidefinite program with analytic derivatives.
///
/// Implementations must be reentrant: evaluation never mutates shared state,
/// so independent solver runs may share one problem across threads.
pub trait NsdpProblem: Sync {
    /// Number of variables `n`.
    fn n(&self) -> usize;
    /// Order `m` of the matrix constraint.
    fn m(&self) -> usize;

    fn objective(&self, x: &Vector) -> f64;
    fn objective_gradient(&self, x: &Vector) -> Vector;
    fn objective_hessian(&self, x: &Vector) -> SymMat;

    /// `X(x)`.
    fn constraint(&self, x: &Vector) -> SymMat;
    /// `Aᵢ(x) = ∂X/∂xᵢ`.
    fn constraint_derivative(&self, x: &Vector, i: usize) -> SymMat;
    /// `∂²X/∂xᵢ∂xⱼ`.
    fn constraint_second_derivative(&self, x: &Vector, i: usize, j: usize) -> SymMat;

    /// `None` when the constants are unknown; fixed step sizes are then
    /// unavailable and only backtracking can be used.
    fn lipschitz(&self) -> Option<Lipschitz>;

    /// `true` when `X` is affine, letting callers skip `∂²X ≡ O`.
    fn constraint_is_affine(&self) -> bool {
        false
    }

    fn constraint_derivatives(&self, x: &Vector) -> Vec<SymMat> {
        (0..self.n())
            .map(|i| self.constraint_derivative(x, i))
            .collect()
    }

    /// `f(x) − f(y)`; override when it can be formed without cancellation.
    fn objective_difference(&self, x: &Vector, y: &Vector) -> f64 {
        self.objective(x) - self.objective(y)
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(SolverError::InvalidInput(format!(
            "{what} has length {got}, expected {want}"
        )));
    }
    Ok(())
}

/// `[⟨Aᵢ(x), W⟩]ᵢ` for precomputed derivatives.
pub fn adjoint_with(derivs: &[SymMat], w: &SymMat) -> Vector {
    Vector::from_iterator(derivs.len(), derivs.iter().map(|a| a.inner(w)))
}

/// `Σᵢ dᵢ Aᵢ(x)` for precomputed derivatives.
pub fn delta_with(derivs: &[SymMat], m: usize, d: &Vector) -> SymMat {
    let mut acc = SymMat::zeros(m);
    for (a, &di) in derivs.iter().zip(d.iter()) {
        if di != 0.0 {
            acc = acc.add_scaled(di, a);
        }
    }
    acc
}

/// Adjoint of the constraint Jacobian: component `i` is `tr(Aᵢ(x) W)`.
pub fn adjoint_map<P: NsdpProblem + ?Sized>(prob: &P, x: &Vector, w: &SymMat) -> Result<Vector> {
    check_len("x", x.len(), prob.n())?;
    if w.dim() != prob.m() {
        return Err(SolverError::InvalidInput(format!(
            "W has order {}, expected {}",
            w.dim(),
            prob.m()
        )));
    }
    Ok(adjoint_with(&prob.constraint_derivatives(x), w))
}

/// Directional derivative `ΔX(x; d) = Σᵢ dᵢ Aᵢ(x)`.
pub fn delta_x<P: NsdpProblem + ?Sized>(prob: &P, x: &Vector, d: &Vector) -> Result<SymMat> {
    check_len("x", x.len(), prob.n())?;
    check_len("d", d.len(), prob.n())?;
    Ok(delta_with(&prob.constraint_derivatives(x), prob.m(), d))
}

/// Fails with `DomainViolation` unless `λ_min > floor·(1 + ‖A‖_F)`.
pub fn require_interior(what: &str, spec: &Spectrum) -> Result<()> {
    let floor = INTERIORITY_FLOOR * (1.0 + spec.frobenius_norm());
    let lmin = spec.min();
    if !(lmin > floor) {
        return Err(SolverError::DomainViolation(format!(
            "lambda_min({what}) = {lmin:e} is not above {floor:e}"
        )));
    }
    Ok(())
}

/// Strictly interior primal-dual pair `(x, Z)` with the constraint value and
/// both spectra cached.
#[derive(Debug, Clone)]
pub struct Iterate {
    x: Vector,
    z: SymMat,
    x_mat: SymMat,
    x_spec: Spectrum,
    z_spec: Spectrum,
    x_inv: SymMat,
    z_inv: SymMat,
    derivs: Arc<OnceLock<Derivatives>>,
}

#[derive(Debug)]
struct Derivatives {
    dense: Vec<SymMat>,
    sparse: Option<Vec<Vec<(usize, usize, f64)>>>,
}

impl Iterate {
    /// Validates dimensions and strict interiority of `X(x)` and `Z`.
    pub fn new<P: NsdpProblem + ?Sized>(prob: &P, x: Vector, z: SymMat) -> Result<Self> {
        check_len("x", x.len(), prob.n())?;
        if z.dim() != prob.m() {
            return Err(SolverError::InvalidInput(format!(
                "Z has order {}, expected {}",
                z.dim(),
                prob.m()
            )));
        }
        let z_spec = z.spectrum()?;
        require_interior("Z", &z_spec)?;
        Self::with_dual_spectrum(prob, x, z, z_spec)
    }

    fn with_dual_spectrum<P: NsdpProblem + ?Sized>(
        prob: &P,
        x: Vector,
        z: SymMat,
        z_spec: Spectrum,
    ) -> Result<Self> {
        Self::assemble(prob, x, z, z_spec, Arc::default())
    }

    fn assemble<P: NsdpProblem + ?Sized>(
        prob: &P,
        x: Vector,
        z: SymMat,
        z_spec: Spectrum,
        derivs: Arc<OnceLock<Derivatives>>,
    ) -> Result<Self> {
        let x_mat = prob.constraint(&x);
        let x_spec = x_mat.spectrum()?;
        require_interior("X(x)", &x_spec)?;
        let x_inv = x_spec.inverse();
        let z_inv = z_spec.inverse();
        Ok(Self {
            x,
            z,
            x_mat,
            x_spec,
            z_spec,
            x_inv,
            z_inv,
            derivs,
        })
    }

    /// Pair on the surrogate central path, `Z = μ X(x)⁻¹`.
    pub fn on_central_path<P: NsdpProblem + ?Sized>(prob: &P, x: Vector, mu: f64) -> Result<Self> {
        check_len("x", x.len(), prob.n())?;
        if !(mu > 0.0) {
            return Err(SolverError::InvalidInput(format!("mu must be positive, got {mu}")));
        }
        let x_mat = prob.constraint(&x);
        let x_spec = x_mat.spectrum()?;
        require_interior("X(x)", &x_spec)?;
        let z = x_spec.map(|l| mu / l);
        Self::new(prob, x, z)
    }

    /// Same dual variable, new primal point.
    pub fn with_x<P: NsdpProblem + ?Sized>(&self, prob: &P, x: Vector) -> Result<Self> {
        check_len("x", x.len(), prob.n())?;
        let derivs = if prob.constraint_is_affine() { self.derivs.clone() } else { Arc::default() };
        Self::assemble(prob, x, self.z.clone(), self.z_spec.clone(), derivs)
    }

    /// Same primal point, new dual variable.
    pub fn with_z(&self, z: SymMat) -> Result<Self> {
        if z.dim() != self.z.dim() {
            return Err(SolverError::InvalidInput("Z order mismatch".into()));
        }
        let z_spec = z.spectrum()?;
        require_interior("Z", &z_spec)?;
        let z_inv = z_spec.inverse();
        Ok(Self {
            x: self.x.clone(),
            z,
            x_mat: self.x_mat.clone(),
            x_spec: self.x_spec.clone(),
            z_spec,
            x_inv: self.x_inv.clone(),
            z_inv,
            derivs: self.derivs.clone(),
        })
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }
    pub fn z(&self) -> &SymMat {
        &self.z
    }
    /// Cached `X(x)`.
    pub fn x_mat(&self) -> &SymMat {
        &self.x_mat
    }
    pub fn x_spectrum(&self) -> &Spectrum {
        &self.x_spec
    }
    pub fn z_spectrum(&self) -> &Spectrum {
        &self.z_spec
    }
    pub fn x_inv(&self) -> &SymMat {
        &self.x_inv
    }
    pub fn z_inv(&self) -> &SymMat {
        &self.z_inv
    }

    fn derivative_cache<P: NsdpProblem + ?Sized>(&self, prob: &P) -> &Derivatives {
        self.derivs.get_or_init(|| {
            let dense = prob.constraint_derivatives(&self.x);
            let sparse = sparse_family(&dense);
            Derivatives { dense, sparse }
        })
    }

    /// `Aᵢ(x)` for all `i`, evaluated once per iterate and shared across
    /// primal moves when `X` is affine.
    pub fn derivatives<P: NsdpProblem + ?Sized>(&self, prob: &P) -> &[SymMat] {
        &self.derivative_cache(prob).dense
    }

    /// `[⟨Aᵢ(x), W⟩]ᵢ`.
    pub fn adjoint<P: NsdpProblem + ?Sized>(&self, prob: &P, w: &SymMat) -> Vector {
        let cache = self.derivative_cache(prob);
        match &cache.sparse {
            Some(sparse) => Vector::from_iterator(
                sparse.len(),
                sparse.iter().map(|e| e.iter().map(|&(a, b, v)| v * w.get(a, b)).sum()),
            ),
            None => adjoint_with(&cache.dense, w),
        }
    }
}
