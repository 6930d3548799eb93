//! Scaling operators applied to the primal and dual gradient directions.

use rand::Rng;

use crate::benchmarks::rng_for;
use crate::error::{Result, SolverError};
use crate::linalg::SymMat;
use crate::problem::Vector;

/// Symmetric positive definite `H_x` on ℝⁿ and symmetric `H_Z` on 𝕊ᵐ.
pub trait Scaling: Sync {
    fn apply_x(&self, v: &Vector) -> Vector;
    fn apply_z(&self, d: &SymMat) -> SymMat;
}

/// `H_x = I`, `H_Z = id`; pairs with `h_min = h_max = κ_min = κ_max = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityScaling;

impl Scaling for IdentityScaling {
    fn apply_x(&self, v: &Vector) -> Vector {
        v.clone()
    }
    fn apply_z(&self, d: &SymMat) -> SymMat {
        d.clone()
    }
}

/// `H_x = diag(h)` and `H_Z = κ·id`.
#[derive(Debug, Clone)]
pub struct DiagonalScaling {
    pub x_diag: Vector,
    pub z_factor: f64,
}

impl Scaling for DiagonalScaling {
    fn apply_x(&self, v: &Vector) -> Vector {
        v.component_mul(&self.x_diag)
    }
    fn apply_z(&self, d: &SymMat) -> SymMat {
        d.scale(self.z_factor)
    }
}

/// Spectral bounds promised for a [`Scaling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingBounds {
    pub h_min: f64,
    pub h_max: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
}

/// Probes `scaling` with random unit vectors: symmetry of both operators to
/// `1e-10` and the Rayleigh quotients inside the promised bounds.
pub fn check_scaling<S: Scaling + ?Sized>(
    scaling: &S,
    bounds: ScalingBounds,
    n: usize,
    m: usize,
    probes: usize,
    seed: u64,
) -> Result<()> {
    let mut rng = rng_for(seed, 3);
    let tol = 1e-10;
    let fail = |msg: String| Err(SolverError::InvalidInput(format!("scaling: {msg}")));
    for _ in 0..probes {
        let u = unit_vector(n, &mut rng);
        let v = unit_vector(n, &mut rng);
        let hu = scaling.apply_x(&u);
        if (hu.dot(&v) - u.dot(&scaling.apply_x(&v))).abs() > tol {
            return fail("H_x is not symmetric".into());
        }
        let q = u.dot(&hu);
        if q < bounds.h_min * (1.0 - tol) || q > bounds.h_max * (1.0 + tol) {
            return fail(format!("uᵀH_x u = {q} outside [{}, {}]", bounds.h_min, bounds.h_max));
        }
        let d = unit_sym(m, &mut rng);
        let e = unit_sym(m, &mut rng);
        let hd = scaling.apply_z(&d);
        if (hd.inner(&e) - d.inner(&scaling.apply_z(&e))).abs() > tol {
            return fail("H_Z is not symmetric".into());
        }
        let q = d.inner(&hd);
        if q < bounds.kappa_min * (1.0 - tol) || q > bounds.kappa_max * (1.0 + tol) {
            return fail(format!(
                "<D, H_Z D> = {q} outside [{}, {}]",
                bounds.kappa_min, bounds.kappa_max
            ));
        }
    }
    Ok(())
}

fn unit_vector(n: usize, rng: &mut impl Rng) -> Vector {
    let v = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let norm = v.norm();
    v / norm
}

fn unit_sym(m: usize, rng: &mut impl Rng) -> SymMat {
    let d = SymMat::from_upper_fn(m, |_, _| rng.gen_range(-1.0..1.0));
    let norm = d.frobenius_norm();
    d.scale(1.0 / norm)
}
