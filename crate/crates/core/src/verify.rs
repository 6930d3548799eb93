//! Property checks shared by the test suites and the `verify` command:
//! finite-difference derivative checks, sampled local Lipschitz bounds,
//! per-step feasibility audits and guaranteed-decrease checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::rng_for;
use crate::error::{Result, SolverError};
use crate::exec::Execution;
use crate::inner::{run_inner_observed, IpmParams, Procedure, StepMode, StepRecord};
use crate::linalg::{spectral_norm, Spectrum, SymMat};
use crate::merit::{
    local_lipschitz_x, local_lipschitz_xx, local_lipschitz_z, merit_grad_x, merit_grad_z,
    merit_hess_xx, MeritParams,
};
use crate::problem::{Iterate, Lipschitz, NsdpProblem, Vector};
use crate::scaling::Scaling;

/// Outcome of one property over a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    pub violations: usize,
    /// Largest observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    /// Passes when every value is at most `tolerance`.
    pub fn from_values(name: &str, values: &[f64], tolerance: f64) -> Self {
        let violations = values.iter().filter(|v| !(**v <= tolerance)).count();
        let worst = values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) });
        Self {
            name: name.into(),
            passed: violations == 0 && !values.is_empty(),
            samples: values.len(),
            violations,
            worst,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `‖a − b‖ / max(‖b‖, 1)`.
pub fn relative_error(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn vec_rel(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Random strictly interior pairs: `x = center + spread·u` with `u`
/// uniform on `[−1, 1]ⁿ`, and `Z = MMᵀ/m + 0.1I` with `M` uniform on
/// `[−1, 1]`. Draws where `λ_min(X(x))` falls below half of its value at
/// `center` are rejected.
pub fn sample_iterates<P: NsdpProblem + ?Sized>(
    prob: &P,
    center: &Vector,
    spread: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Iterate>> {
    let floor = prob.constraint(center).spectrum()?.min() / 2.0;
    if !(floor > 0.0) {
        return Err(SolverError::DomainViolation("sample center is not strictly interior".into()));
    }
    let (n, m) = (prob.n(), prob.m());
    let mut rng = rng_for(seed, 5);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(SolverError::GenerationFailed("no interior samples found".into()));
        }
        let x = center + Vector::from_fn(n, |_, _| spread * rng.gen_range(-1.0..1.0));
        if prob.constraint(&x).spectrum()?.min() < floor {
            continue;
        }
        let g = nalgebra::DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
        let z = SymMat::from_matrix(&g * g.transpose() / m as f64)?
            .add_scaled(0.1, &SymMat::identity(m));
        out.push(Iterate::new(prob, x, z)?);
    }
    Ok(out)
}

/// Relative errors of the analytic merit derivatives against central
/// finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeErrors {
    pub grad_x: f64,
    pub grad_z: f64,
    pub hess_xx: f64,
}

fn cholesky_log_det(a: &SymMat) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(a.as_matrix().clone())
        .ok_or_else(|| SolverError::DomainViolation("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `ψ(x, Z)` from its definition with Cholesky log-determinants, sharing
/// nothing with the spectral evaluation used by the solver.
pub fn merit_direct<P: NsdpProblem + ?Sized>(
    prob: &P,
    x: &Vector,
    z: &SymMat,
    p: &MeritParams,
) -> Result<f64> {
    let xm = prob.constraint(x);
    let (ldx, ldz) = (cholesky_log_det(&xm)?, cholesky_log_det(z)?);
    Ok(prob.objective(x) - p.mu * ldx + p.nu * (xm.inner(z) - p.mu * ldx - p.mu * ldz))
}

/// Central differences with step `h`: of `ψ` along coordinates for
/// `∇ₓψ`, of `ψ` along an orthonormal basis of 𝕊ᵐ for `∇_Zψ`, and of the
/// analytic `∇ₓψ` for `∇²ₓₓψ`. Values of `ψ` come from [`merit_direct`].
pub fn merit_fd_errors<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    p: &MeritParams,
    h: f64,
) -> Result<DerivativeErrors> {
    let n = prob.n();
    let m = prob.m();
    let shifted = |i: usize, s: f64| {
        let mut x = it.x().clone();
        x[i] += s;
        x
    };

    let mut fd_grad = Vector::zeros(n);
    let mut fd_hess = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        let (xp, xm) = (shifted(i, h), shifted(i, -h));
        fd_grad[i] = (merit_direct(prob, &xp, it.z(), p)? - merit_direct(prob, &xm, it.z(), p)?)
            / (2.0 * h);
        let plus = it.with_x(prob, xp)?;
        let minus = it.with_x(prob, xm)?;
        let col = (merit_grad_x(prob, &plus, p)? - merit_grad_x(prob, &minus, p)?) / (2.0 * h);
        fd_hess.set_column(i, &col);
    }
    let grad_x = vec_rel(&fd_grad, &merit_grad_x(prob, it, p)?);
    let hess_xx = relative_error(&fd_hess, merit_hess_xx(prob, it, p)?.as_matrix());

    let gz = merit_grad_z(it, p);
    let mut fd_z = Vec::new();
    let mut an_z = Vec::new();
    for i in 0..m {
        for j in i..m {
            let w = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
            let e = SymMat::from_upper_fn(m, |a, b| if a == i && b == j { w } else { 0.0 });
            let plus = merit_direct(prob, it.x(), &it.z().add_scaled(h, &e), p)?;
            let minus = merit_direct(prob, it.x(), &it.z().add_scaled(-h, &e), p)?;
            fd_z.push((plus - minus) / (2.0 * h));
            an_z.push(gz.inner(&e));
        }
    }
    let grad_z = vec_rel(&Vector::from_vec(fd_z), &Vector::from_vec(an_z));
    Ok(DerivativeErrors { grad_x, grad_z, hess_xx })
}

/// Relative gaps in `∇ₓψ = ∇f − [⟨Aᵢ, Λ⟩]ᵢ`, recomputed term by term as
/// `∇f − (1+ν)μ[⟨Aᵢ, X⁻¹⟩]ᵢ + ν[⟨Aᵢ, Z⟩]ᵢ`, and in the Hessian identity.
pub fn surrogate_identity_gaps<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    p: &MeritParams,
) -> Result<(f64, f64)> {
    let derivs = it.derivatives(prob);
    let w = (1.0 + p.nu) * p.mu;
    let expanded = Vector::from_iterator(
        prob.n(),
        derivs.iter().enumerate().map(|(i, a)| {
            prob.objective_gradient(it.x())[i] - w * a.inner(it.x_inv()) + p.nu * a.inner(it.z())
        }),
    );
    let grad_gap = vec_rel(&merit_grad_x(prob, it, p)?, &expanded);
    let hess_gap = crate::certificates::hessian_identity_gap(prob, it, p)?;
    Ok((grad_gap, hess_gap))
}

/// Left- and right-hand sides of the four local Lipschitz inequalities
/// for one anchor/probe pair, ordered `X⁻¹`, `∇ₓψ`, `∇_Zψ`, `∇²ₓₓψ`.
pub fn lipschitz_pair<P: NsdpProblem + ?Sized>(
    prob: &P,
    anchor: &Iterate,
    p: &MeritParams,
    c: Lipschitz,
    rng: &mut impl Rng,
) -> Result<[(f64, f64); 4]> {
    let n = prob.n();
    let m = prob.m();
    let u = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let u = &u / u.norm();
    let t = rng.gen::<f64>() * anchor.x_spectrum().min() / (2.0 * c.l0);
    let probe_x = anchor.with_x(prob, anchor.x() + &u * t)?;
    let d = SymMat::from_upper_fn(m, |_, _| rng.gen_range(-1.0..1.0));
    let d = d.scale(1.0 / d.frobenius_norm());
    let s = rng.gen::<f64>() * anchor.z_spectrum().min() / 2.0;
    let probe_z = anchor.with_z(anchor.z().add_scaled(s, &d))?;

    let xi = anchor.x_spectrum().inverse_frobenius_norm();
    let inv = (
        (anchor.x_inv() - probe_x.x_inv()).frobenius_norm(),
        2.0 * c.l0 * xi * xi * t,
    );
    let gx = (
        (merit_grad_x(prob, anchor, p)? - merit_grad_x(prob, &probe_x, p)?).norm(),
        local_lipschitz_x(anchor, p, Some(c))? * t,
    );
    let gz = (
        (&merit_grad_z(anchor, p) - &merit_grad_z(&probe_z, p)).frobenius_norm(),
        local_lipschitz_z(anchor, p) * s,
    );
    let hess = (
        spectral_norm(&(&merit_hess_xx(prob, anchor, p)? - &merit_hess_xx(prob, &probe_x, p)?))?,
        local_lipschitz_xx(anchor, p, Some(c))? * t,
    );
    Ok([inv, gx, gz, hess])
}

/// `lhs − rhs` beyond a rounding allowance; nonpositive means the bound
/// holds.
pub fn bound_excess(lhs: f64, rhs: f64) -> f64 {
    lhs - rhs - 1e-10 * rhs.abs() - 1e-14
}

/// `λᵢ(after) ∈ [½λᵢ(before), (3/2)λᵢ(before)]` for all `i`.
pub fn sandwich_holds(before: &Spectrum, after: &Spectrum) -> bool {
    before.values().iter().zip(after.values().iter()).all(|(&b, &a)| {
        let slack = 1e-12 * b.abs();
        a >= 0.5 * b - slack && a <= 1.5 * b + slack
    })
}

/// Per-step invariants: strict interiority, the step caps, and the
/// eigenvalue sandwich after primal moves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepAudit {
    pub steps: usize,
    pub interior_violations: usize,
    pub cap_violations: usize,
    pub sandwich_violations: usize,
    pub merit_increases: usize,
}

impl StepAudit {
    /// `l0` is the constant used for the primal cap (`1` when unknown).
    pub fn observe(&mut self, before: &Iterate, after: &Iterate, rec: &StepRecord, l0: f64) {
        self.steps += 1;
        if !(after.x_spectrum().min() > 0.0 && after.z_spectrum().min() > 0.0) {
            self.interior_violations += 1;
        }
        let tol = 1.0 + 1e-12;
        match rec.procedure {
            Procedure::DualGrad => {
                let moved = (after.z() - before.z()).frobenius_norm();
                if moved > before.z_spectrum().min() / 2.0 * tol {
                    self.cap_violations += 1;
                }
            }
            Procedure::PrimalGrad | Procedure::NegCurvature => {
                let moved = (after.x() - before.x()).norm();
                if moved > before.x_spectrum().min() / (2.0 * l0) * tol {
                    self.cap_violations += 1;
                }
                if !sandwich_holds(before.x_spectrum(), after.x_spectrum()) {
                    self.sandwich_violations += 1;
                }
            }
        }
        if rec.merit_after > rec.merit_before {
            self.merit_increases += 1;
        }
    }

    pub fn violations(&self) -> usize {
        self.interior_violations + self.cap_violations + self.sandwich_violations + self.merit_increases
    }
}

/// `(σ − achieved decrease) / max(|ψ|, 1)` for fixed-mode records, where a
/// value `≤ 1e-12` means the guaranteed decrease was met.
pub fn decrease_shortfall(rec: &StepRecord) -> Option<f64> {
    let sigma = rec.guaranteed_sigma?;
    let achieved = rec.merit_before - rec.merit_after;
    Some((sigma - achieved) / rec.merit_before.abs().max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub mu: f64,
    pub nu: f64,
    pub derivative_samples: usize,
    pub lipschitz_pairs: usize,
    pub fixed_steps: usize,
    pub sample_spread: f64,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            mu: 0.24,
            nu: 0.24f64.powf(0.1),
            derivative_samples: 50,
            lipschitz_pairs: 100,
            fixed_steps: 200,
            sample_spread: 0.05,
            fd_step: 1e-5,
            seed: 0,
        }
    }
}

/// Runs the derivative, identity, Lipschitz, audit and descent checks
/// around `start`. Checks that need Lipschitz constants are skipped when
/// the problem has none.
pub fn verify_problem<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start: &Iterate,
    scaling: &S,
    opts: &VerifyOptions,
    exec: Execution,
) -> Result<VerifyReport> {
    let mp = MeritParams::new(opts.mu, opts.nu)?;
    let samples = sample_iterates(prob, start.x(), opts.sample_spread, opts.derivative_samples, opts.seed)?;
    let fd: Vec<DerivativeErrors> = exec
        .map(&samples, |it| merit_fd_errors(prob, it, &mp, opts.fd_step))
        .into_iter()
        .collect::<Result<_>>()?;
    let gaps: Vec<(f64, f64)> = exec
        .map(&samples, |it| surrogate_identity_gaps(prob, it, &mp))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut report = VerifyReport::default();
    let col = |f: &dyn Fn(&DerivativeErrors) -> f64| fd.iter().map(f).collect::<Vec<_>>();
    report.checks.push(CheckResult::from_values("fd_grad_x", &col(&|e| e.grad_x), 1e-5));
    report.checks.push(CheckResult::from_values("fd_grad_z", &col(&|e| e.grad_z), 1e-5));
    report.checks.push(CheckResult::from_values("fd_hess_xx", &col(&|e| e.hess_xx), 1e-4));
    let g: Vec<f64> = gaps.iter().map(|g| g.0).collect();
    let h: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    report.checks.push(CheckResult::from_values("identity_grad_lagrangian", &g, 1e-10));
    report.checks.push(CheckResult::from_values("identity_hess_lagrangian", &h, 1e-10));

    let Some(c) = prob.lipschitz() else {
        return Ok(report);
    };
    let pairs: Vec<[(f64, f64); 4]> = exec
        .map_range(opts.lipschitz_pairs, |i| {
            let anchor = &samples[i % samples.len()];
            lipschitz_pair(prob, anchor, &mp, c, &mut rng_for(opts.seed, 100 + i as u64))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    for (k, name) in ["lipschitz_inv_x", "lipschitz_grad_x", "lipschitz_grad_z", "lipschitz_hess_xx"]
        .into_iter()
        .enumerate()
    {
        let ex: Vec<f64> = pairs.iter().map(|p| bound_excess(p[k].0, p[k].1)).collect();
        report.checks.push(CheckResult::from_values(name, &ex, 0.0));
    }

    let params = IpmParams {
        mu: opts.mu,
        nu: opts.nu,
        eps_g: opts.mu,
        eps_mu: opts.mu.powf(1.2),
        eps_h: opts.mu,
        max_inner_iters: opts.fixed_steps,
        step_mode: StepMode::FixedLipschitz,
        ..IpmParams::default()
    };
    let mut audit = StepAudit::default();
    let mut shortfalls = Vec::new();
    run_inner_observed(prob, start.clone(), &params, scaling, |b, a, r| {
        audit.observe(b, a, r, c.l0);
        shortfalls.extend(decrease_shortfall(r));
    })?;
    report.checks.push(CheckResult::from_values(
        "step_audit",
        &[audit.violations() as f64],
        0.0,
    ));
    if !shortfalls.is_empty() {
        report.checks.push(CheckResult::from_values("guaranteed_decrease", &shortfalls, 1e-12));
    }
    Ok(report)
}
