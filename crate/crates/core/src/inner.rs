//! Fixed-parameter inner method: for fixed `(μ, ν, ε)` it alternates a
//! scaled dual gradient step, a scaled primal gradient step and a
//! negative-curvature step until the iterate is an ε-approximate
//! second-order stationary point of the merit function.
//!
//! Step sizes come either from the local Lipschitz constants (every step
//! then carries a closed-form guaranteed decrease) or from backtracking on
//! the same sufficient-decrease targets, started at the largest step that
//! provably keeps the iterate strictly interior.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::linalg::{Spectrum, SymMat};
use crate::merit::{
    local_lipschitz_x, local_lipschitz_xx, local_lipschitz_z, merit_grad_z, merit_hess_xx,
    merit_decrease, merit_value, lambda_surrogate, MeritParams,
};
use crate::problem::{Iterate, Lipschitz, NsdpProblem, Vector};
use crate::scaling::{Scaling, ScalingBounds};

/// How step sizes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepMode {
    /// Step sizes from `L0, L1, L2`; requires known constants.
    FixedLipschitz,
    /// Shrink by `beta` from the interiority cap until the decrease target
    /// is met. `alpha_floor` is relative to the initial step.
    Backtracking { beta: f64, alpha_floor: f64 },
}

impl StepMode {
    pub fn backtracking() -> Self {
        StepMode::Backtracking { beta: 0.5, alpha_floor: 1e-16 }
    }
}

/// The three update rules of the inner method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    DualGrad,
    PrimalGrad,
    NegCurvature,
}

impl Procedure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Procedure::DualGrad => "dual_grad",
            Procedure::PrimalGrad => "primal_grad",
            Procedure::NegCurvature => "neg_curvature",
        }
    }
}

pub const DEFAULT_ORDER: [Procedure; 3] =
    [Procedure::DualGrad, Procedure::PrimalGrad, Procedure::NegCurvature];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpmParams {
    pub mu: f64,
    pub nu: f64,
    pub eps_g: f64,
    pub eps_mu: f64,
    pub eps_h: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub max_inner_iters: usize,
    pub step_mode: StepMode,
    /// Order in which the procedure triggers are tested.
    pub order: [Procedure; 3],
    /// `false` removes the negative-curvature procedure entirely.
    pub negative_curvature: bool,
    /// Primal interior-point variant: `ν = 0`, the dual procedure is dropped
    /// and `Z` is reset to `μX⁻¹` after every primal step.
    pub primal_only: bool,
}

impl Default for IpmParams {
    fn default() -> Self {
        Self {
            mu: 0.1,
            nu: 1.0,
            eps_g: 1e-3,
            eps_mu: 1e-3,
            eps_h: 1e-3,
            h_min: 1.0,
            h_max: 1.0,
            kappa_min: 1.0,
            kappa_max: 1.0,
            max_inner_iters: 10_000,
            step_mode: StepMode::backtracking(),
            order: DEFAULT_ORDER,
            negative_curvature: true,
            primal_only: false,
        }
    }
}

impl IpmParams {
    pub fn merit(&self) -> MeritParams {
        MeritParams { mu: self.mu, nu: self.nu }
    }

    pub fn scaling_bounds(&self) -> ScalingBounds {
        ScalingBounds {
            h_min: self.h_min,
            h_max: self.h_max,
            kappa_min: self.kappa_min,
            kappa_max: self.kappa_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.merit().validate()?;
        let bad = |m: String| Err(SolverError::InvalidInput(m));
        for (name, v) in [("eps_g", self.eps_g), ("eps_mu", self.eps_mu), ("eps_h", self.eps_h)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_max && self.h_max.is_finite()) {
            return bad(format!("need 0 < h_min <= h_max, got {} and {}", self.h_min, self.h_max));
        }
        if !(self.kappa_min > 0.0 && self.kappa_min <= self.kappa_max && self.kappa_max.is_finite())
        {
            return bad(format!(
                "need 0 < kappa_min <= kappa_max, got {} and {}",
                self.kappa_min, self.kappa_max
            ));
        }
        if self.max_inner_iters == 0 {
            return bad("max_inner_iters must be positive".into());
        }
        if let StepMode::Backtracking { beta, alpha_floor } = self.step_mode {
            if !(beta > 0.0 && beta < 1.0) {
                return bad(format!("backtracking beta must lie in (0, 1), got {beta}"));
            }
            if !(alpha_floor > 0.0 && alpha_floor < 1.0) {
                return bad(format!("relative alpha floor must lie in (0, 1), got {alpha_floor}"));
            }
        }
        for p in DEFAULT_ORDER {
            if !self.order.contains(&p) {
                return bad(format!("procedure order {:?} is not a permutation", self.order));
            }
        }
        if self.primal_only && self.nu != 0.0 {
            return bad(format!("primal variant requires nu = 0, got {}", self.nu));
        }
        Ok(())
    }

    fn constants<P: NsdpProblem + ?Sized>(&self, prob: &P) -> Result<Option<Lipschitz>> {
        match (self.step_mode, prob.lipschitz()) {
            (StepMode::FixedLipschitz, None) => Err(SolverError::ConstantsRequired),
            (_, c) => Ok(c),
        }
    }

    /// `L0` for the interiority cap; `1` when unknown in backtracking mode.
    fn cap_l0(constants: Option<Lipschitz>) -> f64 {
        constants.map_or(1.0, |c| c.l0)
    }
}

/// Scaled left-hand sides of the three approximate stationarity
/// conditions. The conditions hold iff `r_g ≤ ε_g`, `r_mu ≤ ε_μ`,
/// `r_h ≤ ε_H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖∇ₓψ‖ / (1 + μ‖X⁻¹‖_F + ‖Z‖_F)`.
    pub r_g: f64,
    /// `‖∇_Zψ‖_F / (1 + μ‖Z⁻¹‖_F)`.
    pub r_mu: f64,
    /// `−λ_min(∇²ₓₓψ) / (1 + μ‖X⁻¹‖_F + ‖Z‖_F)²`; `None` when the Hessian
    /// was not evaluated.
    pub r_h: Option<f64>,
}

impl Residuals {
    pub fn ratios(&self, params: &IpmParams) -> (f64, f64, Option<f64>) {
        (
            self.r_g / params.eps_g,
            self.r_mu / params.eps_mu,
            self.r_h.map(|r| r / params.eps_h),
        )
    }
}

/// Outcome of testing the three conditions at one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SospCheck {
    pub stationarity: bool,
    pub complementarity: bool,
    /// `None` when skipped because an earlier condition failed.
    pub curvature: Option<bool>,
    pub residuals: Residuals,
}

impl SospCheck {
    pub fn satisfied(&self) -> bool {
        self.stationarity && self.complementarity && self.curvature == Some(true)
    }
}

/// One accepted step of the inner method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iter: usize,
    pub procedure: Procedure,
    pub alpha: f64,
    pub merit_before: f64,
    pub merit_after: f64,
    /// Closed-form lower bound on the decrease (fixed step mode only).
    pub guaranteed_sigma: Option<f64>,
    /// Step-dependent decrease target the step met or was guaranteed.
    pub target_decrease: f64,
    pub residuals: Residuals,
    /// `‖x⁺ − x‖` for primal steps, `‖Z⁺ − Z‖_F` for dual steps.
    pub step_norm: f64,
    /// `λ_min(X)/(2L0)` or `λ_min(Z)/2`.
    pub step_cap: f64,
    pub objective_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStatus {
    Converged,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub iterate: Iterate,
    pub trace: Vec<StepRecord>,
    pub status: InnerStatus,
    /// Residuals at the returned iterate.
    pub residuals: Residuals,
}

/// First- and (lazily) second-order information at one iterate.
struct Probe {
    value: f64,
    grad_x: Vector,
    grad_z: SymMat,
    scale_x: f64,
    scale_z: f64,
    hessian: Option<Spectrum>,
}

impl Probe {
    fn new<P: NsdpProblem + ?Sized>(prob: &P, it: &Iterate, mp: &MeritParams) -> Result<Self> {
        let lambda = lambda_surrogate(it, mp);
        let grad_x = prob.objective_gradient(it.x()) - it.adjoint(prob, &lambda);
        let scale_x =
            1.0 + mp.mu * it.x_spectrum().inverse_frobenius_norm() + it.z_spectrum().frobenius_norm();
        let scale_z = 1.0 + mp.mu * it.z_spectrum().inverse_frobenius_norm();
        Ok(Self {
            value: merit_value(prob, it, mp)?,
            grad_x,
            grad_z: merit_grad_z(it, mp),
            scale_x,
            scale_z,
            hessian: None,
        })
    }

    fn hessian<P: NsdpProblem + ?Sized>(
        &mut self,
        prob: &P,
        it: &Iterate,
        mp: &MeritParams,
    ) -> Result<&Spectrum> {
        if self.hessian.is_none() {
            self.hessian = Some(merit_hess_xx(prob, it, mp)?.spectrum()?);
        }
        Ok(self.hessian.as_ref().expect("just set"))
    }

    fn residuals(&self) -> Residuals {
        Residuals {
            r_g: self.grad_x.norm() / self.scale_x,
            r_mu: self.grad_z.frobenius_norm() / self.scale_z,
            r_h: self
                .hessian
                .as_ref()
                .map(|h| -h.min() / (self.scale_x * self.scale_x)),
        }
    }

    fn dual_trigger(&self, params: &IpmParams) -> bool {
        self.grad_z.frobenius_norm() > params.eps_mu * self.scale_z
    }

    fn primal_trigger(&self, params: &IpmParams) -> bool {
        self.grad_x.norm() > params.eps_g * self.scale_x
    }

    fn curvature_trigger<P: NsdpProblem + ?Sized>(
        &mut self,
        prob: &P,
        it: &Iterate,
        params: &IpmParams,
    ) -> Result<bool> {
        let threshold = -params.eps_h * self.scale_x * self.scale_x;
        Ok(self.hessian(prob, it, &params.merit())?.min() < threshold)
    }
}

/// Tests the three approximate stationarity conditions in order,
/// evaluating the Hessian only when the first two hold.
pub fn check_eps_sosp<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
) -> Result<SospCheck> {
    let mp = params.merit();
    mp.validate()?;
    let mut probe = Probe::new(prob, it, &mp)?;
    let stationarity = !probe.primal_trigger(params);
    let complementarity = !probe.dual_trigger(params);
    let curvature = if stationarity && complementarity {
        Some(!probe.curvature_trigger(prob, it, params)?)
    } else {
        None
    };
    Ok(SospCheck {
        stationarity,
        complementarity,
        curvature,
        residuals: probe.residuals(),
    })
}

/// All three residuals, evaluating the Hessian unconditionally.
pub fn sosp_residuals<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
) -> Result<Residuals> {
    let mp = params.merit();
    mp.validate()?;
    let mut probe = Probe::new(prob, it, &mp)?;
    probe.hessian(prob, it, &mp)?;
    Ok(probe.residuals())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Guaranteed decrease of the dual step.
pub fn sigma_dual(params: &IpmParams) -> f64 {
    let (mu, nu, e) = (params.mu, params.nu, params.eps_mu);
    let (kmin, kmax) = (params.kappa_min, params.kappa_max);
    ratio(mu * e * kmin, 4.0 * kmax).min(ratio(mu * e * e * kmin * kmin, 4.0 * nu * kmax * kmax))
}

/// Guaranteed decrease of the primal step.
pub fn sigma_primal(params: &IpmParams, c: Lipschitz) -> f64 {
    let (mu, nu, e) = (params.mu, params.nu, params.eps_g);
    let (hmin, hmax) = (params.h_min, params.h_max);
    let e2h = e * e * hmin * hmin;
    let hmax2 = hmax * hmax;
    [
        ratio(mu * e * hmin, 4.0 * c.l0 * hmax),
        ratio(e2h, 8.0 * c.l1 * hmax2),
        ratio(e2h, 4.0 * nu * c.l1 * hmax2),
        ratio(mu * e2h, 16.0 * (1.0 + nu) * c.l0 * c.l0 * hmax2),
        ratio(e2h, 4.0 * (1.0 + nu) * c.l1 * hmax2),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// Guaranteed decrease of the negative-curvature step.
pub fn sigma_negcurv(params: &IpmParams, c: Lipschitz) -> f64 {
    let (mu, nu, e) = (params.mu, params.nu, params.eps_h);
    let e3 = e * e * e;
    let w2 = (1.0 + nu) * (1.0 + nu);
    [
        ratio(mu * mu * e, 24.0 * c.l0 * c.l0),
        ratio(2.0 * e3, 75.0 * c.l2 * c.l2),
        ratio(2.0 * e3, 5.0 * nu * nu * c.l2 * c.l2),
        ratio(2.0 * e3, 5.0 * w2 * c.l2 * c.l2),
        ratio(mu * mu * e3, 40.0 * w2 * c.l1 * c.l1 * c.l0 * c.l0),
        ratio(mu.powi(4) * e3, 1350.0 * w2 * c.l0.powi(6)),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// `min{σ₁, σ₂, σ₃}` over the procedures the configuration can take.
pub fn sigma_min(params: &IpmParams, c: Lipschitz) -> f64 {
    let mut s = sigma_primal(params, c);
    if !params.primal_only && params.nu > 0.0 {
        s = s.min(sigma_dual(params));
    }
    if params.negative_curvature {
        s = s.min(sigma_negcurv(params, c));
    }
    s
}

/// Backtracking search over `α ∈ {α₀βʲ}`.
///
/// `eval(α)` returns the achieved decrease `ψ(current) − ψ(trial)` together
/// with the trial state, or `None` when the trial point leaves the strictly
/// feasible region. The first `α` whose decrease reaches `target(α)` is
/// accepted; `α < alpha_floor` aborts with `LineSearchStall`.
pub fn backtrack_step<T>(
    mut eval: impl FnMut(f64) -> Option<(f64, T)>,
    alpha0: f64,
    target: impl Fn(f64) -> f64,
    beta: f64,
    alpha_floor: f64,
) -> Result<(f64, f64, T)> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(SolverError::InvalidInput(format!("alpha0 must be positive, got {alpha0}")));
    }
    let mut alpha = alpha0;
    while alpha >= alpha_floor {
        if let Some((decrease, state)) = eval(alpha) {
            if decrease >= target(alpha) {
                return Ok((alpha, decrease, state));
            }
        }
        alpha *= beta;
    }
    Err(SolverError::LineSearchStall {
        procedure: "backtracking".into(),
        alpha_floor,
    })
}

struct Stepped {
    next: Iterate,
    alpha: f64,
    merit_after: f64,
    sigma: Option<f64>,
    target: f64,
    step_norm: f64,
    step_cap: f64,
}

fn stall(procedure: Procedure, err: SolverError) -> SolverError {
    match err {
        SolverError::LineSearchStall { alpha_floor, .. } => SolverError::LineSearchStall {
            procedure: procedure.as_str().into(),
            alpha_floor,
        },
        e => e,
    }
}

/// Merit decrease from `from` to the trial point, or `None` if the point is
/// not strictly interior.
fn trial<P: NsdpProblem + ?Sized>(
    prob: &P,
    from: &Iterate,
    built: Result<Iterate>,
    mp: &MeritParams,
) -> Result<Option<(f64, Iterate)>> {
    match built {
        Ok(it) => Ok(Some((merit_decrease(prob, from, &it, mp)?, it))),
        Err(SolverError::DomainViolation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn line_search<P: NsdpProblem + ?Sized>(
    prob: &P,
    params: &IpmParams,
    procedure: Procedure,
    from: &Iterate,
    alpha0: f64,
    target: impl Fn(f64) -> f64,
    build: impl Fn(f64) -> Result<Iterate>,
) -> Result<(f64, f64, Iterate)> {
    let StepMode::Backtracking { beta, alpha_floor } = params.step_mode else {
        unreachable!("line search only runs in backtracking mode");
    };
    let mp = params.merit();
    let mut failure = None;
    let found = backtrack_step(
        |alpha| match trial(prob, from, build(alpha), &mp) {
            Ok(Some((dec, it))) => Some((dec, it)),
            Ok(None) => None,
            Err(e) => {
                failure.get_or_insert(e);
                None
            }
        },
        alpha0,
        &target,
        beta,
        alpha_floor * alpha0,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (alpha, dec, it) = found.map_err(|e| stall(procedure, e))?;
    Ok((alpha, dec, it))
}

fn dual_step<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
    scaling: &S,
    probe: &Probe,
) -> Result<Stepped> {
    let mp = params.merit();
    let d = scaling
        .apply_z(&probe.grad_z)
        .scale(-params.kappa_min / (params.kappa_max * params.kappa_max));
    let d_norm = d.frobenius_norm();
    let cap = it.z_spectrum().min() / 2.0;
    let g2 = probe.grad_z.frobenius_norm().powi(2);
    let coef = params.kappa_min.powi(2) / (2.0 * params.kappa_max.powi(2));
    let build = |alpha: f64| it.with_z(it.z().add_scaled(alpha, &d));
    match params.step_mode {
        StepMode::FixedLipschitz => {
            let alpha = (1.0 / local_lipschitz_z(it, &mp)).min(cap / d_norm);
            let next = build(alpha)?;
            Ok(Stepped {
                merit_after: probe.value - merit_decrease(prob, it, &next, &mp)?,
                next,
                alpha,
                sigma: Some(sigma_dual(params)),
                target: alpha * coef * g2,
                step_norm: alpha * d_norm,
                step_cap: cap,
            })
        }
        StepMode::Backtracking { .. } => {
            let alpha0 = cap / d_norm;
            let (alpha, dec, next) = line_search(
                prob,
                params,
                Procedure::DualGrad,
                it,
                alpha0,
                |a| a * coef * g2,
                build,
            )?;
            Ok(Stepped {
                next,
                alpha,
                merit_after: probe.value - dec,
                sigma: None,
                target: alpha * coef * g2,
                step_norm: alpha * d_norm,
                step_cap: cap,
            })
        }
    }
}

fn primal_iterate<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
    x: Vector,
) -> Result<Iterate> {
    if params.primal_only {
        Iterate::on_central_path(prob, x, params.mu)
    } else {
        it.with_x(prob, x)
    }
}

fn primal_step<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
    scaling: &S,
    probe: &Probe,
    constants: Option<Lipschitz>,
) -> Result<Stepped> {
    let mp = params.merit();
    let d = scaling
        .apply_x(&probe.grad_x)
        .scale(-params.h_min / (params.h_max * params.h_max));
    let d_norm = d.norm();
    let cap = it.x_spectrum().min() / (2.0 * IpmParams::cap_l0(constants));
    let g2 = probe.grad_x.norm_squared();
    let coef = params.h_min.powi(2) / (2.0 * params.h_max.powi(2));
    let build = |alpha: f64| primal_iterate(prob, it, params, it.x() + &d * alpha);
    match params.step_mode {
        StepMode::FixedLipschitz => {
            let c = constants.ok_or(SolverError::ConstantsRequired)?;
            let alpha = (cap / d_norm).min(1.0 / local_lipschitz_x(it, &mp, Some(c))?);
            let next = build(alpha)?;
            Ok(Stepped {
                merit_after: probe.value - merit_decrease(prob, it, &next, &mp)?,
                next,
                alpha,
                sigma: Some(sigma_primal(params, c)),
                target: alpha * coef * g2,
                step_norm: alpha * d_norm,
                step_cap: cap,
            })
        }
        StepMode::Backtracking { .. } => {
            let (alpha, dec, next) = line_search(
                prob,
                params,
                Procedure::PrimalGrad,
                it,
                cap / d_norm,
                |a| a * coef * g2,
                build,
            )?;
            Ok(Stepped {
                next,
                alpha,
                merit_after: probe.value - dec,
                sigma: None,
                target: alpha * coef * g2,
                step_norm: alpha * d_norm,
                step_cap: cap,
            })
        }
    }
}

fn negcurv_step<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
    probe: &Probe,
    constants: Option<Lipschitz>,
) -> Result<Stepped> {
    let mp = params.merit();
    let hess = probe.hessian.as_ref().expect("curvature trigger evaluated the Hessian");
    let lmin = hess.min();
    let mut d = hess.min_vector();
    if d.dot(&probe.grad_x) > 0.0 {
        d = -d;
    }
    let cap = it.x_spectrum().min() / (2.0 * IpmParams::cap_l0(constants));
    let target = |a: f64| -a * a * lmin / 6.0;
    let build = |alpha: f64| primal_iterate(prob, it, params, it.x() + &d * alpha);
    match params.step_mode {
        StepMode::FixedLipschitz => {
            let c = constants.ok_or(SolverError::ConstantsRequired)?;
            let alpha = (-2.0 * lmin / local_lipschitz_xx(it, &mp, Some(c))?).min(cap);
            let next = build(alpha)?;
            Ok(Stepped {
                merit_after: probe.value - merit_decrease(prob, it, &next, &mp)?,
                next,
                alpha,
                sigma: Some(sigma_negcurv(params, c)),
                target: target(alpha),
                step_norm: alpha,
                step_cap: cap,
            })
        }
        StepMode::Backtracking { .. } => {
            let (alpha, dec, next) = line_search(
                prob,
                params,
                Procedure::NegCurvature,
                it,
                cap,
                target,
                build,
            )?;
            Ok(Stepped {
                next,
                alpha,
                merit_after: probe.value - dec,
                sigma: None,
                target: target(alpha),
                step_norm: alpha,
                step_cap: cap,
            })
        }
    }
}

fn record<P: NsdpProblem + ?Sized>(
    prob: &P,
    iter: usize,
    procedure: Procedure,
    probe: &Probe,
    s: &Stepped,
) -> StepRecord {
    StepRecord {
        iter,
        procedure,
        alpha: s.alpha,
        merit_before: probe.value,
        merit_after: s.merit_after,
        guaranteed_sigma: s.sigma,
        target_decrease: s.target,
        residuals: probe.residuals(),
        step_norm: s.step_norm,
        step_cap: s.step_cap,
        objective_after: prob.objective(s.next.x()),
    }
}

fn prepare<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
) -> Result<(Probe, Option<Lipschitz>)> {
    params.validate()?;
    let constants = params.constants(prob)?;
    Ok((Probe::new(prob, it, &params.merit())?, constants))
}

/// Scaled dual gradient step. Requires `‖∇_Zψ‖_F > ε_μ(1 + μ‖Z⁻¹‖_F)`.
pub fn update1_dual<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
    scaling: &S,
) -> Result<(Iterate, StepRecord)> {
    let (probe, _) = prepare(prob, it, params)?;
    if params.nu == 0.0 || !probe.dual_trigger(params) {
        return Err(SolverError::PreconditionViolated(
            "dual step requires ||grad_Z psi|| > eps_mu (1 + mu ||Z^-1||)".into(),
        ));
    }
    let s = dual_step(prob, it, params, scaling, &probe)?;
    let rec = record(prob, 0, Procedure::DualGrad, &probe, &s);
    Ok((s.next, rec))
}

/// Scaled primal gradient step. Requires
/// `‖∇ₓψ‖ > ε_g(1 + μ‖X⁻¹‖_F + ‖Z‖_F)`.
pub fn update2_primal<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
    scaling: &S,
) -> Result<(Iterate, StepRecord)> {
    let (probe, constants) = prepare(prob, it, params)?;
    if !probe.primal_trigger(params) {
        return Err(SolverError::PreconditionViolated(
            "primal step requires ||grad_x psi|| > eps_g (1 + mu ||X^-1|| + ||Z||)".into(),
        ));
    }
    let s = primal_step(prob, it, params, scaling, &probe, constants)?;
    let rec = record(prob, 0, Procedure::PrimalGrad, &probe, &s);
    Ok((s.next, rec))
}

/// Negative-curvature step along the eigenvector of `λ_min(∇²ₓₓψ)`.
/// Requires `λ_min(∇²ₓₓψ) < −ε_H(1 + μ‖X⁻¹‖_F + ‖Z‖_F)²`.
pub fn update3_negcurv<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
) -> Result<(Iterate, StepRecord)> {
    let (mut probe, constants) = prepare(prob, it, params)?;
    if !probe.curvature_trigger(prob, it, params)? {
        return Err(SolverError::PreconditionViolated(
            "negative-curvature step requires lambda_min(hess psi) < -eps_H scale^2".into(),
        ));
    }
    let s = negcurv_step(prob, it, params, &probe, constants)?;
    let rec = record(prob, 0, Procedure::NegCurvature, &probe, &s);
    Ok((s.next, rec))
}

/// Runs the inner method from `start`.
pub fn run_inner<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start: Iterate,
    params: &IpmParams,
    scaling: &S,
) -> Result<InnerOutcome> {
    run_inner_observed(prob, start, params, scaling, |_, _, _| {})
}

/// [`run_inner`] that calls `observe(before, after, record)` for every
/// accepted step.
pub fn run_inner_observed<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start: Iterate,
    params: &IpmParams,
    scaling: &S,
    mut observe: impl FnMut(&Iterate, &Iterate, &StepRecord),
) -> Result<InnerOutcome> {
    params.validate()?;
    let constants = params.constants(prob)?;
    let mp = params.merit();
    let mut it = if params.primal_only {
        Iterate::on_central_path(prob, start.x().clone(), params.mu)?
    } else {
        start
    };
    let mut trace = Vec::new();
    for iter in 0.. {
        let mut probe = Probe::new(prob, &it, &mp)?;
        let mut chosen = None;
        for proc in params.order {
            let fires = match proc {
                Procedure::DualGrad => !params.primal_only && probe.dual_trigger(params),
                Procedure::PrimalGrad => probe.primal_trigger(params),
                Procedure::NegCurvature => {
                    params.negative_curvature && probe.curvature_trigger(prob, &it, params)?
                }
            };
            if fires {
                chosen = Some(proc);
                break;
            }
        }
        let Some(proc) = chosen else {
            return Ok(InnerOutcome {
                residuals: probe.residuals(),
                iterate: it,
                trace,
                status: InnerStatus::Converged,
            });
        };
        if iter >= params.max_inner_iters {
            return Ok(InnerOutcome {
                residuals: probe.residuals(),
                iterate: it,
                trace,
                status: InnerStatus::IterLimit,
            });
        }
        let stepped = match proc {
            Procedure::DualGrad => dual_step(prob, &it, params, scaling, &probe)?,
            Procedure::PrimalGrad => primal_step(prob, &it, params, scaling, &probe, constants)?,
            Procedure::NegCurvature => negcurv_step(prob, &it, params, &probe, constants)?,
        };
        let rec = record(prob, iter, proc, &probe, &stepped);
        observe(&it, &stepped.next, &rec);
        trace.push(rec);
        it = stepped.next;
    }
    unreachable!("inner loop returns from within")
}
