//! Path-following outer loop: drives `μ`, `ν(μ)` and the tolerances
//! `ε(μ)` to zero and warm-starts each inner solve at the previous output.

use serde::{Deserialize, Serialize};

use crate::certificates::{
    fj_scaled_multipliers, kkt_residuals, wsosp_curvature_check, KktResiduals,
    RestrictedCurvature, DEFAULT_RANK_TOL,
};
use crate::error::{Result, SolverError};
use crate::inner::{
    run_inner_observed, sosp_residuals, InnerStatus, IpmParams, Procedure, Residuals, StepRecord,
};
use crate::merit::{lambda_surrogate, merit_value};
use crate::problem::{Iterate, NsdpProblem};
use crate::scaling::Scaling;

/// `coef · μ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub const fn new(coef: f64, exponent: f64) -> Self {
        Self { coef, exponent }
    }

    pub fn eval(&self, mu: f64) -> f64 {
        self.coef * mu.powf(self.exponent)
    }
}

/// `μ' = min(factor·μ, coef·μ^exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuUpdate {
    pub factor: f64,
    pub coef: f64,
    pub exponent: f64,
}

impl MuUpdate {
    pub fn next(&self, mu: f64) -> f64 {
        (self.factor * mu).min(self.coef * mu.powf(self.exponent))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NuRule {
    PowerLaw { coef: f64, exponent: f64 },
    /// Constant weight, for comparison against fixed-weight methods.
    Fixed { value: f64 },
}

impl NuRule {
    pub fn eval(&self, mu: f64) -> f64 {
        match *self {
            NuRule::PowerLaw { coef, exponent } => PowerLaw::new(coef, exponent).eval(mu),
            NuRule::Fixed { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mu_init: f64,
    pub mu_update: MuUpdate,
    pub nu: NuRule,
    pub eps_g: PowerLaw,
    pub eps_mu: PowerLaw,
    pub eps_h: PowerLaw,
    pub mu_min: f64,
    pub max_outer_iters: usize,
    /// Cap on inner steps summed over all outer iterations.
    pub total_inner_budget: Option<usize>,
}

impl Default for Schedule {
    fn default() -> Self {
        default_schedule()
    }
}

/// `μ₁ = 0.3`, `μ' = min(0.8μ, 10μ^1.5)`, `ν = μ^0.1`, `ε_g = ε_H = μ`,
/// `ε_μ = μ^1.2`, stopping at `μ ≤ 1e-8` or after 60 outer iterations.
pub fn default_schedule() -> Schedule {
    Schedule {
        mu_init: 0.3,
        mu_update: MuUpdate { factor: 0.8, coef: 10.0, exponent: 1.5 },
        nu: NuRule::PowerLaw { coef: 1.0, exponent: 0.1 },
        eps_g: PowerLaw::new(1.0, 1.0),
        eps_mu: PowerLaw::new(1.0, 1.2),
        eps_h: PowerLaw::new(1.0, 1.0),
        mu_min: 1e-8,
        max_outer_iters: 60,
        total_inner_budget: None,
    }
}

const ADMISSIBILITY_SAMPLES: [f64; 4] = [0.3, 0.1, 0.01, 1e-4];

impl Schedule {
    /// Checks `μ_init > 0`, that the update strictly decreases `μ`, and that
    /// `ν, ε_g, ε_μ, ε_H` are finite, positive and increasing in `μ` at
    /// sample points. A fixed `ν` only has to be finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SolverError::InvalidInput(format!("schedule: {m}")));
        if !(self.mu_init > 0.0 && self.mu_init.is_finite()) {
            return bad(format!("mu_init must be positive, got {}", self.mu_init));
        }
        if !(self.mu_min >= 0.0) {
            return bad(format!("mu_min must be nonnegative, got {}", self.mu_min));
        }
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters must be positive".into());
        }
        for mu in ADMISSIBILITY_SAMPLES.into_iter().chain([self.mu_init]) {
            let next = self.mu_update.next(mu);
            if !(next > 0.0 && next < mu) {
                return bad(format!("mu update maps {mu} to {next}, not into (0, mu)"));
            }
        }
        let mut rules: Vec<(&str, Box<dyn Fn(f64) -> f64 + '_>)> = vec![
            ("eps_g", Box::new(|m| self.eps_g.eval(m))),
            ("eps_mu", Box::new(|m| self.eps_mu.eval(m))),
            ("eps_h", Box::new(|m| self.eps_h.eval(m))),
        ];
        match self.nu {
            NuRule::Fixed { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return bad(format!("fixed nu must be finite and nonnegative, got {value}"));
                }
            }
            rule => rules.push(("nu", Box::new(move |m| rule.eval(m)))),
        }
        for (name, rule) in &rules {
            let values: Vec<f64> = ADMISSIBILITY_SAMPLES.iter().map(|&m| rule(m)).collect();
            if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad(format!("{name} is not finite and positive at {ADMISSIBILITY_SAMPLES:?}"));
            }
            if values.windows(2).any(|w| !(w[1] < w[0])) {
                return bad(format!("{name} does not decrease with mu"));
            }
        }
        Ok(())
    }

    /// Inner parameters at `μ`, inheriting everything else from `base`.
    pub fn params_at(&self, mu: f64, base: &IpmParams) -> IpmParams {
        IpmParams {
            mu,
            nu: if base.primal_only { 0.0 } else { self.nu.eval(mu) },
            eps_g: self.eps_g.eval(mu),
            eps_mu: self.eps_mu.eval(mu),
            eps_h: self.eps_h.eval(mu),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcedureCounts {
    pub dual_grad: usize,
    pub primal_grad: usize,
    pub neg_curvature: usize,
}

impl ProcedureCounts {
    pub fn add(&mut self, p: Procedure) {
        match p {
            Procedure::DualGrad => self.dual_grad += 1,
            Procedure::PrimalGrad => self.primal_grad += 1,
            Procedure::NegCurvature => self.neg_curvature += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.dual_grad + self.primal_grad + self.neg_curvature
    }

    pub fn merge(&mut self, other: &ProcedureCounts) {
        self.dual_grad += other.dual_grad;
        self.primal_grad += other.primal_grad;
        self.neg_curvature += other.neg_curvature;
    }
}

/// Summary of one outer iteration, evaluated at the inner solver's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub mu: f64,
    pub nu: f64,
    pub eps_g: f64,
    pub eps_mu: f64,
    pub eps_h: f64,
    pub inner_iters: usize,
    pub inner_status: InnerStatus,
    pub counts: ProcedureCounts,
    pub merit: f64,
    pub objective: f64,
    pub residuals: Residuals,
    pub kkt: KktResiduals,
    pub fj_lambda: f64,
    pub fj_omega_norm: f64,
    pub fj_scaled_stationarity: f64,
    /// `‖μX⁻¹ − Z‖_F`.
    pub central_gap: f64,
    /// `‖Λ − Z‖_F`.
    pub multiplier_gap: f64,
    /// `‖Z − μX⁻¹‖_F / (1 + μ‖X⁻¹‖_F)`.
    pub z_sync_error: f64,
    /// `ε_μ/(νμ)`; absent when `ν = 0`.
    pub eps_mu_over_nu_mu: Option<f64>,
    pub restricted_curvature: RestrictedCurvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterStatus {
    Converged,
    PartialProgress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MuMin,
    MaxOuterIters,
    InnerIterLimit,
    InnerBudget,
}

impl StopReason {
    pub fn status(&self) -> OuterStatus {
        match self {
            StopReason::MuMin | StopReason::MaxOuterIters => OuterStatus::Converged,
            StopReason::InnerIterLimit | StopReason::InnerBudget => OuterStatus::PartialProgress,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OuterOutcome {
    pub iterate: Iterate,
    pub trace: Vec<OuterRecord>,
    pub status: OuterStatus,
    pub stop: StopReason,
    /// Final inner parameters, `None` if no inner solve ran.
    pub last_params: Option<IpmParams>,
}

impl OuterOutcome {
    pub fn counts(&self) -> ProcedureCounts {
        let mut c = ProcedureCounts::default();
        for r in &self.trace {
            c.merge(&r.counts);
        }
        c
    }
}

/// Where an inner step happened within the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub k: usize,
    pub mu: f64,
    pub nu: f64,
}

pub fn outer_record<P: NsdpProblem + ?Sized>(
    prob: &P,
    it: &Iterate,
    params: &IpmParams,
    k: usize,
    trace: &[StepRecord],
    inner_status: InnerStatus,
) -> Result<OuterRecord> {
    let mp = params.merit();
    let mut counts = ProcedureCounts::default();
    for r in trace {
        counts.add(r.procedure);
    }
    let lambda = lambda_surrogate(it, &mp);
    let fj = fj_scaled_multipliers(prob, it, &mp)?;
    let central = it.x_inv().scale(params.mu);
    let central_gap = (&central - it.z()).frobenius_norm();
    Ok(OuterRecord {
        k,
        mu: params.mu,
        nu: params.nu,
        eps_g: params.eps_g,
        eps_mu: params.eps_mu,
        eps_h: params.eps_h,
        inner_iters: trace.len(),
        inner_status,
        counts,
        merit: merit_value(prob, it, &mp)?,
        objective: prob.objective(it.x()),
        residuals: sosp_residuals(prob, it, params)?,
        kkt: kkt_residuals(prob, it.x(), &lambda)?,
        fj_lambda: fj.lambda_k,
        fj_omega_norm: fj.omega_k.frobenius_norm(),
        fj_scaled_stationarity: fj.scaled_stationarity,
        central_gap,
        multiplier_gap: (&lambda - it.z()).frobenius_norm(),
        z_sync_error: central_gap / (1.0 + params.mu * it.x_spectrum().inverse_frobenius_norm()),
        eps_mu_over_nu_mu: (params.nu > 0.0).then(|| params.eps_mu / (params.nu * params.mu)),
        restricted_curvature: wsosp_curvature_check(prob, it.x(), &lambda, DEFAULT_RANK_TOL)?,
    })
}

pub fn run_outer<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start: Iterate,
    schedule: &Schedule,
    base: &IpmParams,
    scaling: &S,
) -> Result<OuterOutcome> {
    run_outer_observed(prob, start, schedule, base, scaling, |_, _, _, _| {})
}

/// [`run_outer`] that reports every accepted inner step as
/// `observe(context, before, after, record)`.
pub fn run_outer_observed<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start: Iterate,
    schedule: &Schedule,
    base: &IpmParams,
    scaling: &S,
    mut observe: impl FnMut(&StepContext, &Iterate, &Iterate, &StepRecord),
) -> Result<OuterOutcome> {
    schedule.validate()?;
    let mut mu = schedule.mu_init;
    let mut it = start;
    let mut remaining = schedule.total_inner_budget;
    let mut trace = Vec::new();
    let mut last_params = None;
    let mut stop = StopReason::MaxOuterIters;
    for k in 1..=schedule.max_outer_iters {
        let mu_next = schedule.mu_update.next(mu);
        if mu_next <= schedule.mu_min {
            stop = StopReason::MuMin;
            break;
        }
        let mut params = schedule.params_at(mu_next, base);
        let mut budget_bound = false;
        if let Some(rem) = remaining {
            if rem == 0 {
                stop = StopReason::InnerBudget;
                break;
            }
            if rem < params.max_inner_iters {
                params.max_inner_iters = rem;
                budget_bound = true;
            }
        }
        let ctx = StepContext { k, mu: params.mu, nu: params.nu };
        let out = run_inner_observed(prob, it, &params, scaling, |b, a, r| observe(&ctx, b, a, r))?;
        if let Some(rem) = remaining.as_mut() {
            *rem -= out.trace.len();
        }
        trace.push(outer_record(prob, &out.iterate, &params, k, &out.trace, out.status)?);
        it = out.iterate;
        mu = mu_next;
        last_params = Some(params);
        if out.status == InnerStatus::IterLimit {
            stop = if budget_bound { StopReason::InnerBudget } else { StopReason::InnerIterLimit };
            break;
        }
    }
    Ok(OuterOutcome {
        iterate: it,
        trace,
        status: stop.status(),
        stop,
        last_params,
    })
}
