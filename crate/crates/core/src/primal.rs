//! Primal interior-point variant: `ν ≡ 0`, the dual variable is kept at
//! `Z = μX⁻¹` and only the primal gradient and negative-curvature
//! procedures run.

use crate::error::{Result, SolverError};
use crate::inner::{run_inner, InnerOutcome, IpmParams};
use crate::inner::StepRecord;
use crate::outer::{run_outer_observed, NuRule, OuterOutcome, Schedule, StepContext};
use crate::problem::{Iterate, NsdpProblem, Vector};
use crate::scaling::Scaling;

fn primal_params(params: &IpmParams) -> Result<IpmParams> {
    if params.nu != 0.0 {
        return Err(SolverError::InvalidInput(format!(
            "primal variant requires nu = 0, got {}",
            params.nu
        )));
    }
    Ok(IpmParams { primal_only: true, ..params.clone() })
}

pub fn run_inner_primal<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start_x: Vector,
    params: &IpmParams,
    scaling: &S,
) -> Result<InnerOutcome> {
    let params = primal_params(params)?;
    let start = Iterate::on_central_path(prob, start_x, params.mu)?;
    run_inner(prob, start, &params, scaling)
}

pub fn run_outer_primal<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start_x: Vector,
    schedule: &Schedule,
    base: &IpmParams,
    scaling: &S,
) -> Result<OuterOutcome> {
    run_outer_primal_observed(prob, start_x, schedule, base, scaling, |_, _, _, _| {})
}

/// [`run_outer_primal`] reporting every accepted step.
pub fn run_outer_primal_observed<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start_x: Vector,
    schedule: &Schedule,
    base: &IpmParams,
    scaling: &S,
    observe: impl FnMut(&StepContext, &Iterate, &Iterate, &StepRecord),
) -> Result<OuterOutcome> {
    let base = primal_params(&IpmParams { nu: 0.0, ..base.clone() })?;
    let schedule = Schedule { nu: NuRule::Fixed { value: 0.0 }, ..schedule.clone() };
    let start = Iterate::on_central_path(prob, start_x, schedule.mu_init)?;
    run_outer_observed(prob, start, &schedule, &base, scaling, observe)
}
