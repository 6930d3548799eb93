//! Method selection and the seed-by-method comparison behind the
//! negative-curvature ablation on PSF.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::benchmarks::{generate_psf, psf_as_nsdp, psf_initial_point, PsfConfig};
use crate::error::{Result, SolverError};
use crate::exec::Execution;
use crate::inner::{IpmParams, Procedure, StepRecord};
use crate::outer::{run_outer_observed, OuterOutcome, OuterStatus, Schedule, StepContext, StopReason};
use crate::primal::run_outer_primal_observed;
use crate::problem::{Iterate, NsdpProblem};
use crate::scaling::Scaling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Primal-dual method with all three procedures.
    Pdipm,
    /// `ν ≡ 0` variant with `Z = μX⁻¹`.
    Primal,
    /// Primal-dual method without the negative-curvature procedure.
    PdipmNoNc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pdipm => "pdipm",
            Method::Primal => "primal",
            Method::PdipmNoNc => "pdipm-no-nc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SolverError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pdipm" => Ok(Method::Pdipm),
            "primal" => Ok(Method::Primal),
            "pdipm-no-nc" => Ok(Method::PdipmNoNc),
            other => Err(SolverError::InvalidInput(format!(
                "unknown method {other:?}; expected pdipm, primal or pdipm-no-nc"
            ))),
        }
    }
}

/// Runs `method` from `start`. The primal variant keeps `start`'s `x` and
/// resets `Z` onto the central path.
pub fn run_method_observed<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start: Iterate,
    method: Method,
    schedule: &Schedule,
    base: &IpmParams,
    scaling: &S,
    observe: impl FnMut(&StepContext, &Iterate, &Iterate, &StepRecord),
) -> Result<OuterOutcome> {
    match method {
        Method::Pdipm => run_outer_observed(prob, start, schedule, base, scaling, observe),
        Method::PdipmNoNc => {
            let base = IpmParams { negative_curvature: false, ..base.clone() };
            run_outer_observed(prob, start, schedule, &base, scaling, observe)
        }
        Method::Primal => {
            run_outer_primal_observed(prob, start.x().clone(), schedule, base, scaling, observe)
        }
    }
}

pub fn run_method<P: NsdpProblem + ?Sized, S: Scaling + ?Sized>(
    prob: &P,
    start: Iterate,
    method: Method,
    schedule: &Schedule,
    base: &IpmParams,
    scaling: &S,
) -> Result<OuterOutcome> {
    run_method_observed(prob, start, method, schedule, base, scaling, |_, _, _, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    /// Inner steps taken so far, over all outer iterations.
    pub iteration: usize,
    pub f: f64,
    pub procedure: Procedure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRun {
    pub seed: u64,
    pub method: Method,
    pub nc_count: usize,
    pub final_f: f64,
    /// Seconds.
    pub wall_time: f64,
    pub status: OuterStatus,
    pub stop: StopReason,
    pub plot: Vec<PlotPoint>,
}

/// Every method on the PSF instance of every seed, `shape.seed` ignored.
/// Runs are independent and may execute in parallel; results come back in
/// seed-major, method-minor order.
pub fn compare_psf<S: Scaling + ?Sized>(
    shape: &PsfConfig,
    methods: &[Method],
    seeds: &[u64],
    schedule: &Schedule,
    base: &IpmParams,
    scaling: &S,
    exec: Execution,
) -> Result<Vec<CompareRun>> {
    shape.validate()?;
    schedule.validate()?;
    base.validate()?;
    let jobs: Vec<(u64, Method)> =
        seeds.iter().flat_map(|&s| methods.iter().map(move |&m| (s, m))).collect();
    exec.map(&jobs, |&(seed, method)| {
        let config = PsfConfig { seed, ..*shape };
        let prob = psf_as_nsdp(&generate_psf(&config)?, &config)?;
        let start = psf_initial_point(&prob, seed, schedule.mu_init)?;
        let mut plot = Vec::new();
        let clock = Instant::now();
        let out = run_method_observed(&prob, start, method, schedule, base, scaling, |_, _, _, rec| {
            plot.push(PlotPoint {
                iteration: plot.len() + 1,
                f: rec.objective_after,
                procedure: rec.procedure,
            });
        })?;
        Ok(CompareRun {
            seed,
            method,
            nc_count: out.counts().neg_curvature,
            final_f: prob.objective(out.iterate.x()),
            wall_time: clock.elapsed().as_secs_f64(),
            status: out.status,
            stop: out.stop,
            plot,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outer::default_schedule;
    use crate::scaling::IdentityScaling;

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Pdipm, Method::Primal, Method::PdipmNoNc] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("newton".parse::<Method>().is_err());
    }

    #[test]
    fn compare_shape_and_budget() {
        let shape = PsfConfig { m_rows: 3, n_cols: 3, q: 2, r: 0.3, seed: 0 };
        let schedule = Schedule { total_inner_budget: Some(20), ..default_schedule() };
        let runs = compare_psf(
            &shape,
            &[Method::Pdipm, Method::PdipmNoNc],
            &[1, 2],
            &schedule,
            &IpmParams::default(),
            &IdentityScaling,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(runs.len(), 4);
        assert_eq!((runs[0].seed, runs[0].method), (1, Method::Pdipm));
        assert_eq!((runs[3].seed, runs[3].method), (2, Method::PdipmNoNc));
        for r in &runs {
            assert!(r.plot.len() <= 20);
            assert_eq!(r.plot.iter().filter(|p| p.procedure == Procedure::NegCurvature).count(), r.nc_count);
        }
        assert!(runs.iter().filter(|r| r.method == Method::PdipmNoNc).all(|r| r.nc_count == 0));
        let again = compare_psf(
            &shape,
            &[Method::Pdipm, Method::PdipmNoNc],
            &[1, 2],
            &schedule,
            &IpmParams::default(),
            &IdentityScaling,
            Execution::Parallel,
        )
        .unwrap();
        for (a, b) in runs.iter().zip(&again) {
            assert_eq!(a.plot, b.plot);
        }
    }
}
