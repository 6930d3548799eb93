use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use serde::Serialize;

use ncsdp::outer::ProcedureCounts;
use ncsdp::verify::{verify_problem, VerifyOptions, VerifyReport};
use ncsdp::{
    compare_psf, run_method_observed, Execution, IdentityScaling, Method, OuterRecord,
    OuterStatus, StepRecord, StopReason,
};

use crate::config::{ProblemSpec, RunConfig};
use crate::instance::build;
use crate::output::{csv_bytes, emit_json, write_atomic};

pub const EXIT_PARTIAL: u8 = 2;
pub const EXIT_CHECKS_FAILED: u8 = 3;

#[derive(Serialize)]
struct TraceLine<'a> {
    k: usize,
    mu: f64,
    nu: f64,
    #[serde(flatten)]
    step: &'a StepRecord,
}

#[derive(Serialize)]
struct Summary {
    problem: String,
    method: Method,
    seed: u64,
    status: OuterStatus,
    stop: StopReason,
    outer_iterations: usize,
    final_f: f64,
    final_psi: Option<f64>,
    counts: ProcedureCounts,
    wall_time: f64,
    /// Certificates at the returned iterate.
    certificates: Option<OuterRecord>,
    x: Vec<f64>,
}

pub fn solve(cfg: &RunConfig) -> Result<ExitCode> {
    let inst = build(&cfg.problem, cfg.schedule.mu_init, None)?;
    let mut trace = Vec::new();
    let mut line_err = None;
    let clock = Instant::now();
    let out = run_method_observed(
        inst.prob.as_ref(),
        inst.start,
        cfg.method,
        &cfg.schedule,
        &cfg.params,
        &IdentityScaling,
        |ctx, _, _, rec| {
            let line = TraceLine { k: ctx.k, mu: ctx.mu, nu: ctx.nu, step: rec };
            if let Err(e) = serde_json::to_writer(&mut trace, &line) {
                line_err.get_or_insert(e);
            }
            trace.push(b'\n');
        },
    )?;
    let wall_time = clock.elapsed().as_secs_f64();
    if let Some(e) = line_err {
        return Err(e.into());
    }
    if let Some(p) = &cfg.output.trace {
        write_atomic(p, &trace)?;
    }
    let last = out.trace.last().cloned();
    let summary = Summary {
        problem: inst.label,
        method: cfg.method,
        seed: cfg.seed,
        status: out.status,
        stop: out.stop,
        outer_iterations: out.trace.len(),
        final_f: inst.prob.objective(out.iterate.x()),
        final_psi: last.as_ref().map(|r| r.merit),
        counts: out.counts(),
        wall_time,
        certificates: last,
        x: out.iterate.x().iter().copied().collect(),
    };
    emit_json(&summary, cfg.output.summary.as_deref())?;
    Ok(match out.status {
        OuterStatus::Converged => ExitCode::SUCCESS,
        OuterStatus::PartialProgress => ExitCode::from(EXIT_PARTIAL),
    })
}

#[derive(Serialize)]
struct TableRow {
    seed: u64,
    method: Method,
    nc_count: usize,
    final_f: f64,
    wall_time: f64,
}

#[derive(Serialize)]
struct PlotRow {
    iteration: usize,
    f: f64,
    procedure: &'static str,
}

pub const DEFAULT_COMPARE_BUDGET: usize = 300;

pub fn compare(cfg: &RunConfig) -> Result<ExitCode> {
    let ProblemSpec::Psf { config, .. } = &cfg.problem else {
        bail!("compare runs on generated PSF instances only");
    };
    let seeds = cfg.compare.seeds.clone().unwrap_or_else(|| (1..=6).collect());
    let methods = cfg.compare.methods.clone().unwrap_or_else(|| vec![Method::Pdipm, Method::PdipmNoNc]);
    if seeds.is_empty() || methods.is_empty() {
        bail!("compare needs at least one seed and one method");
    }
    let mut schedule = cfg.schedule.clone();
    schedule.total_inner_budget = schedule.total_inner_budget.or(Some(DEFAULT_COMPARE_BUDGET));
    let runs = compare_psf(
        config,
        &methods,
        &seeds,
        &schedule,
        &cfg.params,
        &IdentityScaling,
        Execution::default(),
    )?;
    let table = csv_bytes(runs.iter().map(|r| TableRow {
        seed: r.seed,
        method: r.method,
        nc_count: r.nc_count,
        final_f: r.final_f,
        wall_time: r.wall_time,
    }))?;
    match &cfg.output.csv {
        Some(p) => write_atomic(p, &table)?,
        None => std::io::Write::write_all(&mut std::io::stdout(), &table)?,
    }
    if let Some(dir) = &cfg.output.plot_dir {
        for r in &runs {
            let rows = r.plot.iter().map(|p| PlotRow {
                iteration: p.iteration,
                f: p.f,
                procedure: p.procedure.as_str(),
            });
            write_atomic(&plot_path(dir, r.seed, r.method), &csv_bytes(rows)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn plot_path(dir: &Path, seed: u64, method: Method) -> std::path::PathBuf {
    dir.join(format!("seed{seed}-{method}.csv"))
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    problem: &'a str,
    passed: bool,
    #[serde(flatten)]
    report: &'a VerifyReport,
}

pub fn verify(cfg: &RunConfig) -> Result<ExitCode> {
    let inst = build(&cfg.problem, cfg.schedule.mu_init, cfg.verify.corrupt_gradient)?;
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        derivative_samples: cfg.verify.samples.unwrap_or(defaults.derivative_samples),
        lipschitz_pairs: cfg.verify.pairs.unwrap_or(defaults.lipschitz_pairs),
        fixed_steps: cfg.verify.fixed_steps.unwrap_or(defaults.fixed_steps),
        seed: cfg.seed,
        ..defaults
    };
    let report = verify_problem(inst.prob.as_ref(), &inst.start, &IdentityScaling, &opts, Execution::default())?;
    let passed = report.all_passed();
    emit_json(&VerifyOutput { problem: &inst.label, passed, report: &report }, cfg.output.report.as_deref())?;
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CHECKS_FAILED) })
}
