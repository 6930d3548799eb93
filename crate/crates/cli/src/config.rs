//! Run configuration: a TOML document with one section per module, merged
//! under command-line flags.
//!
//! ```toml
//! [problem]
//! kind = "psf"        # psf | scalar | file
//! m = 5
//! n = 5
//! q = 4
//! r = 0.3
//! seed = 1
//! radius = 1.0        # box for fixed-step Lipschitz constants (psf, file)
//!
//! [solver]
//! method = "pdipm"    # pdipm | primal | pdipm-no-nc
//! step_mode = "backtracking"
//!
//! [schedule]
//! total_inner_budget = 300
//!
//! [output]
//! trace = "run.jsonl"
//! summary = "run.json"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use ncsdp::benchmarks::PsfConfig;
use ncsdp::inner::StepMode;
use ncsdp::{default_schedule, IpmParams, Method, Schedule};

pub const SEED_ENV: &str = "NC_SDP_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Psf,
    Scalar,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Backtracking,
    Fixed,
}

/// Fills every `None` field of `self` from `file`.
macro_rules! merge_fields {
    ($self:ident, $file:ident, $($f:ident),+) => {
        Self { $($f: $self.$f.or($file.$f)),+ }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemOpts {
    #[arg(long, value_enum)]
    #[serde(rename = "kind")]
    pub problem: Option<ProblemKind>,
    /// Rows of the PSF data matrix.
    #[arg(long)]
    pub m: Option<usize>,
    /// Columns of the PSF data matrix.
    #[arg(long)]
    pub n: Option<usize>,
    /// Factor order.
    #[arg(long)]
    pub q: Option<usize>,
    /// Spectral shift.
    #[arg(long)]
    pub r: Option<f64>,
    /// Falls back to the file, then to NC_SDP_SEED, then to 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cost of the scalar problem `min c·x, x ≥ 0`.
    #[arg(long)]
    pub c: Option<f64>,
    /// Instance file for `--problem file`.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Ball radius on which PSF Lipschitz constants are computed.
    #[arg(long)]
    pub radius: Option<f64>,
}

impl ProblemOpts {
    fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, problem, m, n, q, r, seed, c, path, radius)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOpts {
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub step_mode: Option<StepKind>,
    #[arg(long)]
    pub max_inner_iters: Option<usize>,
    /// Backtracking shrink factor.
    #[arg(long)]
    pub beta: Option<f64>,
}

impl SolverOpts {
    fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, method, step_mode, max_inner_iters, beta)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleOpts {
    #[arg(long)]
    pub mu_init: Option<f64>,
    #[arg(long)]
    pub mu_min: Option<f64>,
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
    /// Cap on inner steps summed over all outer iterations.
    #[arg(long = "max-outer-iterations-as-total")]
    #[serde(rename = "total_inner_budget")]
    pub total_inner_budget: Option<usize>,
}

impl ScheduleOpts {
    fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, mu_init, mu_min, max_outer_iters, total_inner_budget)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOpts {
    /// JSON-lines trace, one record per inner step.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Summary JSON; printed to stdout when absent.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Comparison table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Directory for per-run plot data.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
    /// Verification report; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl OutputOpts {
    fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, trace, summary, csv, plot_dir, report)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareOpts {
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
}

impl CompareOpts {
    fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, seeds, methods)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOpts {
    /// Sampled iterates for the derivative and identity checks.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Random pairs for the Lipschitz bounds.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Fixed-step inner iterations audited for guaranteed decrease.
    #[arg(long)]
    pub fixed_steps: Option<usize>,
    /// Adds this bias to the first gradient component (negative control).
    #[arg(long)]
    pub corrupt_gradient: Option<f64>,
}

impl VerifyOpts {
    fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, samples, pairs, fixed_steps, corrupt_gradient)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub problem: ProblemOpts,
    #[serde(default)]
    pub solver: SolverOpts,
    #[serde(default)]
    pub schedule: ScheduleOpts,
    #[serde(default)]
    pub output: OutputOpts,
    #[serde(default)]
    pub compare: CompareOpts,
    #[serde(default)]
    pub verify: VerifyOpts,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: ncsdp::SolverError| e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Psf { config: PsfConfig, radius: Option<f64> },
    Scalar { c: f64 },
    File { path: PathBuf, config: PsfConfig, radius: Option<f64> },
}

/// Fully resolved and validated settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub seed: u64,
    pub method: Method,
    pub schedule: Schedule,
    pub params: IpmParams,
    pub output: OutputOpts,
    pub compare: CompareOpts,
    pub verify: VerifyOpts,
}

pub struct Layers {
    pub problem: ProblemOpts,
    pub solver: SolverOpts,
    pub schedule: ScheduleOpts,
    pub output: OutputOpts,
    pub compare: CompareOpts,
    pub verify: VerifyOpts,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not a seed"))?)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

impl RunConfig {
    pub fn resolve(flags: Layers, file: FileConfig) -> Result<Self> {
        let p = flags.problem.merge(file.problem);
        let s = flags.solver.merge(file.solver);
        let sch = flags.schedule.merge(file.schedule);
        let seed = match p.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(0),
        };
        let psf = PsfConfig {
            m_rows: p.m.unwrap_or(5),
            n_cols: p.n.unwrap_or(5),
            q: p.q.unwrap_or(4),
            r: p.r.unwrap_or(0.3),
            seed,
        };
        if let Some(radius) = p.radius {
            if !(radius > 0.0 && radius.is_finite()) {
                bail!("radius must be positive, got {radius}");
            }
        }
        let problem = match p.problem.unwrap_or(ProblemKind::Psf) {
            ProblemKind::Psf => {
                psf.validate()?;
                ProblemSpec::Psf { config: psf, radius: p.radius }
            }
            ProblemKind::Scalar => {
                let c = p.c.unwrap_or(1.0);
                ncsdp::benchmarks::analytic_scalar_problem(c)?;
                ProblemSpec::Scalar { c }
            }
            ProblemKind::File => {
                let path = p.path.context("--problem file needs --path")?;
                ProblemSpec::File { path, config: psf, radius: p.radius }
            }
        };

        let mut schedule = default_schedule();
        schedule.mu_init = sch.mu_init.unwrap_or(schedule.mu_init);
        schedule.mu_min = sch.mu_min.unwrap_or(schedule.mu_min);
        schedule.max_outer_iters = sch.max_outer_iters.unwrap_or(schedule.max_outer_iters);
        schedule.total_inner_budget = sch.total_inner_budget.or(schedule.total_inner_budget);
        schedule.validate()?;

        let mut params = IpmParams::default();
        params.max_inner_iters = s.max_inner_iters.unwrap_or(params.max_inner_iters);
        params.step_mode = match s.step_mode.unwrap_or(StepKind::Backtracking) {
            StepKind::Fixed => StepMode::FixedLipschitz,
            StepKind::Backtracking => match (StepMode::backtracking(), s.beta) {
                (StepMode::Backtracking { alpha_floor, .. }, Some(beta)) => {
                    StepMode::Backtracking { beta, alpha_floor }
                }
                (mode, _) => mode,
            },
        };
        params.validate()?;

        Ok(Self {
            problem,
            seed,
            method: s.method.unwrap_or(Method::Pdipm),
            schedule,
            params,
            output: flags.output.merge(file.output),
            compare: flags.compare.merge(file.compare),
            verify: flags.verify.merge(file.verify),
        })
    }
}
