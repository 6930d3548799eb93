use std::fs::File;
use std::io::BufReader;

use anyhow::{Context, Result};

use ncsdp::benchmarks::{
    analytic_scalar_problem, generate_psf, psf_as_nsdp, psf_initial_point, read_instance,
    CorruptedGradient, PsfConfig, PsfProblem,
};
use ncsdp::{Iterate, NsdpProblem, Vector};

use crate::config::ProblemSpec;

pub struct Instance {
    pub prob: Box<dyn NsdpProblem>,
    pub start: Iterate,
    pub label: String,
}

fn boxed<P: NsdpProblem + 'static>(prob: P, bias: Option<f64>) -> Box<dyn NsdpProblem> {
    match bias {
        Some(bias) => Box::new(CorruptedGradient { inner: prob, bias }),
        None => Box::new(prob),
    }
}

fn finish_psf(
    prob: PsfProblem,
    config: &PsfConfig,
    radius: Option<f64>,
    mu_init: f64,
    bias: Option<f64>,
) -> Result<Instance> {
    let prob = match radius {
        Some(r) => {
            let c = prob.box_constants(r);
            prob.with_lipschitz(c)
        }
        None => prob,
    };
    let start = psf_initial_point(&prob, config.seed, mu_init)?;
    let label = format!("psf m={} n={} q={} r={}", config.m_rows, config.n_cols, config.q, config.r);
    Ok(Instance { prob: boxed(prob, bias), start, label })
}

/// Builds the problem and its starting point. `bias` wraps the problem in a
/// corrupted gradient.
pub fn build(spec: &ProblemSpec, mu_init: f64, bias: Option<f64>) -> Result<Instance> {
    match spec {
        ProblemSpec::Psf { config, radius } => {
            let prob = psf_as_nsdp(&generate_psf(config)?, config)?;
            finish_psf(prob, config, *radius, mu_init, bias)
        }
        ProblemSpec::File { path, config, radius } => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let inst = read_instance(BufReader::new(file))
                .with_context(|| format!("reading {}", path.display()))?;
            let config = PsfConfig { m_rows: inst.v.nrows(), n_cols: inst.v.ncols(), ..*config };
            let prob = psf_as_nsdp(&inst, &config)?;
            finish_psf(prob, &config, *radius, mu_init, bias)
        }
        ProblemSpec::Scalar { c } => {
            let prob = analytic_scalar_problem(*c)?;
            let start = Iterate::on_central_path(&prob, Vector::from_element(1, 1.0), mu_init)?;
            Ok(Instance { prob: boxed(prob, bias), start, label: format!("scalar c={c}") })
        }
    }
}
