//! Shifted positive-semidefinite factorization (PSF):
//!
//! ```text
//!   min  Σᵢⱼ (Vᵢⱼ − ⟨Aᵢ, Bⱼ⟩)²
//!   s.t. Aᵢ + rI ⪰ 0,  Bⱼ + rI ⪰ 0
//! ```
//!
//! The factors are stacked as `x = (svec A₁, …, svec A_m, svec B₁, …, svec B_n)`
//! where `svec` scales off-diagonal entries by √2, so `⟨A, B⟩ = svec(A)ᵀsvec(B)`
//! and every coordinate direction of `X` has unit Frobenius norm. All blocks
//! are merged into one block-diagonal constraint of order `q(m + n)`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::linalg::SymMat;
use crate::problem::{Iterate, Lipschitz, NsdpProblem, Vector};

use super::rng_for;

const MAX_GENERATION_ATTEMPTS: usize = 1000;
const MAX_START_ATTEMPTS: usize = 1000;
const START_SPREAD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsfConfig {
    pub m_rows: usize,
    pub n_cols: usize,
    pub q: usize,
    pub r: f64,
    pub seed: u64,
}

impl PsfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_rows == 0 || self.n_cols == 0 || self.q == 0 {
            return Err(SolverError::InvalidInput(
                "m, n and q must be positive".into(),
            ));
        }
        if self.q >= self.m_rows.min(self.n_cols) {
            return Err(SolverError::InvalidInput(format!(
                "q = {} must be smaller than min(m, n) = {}",
                self.q,
                self.m_rows.min(self.n_cols)
            )));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(SolverError::InvalidInput(format!(
                "shift r must be positive, got {}",
                self.r
            )));
        }
        Ok(())
    }

    /// Variables per factor block, `q(q+1)/2`.
    pub fn block_len(&self) -> usize {
        self.q * (self.q + 1) / 2
    }

    pub fn n_var(&self) -> usize {
        self.block_len() * (self.m_rows + self.n_cols)
    }

    /// Eigenvalues reset to `−r` per factor: 20% of `q`, rounded to nearest.
    pub fn reset_count(&self) -> usize {
        (0.2 * self.q as f64).round() as usize
    }
}

/// Nonnegative data matrix together with the factors that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfInstance {
    pub v: DMatrix<f64>,
    pub ground_truth: Option<(Vec<SymMat>, Vec<SymMat>)>,
}

fn planted_factor(q: usize, resets: usize, r: f64, rng: &mut impl Rng) -> Result<SymMat> {
    let m = DMatrix::from_fn(q, q, |_, _| rng.gen::<f64>());
    let gram = SymMat::from_matrix(&m * m.transpose())?;
    let spec = gram.spectrum()?;
    let chosen = sample(rng, q, resets).into_vec();
    let values: Vec<f64> = (0..q)
        .map(|i| if chosen.contains(&i) { -r } else { spec.values()[i] })
        .collect();
    Ok(spec.map_indexed(|i| values[i]))
}

/// Draws planted factors, resets part of their spectra to `−r`, and forms
/// `Vᵢⱼ = ⟨A*ᵢ, B*ⱼ⟩`, repeating until `V ≥ 0` entrywise.
pub fn generate_psf(config: &PsfConfig) -> Result<PsfInstance> {
    config.validate()?;
    let mut rng = rng_for(config.seed, 0);
    let resets = config.reset_count();
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let a: Vec<SymMat> = (0..config.m_rows)
            .map(|_| planted_factor(config.q, resets, config.r, &mut rng))
            .collect::<Result<_>>()?;
        let b: Vec<SymMat> = (0..config.n_cols)
            .map(|_| planted_factor(config.q, resets, config.r, &mut rng))
            .collect::<Result<_>>()?;
        let v = DMatrix::from_fn(config.m_rows, config.n_cols, |i, j| a[i].inner(&b[j]));
        if v.iter().all(|&e| e >= 0.0 && e.is_finite()) {
            return Ok(PsfInstance {
                v,
                ground_truth: Some((a, b)),
            });
        }
    }
    Err(SolverError::GenerationFailed(format!(
        "no nonnegative V after {MAX_GENERATION_ATTEMPTS} attempts"
    )))
}

/// Writes `V` as a `psf-instance` text document: a header line, the
/// dimensions, then one row per line with 17 significant digits.
pub fn write_instance(inst: &PsfInstance, mut out: impl Write) -> std::io::Result<()> {
    let (rows, cols) = inst.v.shape();
    let mut text = format!("psf-instance\n{rows} {cols}\n");
    for i in 0..rows {
        let row: Vec<String> = (0..cols).map(|j| format!("{:.16e}", inst.v[(i, j)])).collect();
        let _ = writeln!(text, "{}", row.join(" "));
    }
    out.write_all(text.as_bytes())
}

pub fn read_instance(input: impl BufRead) -> Result<PsfInstance> {
    let bad = |msg: &str| SolverError::InvalidInput(format!("psf-instance: {msg}"));
    let mut tokens = Vec::new();
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty input"))?
        .map_err(|e| bad(&e.to_string()))?;
    if header.trim() != "psf-instance" {
        return Err(bad("missing header"));
    }
    for line in lines {
        let line = line.map_err(|e| bad(&e.to_string()))?;
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    if tokens.len() < 2 {
        return Err(bad("missing dimensions"));
    }
    let rows: usize = tokens[0].parse().map_err(|_| bad("bad row count"))?;
    let cols: usize = tokens[1].parse().map_err(|_| bad("bad column count"))?;
    if tokens.len() != 2 + rows * cols {
        return Err(bad(&format!(
            "expected {} entries, found {}",
            rows * cols,
            tokens.len() - 2
        )));
    }
    let vals: Vec<f64> = tokens[2..]
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad entry {t}"))))
        .collect::<Result<_>>()?;
    if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(bad("entries must be finite and nonnegative"));
    }
    Ok(PsfInstance {
        v: DMatrix::from_row_slice(rows, cols, &vals),
        ground_truth: None,
    })
}

/// The PSF instance as an [`NsdpProblem`].
#[derive(Debug, Clone)]
pub struct PsfProblem {
    v: DMatrix<f64>,
    m_rows: usize,
    n_cols: usize,
    q: usize,
    r: f64,
    /// `(row, col, weight)` of each svec coordinate inside its block.
    coords: Vec<(usize, usize, f64)>,
    derivs: Vec<SymMat>,
    lipschitz: Option<Lipschitz>,
}

pub fn psf_as_nsdp(inst: &PsfInstance, config: &PsfConfig) -> Result<PsfProblem> {
    config.validate()?;
    if inst.v.shape() != (config.m_rows, config.n_cols) {
        return Err(SolverError::InvalidInput(format!(
            "V is {:?}, config expects ({}, {})",
            inst.v.shape(),
            config.m_rows,
            config.n_cols
        )));
    }
    let q = config.q;
    let mut coords = Vec::with_capacity(config.block_len());
    for i in 0..q {
        for j in i..q {
            let w = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
            coords.push((i, j, w));
        }
    }
    let blocks = config.m_rows + config.n_cols;
    let order = q * blocks;
    let mut derivs = Vec::with_capacity(config.n_var());
    for b in 0..blocks {
        for &(i, j, w) in &coords {
            let mut m = DMatrix::zeros(order, order);
            m[(b * q + i, b * q + j)] = w;
            m[(b * q + j, b * q + i)] = w;
            derivs.push(SymMat::from_matrix(m)?);
        }
    }
    Ok(PsfProblem {
        v: inst.v.clone(),
        m_rows: config.m_rows,
        n_cols: config.n_cols,
        q,
        r: config.r,
        coords,
        derivs,
        lipschitz: None,
    })
}

impl PsfProblem {
    fn block_len(&self) -> usize {
        self.coords.len()
    }

    fn block<'a>(&self, x: &'a Vector, k: usize) -> nalgebra::DVectorView<'a, f64> {
        x.rows(k * self.block_len(), self.block_len())
    }

    /// `Vᵢⱼ − ⟨Aᵢ, Bⱼ⟩`.
    pub fn residuals(&self, x: &Vector) -> DMatrix<f64> {
        DMatrix::from_fn(self.m_rows, self.n_cols, |i, j| {
            self.v[(i, j)] - self.block(x, i).dot(&self.block(x, self.m_rows + j))
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn shift(&self) -> f64 {
        self.r
    }

    pub fn with_lipschitz(mut self, constants: Lipschitz) -> Self {
        self.lipschitz = Some(constants);
        self
    }

    /// Constants valid on the ball `‖x‖ ≤ radius`:
    /// `L0 = n` (unit-norm coordinate directions), `‖∇²f‖ ≤ 2max(m,n)R² +
    /// 2‖V‖_F + R²` and `‖D³f‖ ≤ 12R`. The constraint is affine, so its
    /// contributions to `L1`, `L2` vanish.
    pub fn box_constants(&self, radius: f64) -> Lipschitz {
        let l0 = self.derivs.len() as f64;
        let l1 = 2.0 * self.m_rows.max(self.n_cols) as f64 * radius * radius
            + 2.0 * self.v.norm()
            + radius * radius;
        let l2 = 12.0 * radius;
        Lipschitz { l0, l1, l2 }
    }

    /// Embeds `svec` factor blocks into a point `x`.
    pub fn pack(&self, a: &[SymMat], b: &[SymMat]) -> Vector {
        let mut x = Vector::zeros(self.n());
        for (k, f) in a.iter().chain(b.iter()).enumerate() {
            for (t, &(i, j, w)) in self.coords.iter().enumerate() {
                let scale = if i == j { 1.0 } else { 2.0 * w };
                x[k * self.block_len() + t] = scale * f.get(i, j);
            }
        }
        x
    }
}

impl NsdpProblem for PsfProblem {
    fn n(&self) -> usize {
        self.derivs.len()
    }

    fn m(&self) -> usize {
        self.q * (self.m_rows + self.n_cols)
    }

    fn objective(&self, x: &Vector) -> f64 {
        self.residuals(x).norm_squared()
    }

    fn objective_difference(&self, x: &Vector, y: &Vector) -> f64 {
        let (rx, ry) = (self.residuals(x), self.residuals(y));
        let d = x - y;
        let mut total = 0.0;
        for i in 0..self.m_rows {
            for j in 0..self.n_cols {
                let k = self.m_rows + j;
                // r_x − r_y = a_y·b_y − a_x·b_x = −(a_x − a_y)·b_x − a_y·(b_x − b_y)
                let diff = -self.block(&d, i).dot(&self.block(x, k))
                    - self.block(y, i).dot(&self.block(&d, k));
                total += diff * (rx[(i, j)] + ry[(i, j)]);
            }
        }
        total
    }

    fn objective_gradient(&self, x: &Vector) -> Vector {
        let res = self.residuals(x);
        let s = self.block_len();
        let mut g = Vector::zeros(self.n());
        for i in 0..self.m_rows {
            for j in 0..self.n_cols {
                let rij = -2.0 * res[(i, j)];
                let (ai, bj) = (i * s, (self.m_rows + j) * s);
                for t in 0..s {
                    g[ai + t] += rij * x[bj + t];
                    g[bj + t] += rij * x[ai + t];
                }
            }
        }
        g
    }

    fn objective_hessian(&self, x: &Vector) -> SymMat {
        let res = self.residuals(x);
        let s = self.block_len();
        let n = self.n();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..self.m_rows {
            for j in 0..self.n_cols {
                let (ai, bj) = (i * s, (self.m_rows + j) * s);
                for u in 0..s {
                    for w in 0..s {
                        h[(ai + u, ai + w)] += 2.0 * x[bj + u] * x[bj + w];
                        h[(bj + u, bj + w)] += 2.0 * x[ai + u] * x[ai + w];
                        let cross = 2.0 * x[bj + u] * x[ai + w]
                            - if u == w { 2.0 * res[(i, j)] } else { 0.0 };
                        // rows a_i, columns b_j: 2 b_j a_iᵀ − 2 r_ij I
                        h[(ai + u, bj + w)] += cross;
                        h[(bj + w, ai + u)] += cross;
                    }
                }
            }
        }
        SymMat::from_matrix(h).expect("square")
    }

    fn constraint(&self, x: &Vector) -> SymMat {
        let q = self.q;
        let order = self.m();
        let mut m = DMatrix::identity(order, order) * self.r;
        for k in 0..(self.m_rows + self.n_cols) {
            let blk = self.block(x, k);
            for (t, &(i, j, w)) in self.coords.iter().enumerate() {
                m[(k * q + i, k * q + j)] += w * blk[t];
                if i != j {
                    m[(k * q + j, k * q + i)] += w * blk[t];
                }
            }
        }
        SymMat::from_matrix(m).expect("square")
    }

    fn constraint_derivative(&self, _x: &Vector, i: usize) -> SymMat {
        self.derivs[i].clone()
    }

    fn constraint_second_derivative(&self, _x: &Vector, _i: usize, _j: usize) -> SymMat {
        SymMat::zeros(self.m())
    }

    fn lipschitz(&self) -> Option<Lipschitz> {
        self.lipschitz
    }

    fn constraint_is_affine(&self) -> bool {
        true
    }

    fn constraint_derivatives(&self, _x: &Vector) -> Vec<SymMat> {
        self.derivs.clone()
    }
}

/// Random start near the saddle at the origin: entries uniform on
/// `[0, 10⁻⁶)`, redrawn until `X(x) ≻ 0`, with `Z = μ₁ X(x)⁻¹`.
pub fn psf_initial_point(prob: &PsfProblem, seed: u64, mu1: f64) -> Result<Iterate> {
    let mut rng = rng_for(seed, 1);
    for _ in 0..MAX_START_ATTEMPTS {
        let x = Vector::from_fn(prob.n(), |_, _| START_SPREAD * rng.gen::<f64>());
        match Iterate::on_central_path(prob, x, mu1) {
            Ok(it) => return Ok(it),
            Err(SolverError::DomainViolation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SolverError::GenerationFailed(format!(
        "no strictly feasible start after {MAX_START_ATTEMPTS} draws"
    )))
}
