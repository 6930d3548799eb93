//! Dense symmetric matrices and their spectral decompositions.
//!
//! Every matrix-valued quantity the solvers touch (X(x), Z, the multiplier
//! surrogate, constraint derivatives) is a [`SymMat`]. Inverses, log
//! determinants and extreme eigenvalues are always read off one
//! [`Spectrum`], so interiority checks and step-size formulas share a single
//! decomposition.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SolverError};

/// Real symmetric matrix with exact symmetry maintained on every write.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat(DMatrix<f64>);

impl SymMat {
    /// Builds a symmetric matrix from an arbitrary square matrix by taking
    /// its symmetric part `(A + Aᵀ)/2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(SolverError::InvalidInput(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::symmetrize(m))
    }

    fn symmetrize(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMat(m)
    }

    /// Fills the upper triangle from `f(i, j)` (i ≤ j) and mirrors it.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..=j {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMat(m)
    }

    pub fn zeros(dim: usize) -> Self {
        SymMat(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMat(DMatrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        SymMat(DMatrix::identity(dim, dim) * s)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMat(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// `(row, col, value)` for every nonzero entry.
    pub fn nonzeros(&self) -> Vec<(usize, usize, f64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = self.0[(i, j)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Trace inner product ⟨A, B⟩ = tr(AB).
    pub fn inner(&self, other: &SymMat) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat(&self.0 * s)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &SymMat) -> SymMat {
        SymMat(&self.0 + &other.0 * s)
    }

    /// Product `self · other`, which is generally not symmetric.
    pub fn matmul(&self, other: &SymMat) -> DMatrix<f64> {
        &self.0 * &other.0
    }

    pub fn max_abs_diff(&self, other: &SymMat) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        spectral_decompose(self)
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, rhs: f64) -> SymMat {
        self.scale(rhs)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat(-&self.0)
    }
}

/// Eigen-decomposition `A = U diag(λ) Uᵀ` with eigenvalues sorted in
/// descending order and eigenvectors stored as the columns of `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    /// Decoupled diagonal blocks as (rows, eigenvalue positions); empty
    /// when the matrix is irreducible.
    blocks: Vec<(Vec<usize>, Vec<usize>)>,
}

/// Index sets of the irreducible diagonal blocks of `a`, each ascending,
/// ordered by smallest index.
fn diagonal_blocks(a: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for j in 0..n {
        for i in 0..j {
            if a[(i, j)] != 0.0 {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

fn eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m, f64::EPSILON, 100_000).ok_or_else(|| {
        SolverError::NumericalFailure("symmetric eigensolver did not converge".into())
    })
}

/// Symmetric eigen-decomposition with eigenvalues in descending order.
///
/// Output is deterministic for identical input bits on one platform.
pub fn spectral_decompose(a: &SymMat) -> Result<Spectrum> {
    if !a.is_finite() {
        return Err(SolverError::NumericalFailure(
            "non-finite entries in symmetric matrix".into(),
        ));
    }
    let dim = a.dim();
    if dim == 0 {
        return Ok(Spectrum {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
            blocks: Vec::new(),
        });
    }
    let groups = diagonal_blocks(&a.0);
    // (value, block, local column)
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(dim);
    let mut local = Vec::with_capacity(groups.len());
    for (b, rows) in groups.iter().enumerate() {
        let eig = if groups.len() == 1 {
            eigen(a.0.clone())?
        } else {
            eigen(a.0.select_rows(rows).select_columns(rows))?
        };
        pairs.extend(eig.eigenvalues.iter().enumerate().map(|(c, &v)| (v, b, c)));
        local.push(eig.eigenvectors);
    }
    pairs.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((groups[x.1][0], x.2).cmp(&(groups[y.1][0], y.2)))
    });
    let values = DVector::from_iterator(dim, pairs.iter().map(|p| p.0));
    let mut vectors = DMatrix::zeros(dim, dim);
    let mut blocks: Vec<(Vec<usize>, Vec<usize>)> =
        groups.iter().map(|rows| (rows.clone(), Vec::new())).collect();
    for (dst, &(_, b, c)) in pairs.iter().enumerate() {
        for (k, &r) in groups[b].iter().enumerate() {
            vectors[(r, dst)] = local[b][(k, c)];
        }
        blocks[b].1.push(dst);
    }
    if groups.len() == 1 {
        blocks.clear();
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NumericalFailure(
            "eigensolver produced non-finite eigenvalues".into(),
        ));
    }
    Ok(Spectrum { values, vectors, blocks })
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvalues, largest first.
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Orthonormal eigenvectors as columns, matching [`Spectrum::values`].
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    /// Eigenvector belonging to the smallest eigenvalue.
    pub fn min_vector(&self) -> DVector<f64> {
        self.vectors.column(self.dim() - 1).into_owned()
    }

    /// `U diag(g(λ)) Uᵀ`.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> SymMat {
        self.map_indexed(|j| g(self.values[j]))
    }

    /// `U diag(g(0), …, g(m−1)) Uᵀ`, indexing the descending eigenvalues.
    pub fn map_indexed(&self, g: impl Fn(usize) -> f64) -> SymMat {
        let dim = self.dim();
        if self.blocks.is_empty() {
            let mut scaled = self.vectors.clone();
            for j in 0..dim {
                let s = g(j);
                for i in 0..dim {
                    scaled[(i, j)] *= s;
                }
            }
            return SymMat::symmetrize(scaled * self.vectors.transpose());
        }
        let mut out = DMatrix::zeros(dim, dim);
        for (rows, cols) in &self.blocks {
            let u = self.vectors.select_rows(rows).select_columns(cols);
            let mut scaled = u.clone();
            for (k, &c) in cols.iter().enumerate() {
                let s = g(c);
                scaled.column_mut(k).scale_mut(s);
            }
            let part = scaled * u.transpose();
            for (p, &i) in rows.iter().enumerate() {
                for (q, &j) in rows.iter().enumerate() {
                    out[(i, j)] = part[(p, q)];
                }
            }
        }
        SymMat::symmetrize(out)
    }

    pub fn reconstruct(&self) -> SymMat {
        self.map(|l| l)
    }

    /// `U diag(1/λ) Uᵀ`; callers guarantee positivity.
    pub fn inverse(&self) -> SymMat {
        self.map(|l| 1.0 / l)
    }

    /// Moore–Penrose inverse with eigenvalues `|λ| ≤ threshold` zeroed.
    pub fn pseudo_inverse(&self, threshold: f64) -> SymMat {
        self.map(|l| if l.abs() <= threshold { 0.0 } else { 1.0 / l })
    }

    /// `Σ log λᵢ`; NaN if any eigenvalue is nonpositive.
    pub fn log_det(&self) -> f64 {
        self.values.iter().map(|l| l.ln()).sum()
    }

    /// `sqrt(Σ λᵢ²)`.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.norm()
    }

    /// Frobenius norm of the inverse, `sqrt(Σ 1/λᵢ²)`.
    pub fn inverse_frobenius_norm(&self) -> f64 {
        self.values.iter().map(|l| 1.0 / (l * l)).sum::<f64>().sqrt()
    }

    /// `‖UᵀU − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let dim = self.dim();
        (self.vectors.transpose() * &self.vectors - DMatrix::<f64>::identity(dim, dim)).norm()
    }
}

/// Nonzero entries of each matrix in a family, or `None` when some member
/// has more than `order` of them and dense products are cheaper.
pub fn sparse_family(mats: &[SymMat]) -> Option<Vec<Vec<(usize, usize, f64)>>> {
    let entries: Vec<_> = mats.iter().map(SymMat::nonzeros).collect();
    entries
        .iter()
        .all(|e| mats.first().is_some_and(|m| e.len() <= m.dim()))
        .then_some(entries)
}

/// `[tr(Aᵢ P Aⱼ Q)]` for `i ≤ j`, mirrored.
pub fn pair_traces(mats: &[SymMat], p: &SymMat, q: &SymMat) -> SymMat {
    let n = mats.len();
    if let Some(sparse) = sparse_family(mats) {
        let (p, q) = (p.as_matrix(), q.as_matrix());
        // Σ v·u·P[b,c]·Q[d,a] over entries (a,b,v) of Aᵢ and (c,d,u) of Aⱼ
        return SymMat::from_upper_fn(n, |i, j| {
            let mut t = 0.0;
            for &(a, b, v) in &sparse[i] {
                for &(c, d, u) in &sparse[j] {
                    t += v * u * p[(b, c)] * q[(d, a)];
                }
            }
            t
        });
    }
    dense_pair_traces(mats, p, q)
}

fn dense_pair_traces(mats: &[SymMat], p: &SymMat, q: &SymMat) -> SymMat {
    // tr(LᵢRⱼ) = ⟨Lᵢ, Rⱼᵀ⟩ with Lᵢ = AᵢP, Rⱼ = AⱼQ
    let left: Vec<DMatrix<f64>> = mats.iter().map(|a| a.matmul(p)).collect();
    let right: Vec<DMatrix<f64>> = mats.iter().map(|a| a.matmul(q).transpose()).collect();
    SymMat::from_upper_fn(mats.len(), |i, j| left[i].dot(&right[j]))
}

/// Spectral (operator 2-) norm of a symmetric matrix.
pub fn spectral_norm(a: &SymMat) -> Result<f64> {
    let s = a.spectrum()?;
    Ok(s.max().abs().max(s.min().abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_diagonal_matches_dense_reconstruction() {
        // blocks {0, 3}, {1}, {2, 4}
        let a = SymMat::from_upper_fn(5, |i, j| match (i, j) {
            (i, j) if i == j => 1.0 + i as f64 * 0.7,
            (0, 3) => 0.4,
            (2, 4) => -0.9,
            _ => 0.0,
        });
        assert_eq!(diagonal_blocks(&a.0), vec![vec![0, 3], vec![1], vec![2, 4]]);
        let s = a.spectrum().unwrap();
        assert!(s.values().as_slice().windows(2).all(|w| w[0] >= w[1]));
        assert!(s.orthogonality_error() < 1e-14);
        assert!((&s.reconstruct() - &a).frobenius_norm() < 1e-14);
        let inv = s.inverse();
        let eye = SymMat::from_matrix(a.as_matrix() * inv.as_matrix()).unwrap();
        assert!((&eye - &SymMat::identity(5)).frobenius_norm() < 1e-13);
        let dense = SymmetricEigen::new(a.0.clone());
        let mut expect: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        expect.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (x, y) in s.values().iter().zip(&expect) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn sparse_and_dense_pair_traces_agree() {
        let unit = |r: usize, c: usize| {
            SymMat::from_upper_fn(4, |i, j| if (i, j) == (r.min(c), r.max(c)) { 1.5 } else { 0.0 })
        };
        let mats = vec![unit(0, 0), unit(1, 3), unit(2, 2), unit(0, 3)];
        let p = SymMat::from_upper_fn(4, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 / (1 + i + j) as f64 });
        let q = SymMat::from_upper_fn(4, |i, j| if i == j { -1.0 } else { 0.2 * (i * j) as f64 });
        assert!(sparse_family(&mats).is_some());
        let gap = (&pair_traces(&mats, &p, &q) - &dense_pair_traces(&mats, &p, &q)).frobenius_norm();
        assert!(gap < 1e-13);
        let dense = vec![SymMat::from_upper_fn(2, |_, _| 1.0)];
        assert!(sparse_family(&dense).is_none());
    }
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(dim: usize, rng: &mut impl Rng) -> SymMat {
        SymMat::from_upper_fn(dim, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_spectrum_is_all_ones() {
        let s = SymMat::identity(4).spectrum().unwrap();
        assert!(s.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_spectrum_sorted_descending_with_axis_vectors() {
        let s = SymMat::from_diagonal(&[1.0, 3.0]).spectrum().unwrap();
        assert_eq!(s.values().as_slice(), &[3.0, 1.0]);
        assert!((s.vectors()[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((s.vectors()[(0, 1)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_and_orthogonality_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [1, 2, 5, 12, 40] {
            let a = random_sym(dim, &mut rng);
            let s = a.spectrum().unwrap();
            let err = (&s.reconstruct() - &a).frobenius_norm();
            assert!(err <= 1e-10 * (1.0 + a.frobenius_norm()), "dim {dim}: {err}");
            assert!(s.orthogonality_error() <= 1e-10);
            let rel = (s.frobenius_norm() - a.frobenius_norm()).abs() / a.frobenius_norm();
            assert!(rel <= 1e-12);
        }
    }

    #[test]
    fn decomposition_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_sym(9, &mut rng);
        assert_eq!(a.spectrum().unwrap(), a.spectrum().unwrap());
    }

    #[test]
    fn non_finite_entries_rejected() {
        let mut m = DMatrix::identity(3, 3);
        m[(1, 2)] = f64::NAN;
        let a = SymMat::from_matrix(m).unwrap();
        assert!(matches!(
            a.spectrum(),
            Err(SolverError::NumericalFailure(_))
        ));
    }

    #[test]
    fn non_square_rejected() {
        assert!(SymMat::from_matrix(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn inverse_matches_lu_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_sym(6, &mut rng);
        let a = (&b * 0.1).add_scaled(1.0, &SymMat::scaled_identity(6, 2.0));
        let inv = a.spectrum().unwrap().inverse();
        let lu = a.as_matrix().clone().try_inverse().unwrap();
        assert!((inv.as_matrix() - lu).norm() < 1e-12);
    }

    #[test]
    fn norm_sandwich_for_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let b = random_sym(5, &mut rng);
            let a = SymMat::from_matrix(b.matmul(&b)).unwrap();
            let s = a.spectrum().unwrap();
            let fro = a.frobenius_norm();
            assert!(s.max() <= fro * (1.0 + 1e-12));
            assert!(fro <= (5f64).sqrt() * s.max() * (1.0 + 1e-12));
        }
    }
}
