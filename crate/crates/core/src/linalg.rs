//! Dense linear algebra: the matrix type, SVD, the norms used by the
//! demixing objectives, the pseudo-inverse and an operator norm estimate by
//! power iteration.
//!
//! Heavy kernels (products, SVD, symmetric eigendecomposition) run on `faer`.
//! [`DenseMatrix`] keeps its own row-major storage and is viewed by `faer`
//! without copying.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use faer::{Mat, MatRef, Side};
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Singular values below this fraction of the largest one are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Row-major dense matrix of `f64`.
///
/// Entries are finite whenever the matrix was built through a checked
/// constructor ([`DenseMatrix::new`], [`DenseMatrix::from_rows`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix data"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out.data[i * n + i] = 1.0;
        }
        out
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut out = Self::zeros(n, n);
        for (i, &x) in diag.iter().enumerate() {
            out.data[i * n + i] = x;
        }
        out
    }

    /// Builds a matrix from a closure.
    ///
    /// # Panics
    /// Panics if the closure produces a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let x = f(i, j);
                assert!(x.is_finite(), "non-finite entry at ({i}, {j})");
                data.push(x);
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension(
                "column length differs from row count".into(),
            ));
        }
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                data[i * cols + j] = x;
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Sets one entry. Non-finite values are rejected.
    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite("matrix entry"));
        }
        self.data[i * self.cols + j] = value;
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        (0..self.rows)
            .map(|i| {
                let x = self.get(i, j);
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)) {
            for (acc, &x) in sq.iter_mut().zip(row) {
                *acc += x * x;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> DenseMatrix {
        Self::from_fn(self.rows, idx.len(), |i, k| self.get(i, idx[k]))
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    ///
    /// # Panics
    /// Panics on mismatched inner dimensions.
    pub fn matmul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        from_faer((self.as_faer() * rhs.as_faer()).as_ref())
    }

    pub fn scale(&self, c: f64) -> DenseMatrix {
        self.map(|x| c * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0.0).count()
    }

    /// Zero-copy `faer` view.
    pub fn as_faer(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }

    fn zip_with(&self, rhs: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
        assert_eq!(
            self.shape(),
            rhs.shape(),
            "elementwise op on mismatched shapes"
        );
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        self.map(|x| -x)
    }
}

/// Copies a `faer` matrix into row-major storage. Finiteness is not checked.
pub fn from_faer(m: MatRef<'_, f64>) -> DenseMatrix {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            data.push(m[(i, j)]);
        }
    }
    DenseMatrix { rows, cols, data }
}

/// Compact SVD `a = u * diag(sigma) * v^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let us = DenseMatrix::from_fn(self.u.rows(), self.rank(), |i, k| {
            self.u.get(i, k) * self.sigma[k]
        });
        us.matmul(&self.v.transpose())
    }
}

/// Compact SVD of `a`.
///
/// Singular values at or below `RANK_TOLERANCE * sigma_max` are dropped, as
/// are those below `rank_cutoff * sigma_max` when a cutoff is given. A zero
/// matrix yields empty factors.
pub fn svd(a: &DenseMatrix, rank_cutoff: Option<f64>) -> Result<SvdFactors> {
    let (n, m) = a.shape();
    let decomposition = a
        .as_faer()
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
    let s = decomposition.S().column_vector();
    let sigma_max = if s.nrows() > 0 { s[0] } else { 0.0 };
    let rel = rank_cutoff.unwrap_or(0.0).max(RANK_TOLERANCE);
    let keep = (0..s.nrows())
        .take_while(|&k| sigma_max > 0.0 && s[k] > rel * sigma_max)
        .count();
    let u = decomposition.U();
    let v = decomposition.V();
    Ok(SvdFactors {
        u: DenseMatrix::from_fn(n, keep, |i, k| u[(i, k)]),
        sigma: (0..keep).map(|k| s[k]).collect(),
        v: DenseMatrix::from_fn(m, keep, |i, k| v[(i, k)]),
    })
}

/// All singular values of `a`, nonincreasing, including zeros.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(Vec::new());
    }
    a.as_faer()
        .singular_values()
        .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))
}

/// Matrix norms appearing in the demixing objectives and bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Sum of singular values.
    Nuclear,
    Frobenius,
    /// Largest singular value.
    Spectral,
    /// Sum of absolute entries.
    L1Entrywise,
    /// Sum of column l2 norms.
    L12Columns,
    /// Largest absolute entry.
    LinfEntrywise,
    /// Largest column l2 norm.
    Linf2MaxColumn,
    /// Largest row l1 norm.
    LinfinfMaxRowL1,
}

pub fn matrix_norm(a: &DenseMatrix, kind: NormKind) -> Result<f64> {
    let value = match kind {
        NormKind::Nuclear => singular_values(a)?.iter().sum(),
        NormKind::Spectral => singular_values(a)?.first().copied().unwrap_or(0.0),
        NormKind::Frobenius => a.frobenius_norm(),
        NormKind::L1Entrywise => a.data().iter().map(|x| x.abs()).sum(),
        NormKind::L12Columns => a.column_norms().iter().sum(),
        NormKind::LinfEntrywise => a.max_abs(),
        NormKind::Linf2MaxColumn => a.column_norms().into_iter().fold(0.0, f64::max),
        NormKind::LinfinfMaxRowL1 => (0..a.rows())
            .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
    };
    Ok(value)
}

pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    matrix_norm(a, NormKind::Spectral)
}

/// Moore-Penrose pseudo-inverse, truncating singular values below
/// `RANK_TOLERANCE * sigma_max`.
pub fn pseudo_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let f = svd(a, None)?;
    let v_scaled = DenseMatrix::from_fn(f.v.rows(), f.rank(), |i, k| f.v.get(i, k) / f.sigma[k]);
    if f.rank() == 0 {
        return Ok(DenseMatrix::zeros(a.cols(), a.rows()));
    }
    Ok(v_scaled.matmul(&f.u.transpose()))
}

/// Orthonormal basis of the column space of `a` (empty when `a` is zero).
pub fn column_space_basis(a: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(svd(a, None)?.u)
}

/// Eigendecomposition of a symmetric matrix: eigenvalues nondecreasing and
/// eigenvectors as columns.
pub fn symmetric_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// A linear map between flat vectors, together with its adjoint.
pub trait LinearOperator {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]);
}

/// Multiplication by an explicit matrix.
pub struct MatrixOperator<'a>(pub &'a DenseMatrix);

impl LinearOperator for MatrixOperator<'_> {
    fn input_dim(&self) -> usize {
        self.0.cols()
    }

    fn output_dim(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.0.row(i)) {
                *o += a * yi;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterationOptions {
    pub max_iters: usize,
    /// Relative eigen-residual `||A^T A x - theta x|| / theta` at which the
    /// iteration stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-10,
            seed: 0x005E_ED0F_D1C7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorNorm {
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out; `value` is the last estimate.
    pub converged: bool,
}

/// Krylov block size of [`operator_norm`] between restarts.
const KRYLOV_DIM: usize = 32;

/// Largest singular value of a linear operator. Power iteration on `A^T A`
/// from a seeded random start, accelerated by Rayleigh-Ritz over the Krylov
/// block of the last `KRYLOV_DIM` iterates and restarted from the leading
/// Ritz vector. Plain power iteration stalls when the top singular values
/// cluster; the Krylov step does not. If the start collapses to zero the
/// iteration restarts once from a fresh seed before reporting a zero norm.
/// `max_iters` counts applications of `A^T A`.
pub fn operator_norm<O: LinearOperator + ?Sized>(
    op: &O,
    opts: PowerIterationOptions,
) -> Result<OperatorNorm> {
    if opts.max_iters == 0 {
        return Err(Error::InvalidParameter(
            "power iteration needs at least one step".into(),
        ));
    }
    let (nin, nout) = (op.input_dim(), op.output_dim());
    if nin == 0 || nout == 0 {
        return Ok(OperatorNorm {
            value: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let block = nin.min(KRYLOV_DIM);
    let mut y = vec![0.0; nout];
    let mut total = 0;
    for attempt in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(
            opts.seed
                .wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        let mut x: Vec<f64> = (0..nin).map(|_| StandardNormal.sample(&mut rng)).collect();
        normalize(&mut x);
        loop {
            // q: orthonormal Krylov basis, w: A^T A applied to each q
            let mut q: Vec<Vec<f64>> = vec![x.clone()];
            let mut w: Vec<Vec<f64>> = Vec::with_capacity(block);
            while w.len() < q.len() && total < opts.max_iters {
                let mut z = vec![0.0; nin];
                op.apply(q.last().unwrap(), &mut y);
                op.apply_adjoint(&y, &mut z);
                total += 1;
                if !z.iter().all(|v| v.is_finite()) {
                    return Err(Error::Numerical("power iteration diverged".into()));
                }
                w.push(z.clone());
                if q.len() == block {
                    break;
                }
                let before = norm2(&z);
                for _ in 0..2 {
                    for b in &q {
                        let c = dot(b, &z);
                        z.iter_mut().zip(b).for_each(|(zi, bi)| *zi -= c * bi);
                    }
                }
                let after = norm2(&z);
                if after <= 1e-12 * before || after == 0.0 {
                    break; // invariant subspace reached
                }
                z.iter_mut().for_each(|v| *v /= after);
                q.push(z);
            }
            let k = w.len();
            q.truncate(k);
            let h = Mat::<f64>::from_fn(k, k, |i, j| 0.5 * (dot(&q[i], &w[j]) + dot(&q[j], &w[i])));
            let (vals, vecs) = symmetric_eigen(h.as_ref())?;
            let theta = vals[k - 1].max(0.0);
            let coef: Vec<f64> = (0..k).map(|i| vecs[(i, k - 1)]).collect();
            let mut next = vec![0.0; nin];
            let mut image = vec![0.0; nin];
            for i in 0..k {
                next.iter_mut()
                    .zip(&q[i])
                    .for_each(|(a, b)| *a += coef[i] * b);
                image
                    .iter_mut()
                    .zip(&w[i])
                    .for_each(|(a, b)| *a += coef[i] * b);
            }
            if theta == 0.0 && image.iter().all(|&v| v == 0.0) {
                break; // collapsed start; try a fresh seed
            }
            let resid = image
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - theta * b) * (a - theta * b))
                .sum::<f64>()
                .sqrt();
            if resid <= opts.tol * theta {
                return Ok(OperatorNorm {
                    value: theta.sqrt(),
                    iterations: total,
                    converged: true,
                });
            }
            if total >= opts.max_iters {
                return Ok(OperatorNorm {
                    value: theta.sqrt(),
                    iterations: total,
                    converged: false,
                });
            }
            normalize(&mut next);
            x = next;
        }
    }
    Ok(OperatorNorm {
        value: 0.0,
        iterations: total,
        converged: true,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(x: &mut [f64]) {
    let n = norm2(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// Projector `P_U = U U^T` onto the span of orthonormal columns.
pub fn projector(u: &DenseMatrix) -> DenseMatrix {
    u.matmul(&u.transpose())
}
