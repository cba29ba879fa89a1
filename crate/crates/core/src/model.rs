//! Problem, solution and ground-truth types shared by the solver, the
//! diagnostics and the experiment harnesses.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, DenseMatrix};
use crate::{Error, Result};

/// Default column-norm threshold for deciding that a column of `S` is nonzero.
pub const DEFAULT_COLUMN_THRESHOLD: f64 = 2e-3;
/// Default largest principal angle (radians) for two subspaces to count as equal.
pub const DEFAULT_SPACE_TOLERANCE: f64 = 1e-3;
/// Allowed deviation of dictionary column norms from one.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityMode {
    /// `S` has few nonzero entries; penalty is the entrywise l1 norm.
    EntryWise,
    /// `S` has few nonzero columns; penalty is the sum of column norms.
    ColumnWise,
}

/// Observed matrix `M` (n×m), dictionary `D` (n×d, unit columns) and the
/// sparsity pattern sought for `S` in `M = L + D S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemixProblem {
    m_obs: DenseMatrix,
    dictionary: DenseMatrix,
    mode: SparsityMode,
}

impl DemixProblem {
    /// Requires matching row counts and unit-norm dictionary columns.
    pub fn new(m_obs: DenseMatrix, dictionary: DenseMatrix, mode: SparsityMode) -> Result<Self> {
        check_rows(&m_obs, &dictionary)?;
        for (j, norm) in dictionary.column_norms().into_iter().enumerate() {
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::InvalidParameter(format!(
                    "dictionary column {j} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self {
            m_obs,
            dictionary,
            mode,
        })
    }

    /// Rescales the dictionary columns to unit norm first.
    pub fn normalized(
        m_obs: DenseMatrix,
        dictionary: DenseMatrix,
        mode: SparsityMode,
    ) -> Result<Self> {
        check_rows(&m_obs, &dictionary)?;
        let dictionary = normalize_columns(&dictionary)?;
        Ok(Self {
            m_obs,
            dictionary,
            mode,
        })
    }

    pub fn m_obs(&self) -> &DenseMatrix {
        &self.m_obs
    }

    pub fn dictionary(&self) -> &DenseMatrix {
        &self.dictionary
    }

    pub fn mode(&self) -> SparsityMode {
        self.mode
    }

    /// `(n, m, d)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m_obs.rows(), self.m_obs.cols(), self.dictionary.cols())
    }
}

fn check_rows(m_obs: &DenseMatrix, dictionary: &DenseMatrix) -> Result<()> {
    if m_obs.rows() != dictionary.rows() {
        return Err(Error::Dimension(format!(
            "data has {} rows but dictionary has {}",
            m_obs.rows(),
            dictionary.rows()
        )));
    }
    if dictionary.cols() == 0 {
        return Err(Error::Dimension("dictionary has no columns".into()));
    }
    Ok(())
}

/// Divides every column by its l2 norm; a zero column is an error.
pub fn normalize_columns(a: &DenseMatrix) -> Result<DenseMatrix> {
    let norms = a.column_norms();
    if let Some(j) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::ZeroDictionaryColumn(j));
    }
    Ok(DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| {
        a.get(i, j) / norms[j]
    }))
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub low_rank: DenseMatrix,
    pub sparse_coeff: DenseMatrix,
    pub iterations: usize,
    /// `||M - L - D S||_F`.
    pub final_residual: f64,
    pub objective: f64,
    pub converged: bool,
}

impl Components {
    /// Numerical rank of `low_rank`.
    pub fn rank(&self) -> Result<usize> {
        Ok(linalg::svd(&self.low_rank, None)?.rank())
    }

    pub fn nonzero_entries(&self) -> usize {
        self.sparse_coeff.count_nonzero()
    }

    pub fn nonzero_columns(&self, threshold: f64) -> usize {
        column_support(&self.sparse_coeff, threshold).len()
    }
}

/// Parameters of the accelerated proximal gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the sparse penalty relative to the nuclear norm.
    pub lambda: f64,
    /// Geometric decay `v` of the continuation parameter.
    pub continuation_decay: f64,
    /// Floor `nu_bar` of the continuation parameter.
    pub nu_floor: f64,
    pub max_iters: usize,
    pub convergence_tol: f64,
    /// Starting continuation value; `None` means the spectral norm of `M`.
    pub nu_initial: Option<f64>,
    /// Nesterov momentum; turning it off gives plain proximal gradient.
    pub momentum: bool,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.into()));
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.continuation_decay > 0.0 && self.continuation_decay < 1.0) {
            return bad("continuation decay must lie in (0, 1)");
        }
        if !(self.nu_floor.is_finite() && self.nu_floor > 0.0) {
            return bad("nu floor must be positive");
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return bad("convergence tolerance must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if let Some(nu) = self.nu_initial {
            if !(nu.is_finite() && nu > 0.0) {
                return bad("initial nu must be positive");
            }
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            continuation_decay: 0.95,
            nu_floor: 1e-4,
            max_iters: 2000,
            convergence_tol: 1e-6,
            nu_initial: None,
            momentum: true,
        }
    }
}

/// Ground truth for column-wise problems: the column space of `L` and the
/// indices of the outlier columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleModel {
    column_space_basis: DenseMatrix,
    outlier_columns: Vec<usize>,
    num_columns: usize,
}

impl OracleModel {
    /// `basis` must have orthonormal columns and `outlier_columns` must be
    /// strictly increasing indices below `num_columns`.
    pub fn new(
        basis: DenseMatrix,
        outlier_columns: Vec<usize>,
        num_columns: usize,
    ) -> Result<Self> {
        let r = basis.cols();
        if r > 0 {
            let gram = basis.transpose().matmul(&basis);
            let err = (&gram - &DenseMatrix::identity(r)).max_abs();
            if err > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "basis is not orthonormal (deviation {err:e})"
                )));
            }
        }
        if outlier_columns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "outlier indices must be strictly increasing".into(),
            ));
        }
        if outlier_columns.last().is_some_and(|&j| j >= num_columns) {
            return Err(Error::InvalidParameter("outlier index out of range".into()));
        }
        Ok(Self {
            column_space_basis: basis,
            outlier_columns,
            num_columns,
        })
    }

    /// Ground truth of a planted `L`: column space of `l` and the given outliers.
    pub fn from_low_rank(l: &DenseMatrix, outlier_columns: Vec<usize>) -> Result<Self> {
        let basis = linalg::column_space_basis(l)?;
        Self::new(basis, outlier_columns, l.cols())
    }

    pub fn column_space_basis(&self) -> &DenseMatrix {
        &self.column_space_basis
    }

    pub fn outlier_columns(&self) -> &[usize] {
        &self.outlier_columns
    }

    pub fn num_columns(&self) -> usize {
        self.num_columns
    }

    pub fn inlier_columns(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_columns - self.outlier_columns.len());
        let mut it = self.outlier_columns.iter().peekable();
        for j in 0..self.num_columns {
            if it.peek() == Some(&&j) {
                it.next();
            } else {
                out.push(j);
            }
        }
        out
    }
}

/// Indices of columns whose l2 norm exceeds `threshold`.
pub fn column_support(s: &DenseMatrix, threshold: f64) -> Vec<usize> {
    s.column_norms()
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > threshold)
        .map(|(j, _)| j)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMatchReport {
    pub matched: bool,
    pub support_matches: bool,
    pub space_matches: bool,
    /// Truth outliers not detected.
    pub missing_columns: Vec<usize>,
    /// Detected columns that are not truth outliers.
    pub extra_columns: Vec<usize>,
    /// Largest principal angle in radians; pi/2 when the dimensions differ.
    pub max_principal_angle: f64,
    pub found_rank: usize,
    pub truth_rank: usize,
    /// The recovered low-rank part has rank zero while the truth does not.
    pub degenerate: bool,
}

/// Compares a solver output with the ground truth: the column space of the
/// recovered `L` on the inlier columns must match the true one within
/// `space_tol` radians, and the detected outlier columns (norm above
/// `col_tol`) must be exactly the true ones.
pub fn oracle_match(
    found: &Components,
    truth: &OracleModel,
    col_tol: f64,
    space_tol: f64,
) -> Result<OracleMatchReport> {
    if found.low_rank.cols() != truth.num_columns || found.sparse_coeff.cols() != truth.num_columns
    {
        return Err(Error::Dimension(
            "column counts differ from the truth".into(),
        ));
    }
    if found.low_rank.rows() != truth.column_space_basis.rows() {
        return Err(Error::Dimension("row counts differ from the truth".into()));
    }
    let detected = column_support(&found.sparse_coeff, col_tol);
    let truth_set = truth.outlier_columns();
    let missing_columns: Vec<usize> = truth_set
        .iter()
        .copied()
        .filter(|j| detected.binary_search(j).is_err())
        .collect();
    let extra_columns: Vec<usize> = detected
        .iter()
        .copied()
        .filter(|j| truth_set.binary_search(j).is_err())
        .collect();
    let support_matches = missing_columns.is_empty() && extra_columns.is_empty();

    let inliers = found.low_rank.select_columns(&truth.inlier_columns());
    let found_basis = linalg::column_space_basis(&inliers)?;
    let q = &truth.column_space_basis;
    let (found_rank, truth_rank) = (found_basis.cols(), q.cols());
    let max_principal_angle = principal_angle(&found_basis, q)?;
    let space_matches = max_principal_angle < space_tol;
    let degenerate = found_rank == 0 && truth_rank > 0;

    Ok(OracleMatchReport {
        matched: support_matches && space_matches && !degenerate,
        support_matches,
        space_matches,
        missing_columns,
        extra_columns,
        max_principal_angle,
        found_rank,
        truth_rank,
        degenerate,
    })
}

/// Largest principal angle between the spans of two orthonormal bases.
pub fn principal_angle(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.cols() != b.cols() {
        return Ok(FRAC_PI_2);
    }
    if a.cols() == 0 {
        return Ok(0.0);
    }
    // sin of the largest angle = ||(I - B B^T) A||_2; accurate for small angles
    let resid = a - &b.matmul(&b.transpose().matmul(a));
    let s = linalg::spectral_norm(&resid)?.min(1.0);
    Ok(s.asin())
}
