//! Comparison methods: demixing after multiplying by the dictionary
//! pseudo-inverse (entry-wise and column-wise), and matched filtering.

use alloc::vec::Vec;

use crate::apg::{self, Solution};
use crate::linalg::{pseudo_inverse, DenseMatrix};
use crate::model::{DemixProblem, SolverConfig, SparsityMode};
use crate::{Error, Result};

/// `D^+ M` with the identity as dictionary, in the same sparsity mode.
pub fn pinv_transform(problem: &DemixProblem) -> Result<DemixProblem> {
    let dict = problem.dictionary();
    if dict.is_zero() {
        return Err(Error::Degenerate("dictionary is zero".into()));
    }
    let pinv = pseudo_inverse(dict)?;
    let transformed = pinv.matmul(problem.m_obs());
    DemixProblem::new(
        transformed,
        DenseMatrix::identity(dict.cols()),
        problem.mode(),
    )
}

/// Entry-wise demixing of `D^+ M = D^+ L + S` with an identity dictionary.
/// The returned low-rank part lives in the transformed (d-dimensional) space.
pub fn rpca_pinv(problem: &DemixProblem, config: &SolverConfig) -> Result<Solution> {
    if problem.mode() != SparsityMode::EntryWise {
        return Err(Error::InvalidParameter(
            "rpca_pinv needs an entry-wise problem".into(),
        ));
    }
    apg::solve(&pinv_transform(problem)?, config)
}

/// Column-wise counterpart of [`rpca_pinv`].
pub fn op_pinv(problem: &DemixProblem, config: &SolverConfig) -> Result<Solution> {
    if problem.mode() != SparsityMode::ColumnWise {
        return Err(Error::InvalidParameter(
            "op_pinv needs a column-wise problem".into(),
        ));
    }
    apg::solve(&pinv_transform(problem)?, config)
}

/// Per-column detection score: the largest absolute inner product between the
/// normalized data column and a dictionary atom. With `pseudo_inverse_first`
/// the data is replaced by `D^+ M` and the score is the largest absolute entry
/// of each normalized column. Zero columns score 0.
pub fn matched_filter(
    m_obs: &DenseMatrix,
    dictionary: &DenseMatrix,
    pseudo_inverse_first: bool,
) -> Result<Vec<f64>> {
    if m_obs.rows() != dictionary.rows() {
        return Err(Error::Dimension(
            "data and dictionary row counts differ".into(),
        ));
    }
    let products = if pseudo_inverse_first {
        pseudo_inverse(dictionary)?.matmul(m_obs)
    } else {
        dictionary.transpose().matmul(m_obs)
    };
    // normalizing the data column scales the whole product column alike
    let norms = if pseudo_inverse_first {
        products.column_norms()
    } else {
        m_obs.column_norms()
    };
    Ok((0..m_obs.cols())
        .map(|j| {
            if norms[j] == 0.0 {
                return 0.0;
            }
            let top =
                (0..products.rows()).fold(0.0_f64, |acc, i| acc.max(products.get(i, j).abs()));
            top / norms[j]
        })
        .collect())
}
