//! Accelerated proximal gradient with continuation for
//!
//! `min nu ||L||_* + nu lambda ||S||_1 + 1/2 ||M - L - D S||_F^2` (entry-wise)
//!
//! and the column-wise variant with `||S||_{1,2}` (sum of column norms).
//! The continuation parameter `nu` decays geometrically from `||M||_2` to a
//! floor.

use alloc::format;
use alloc::vec::Vec;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::{from_faer, matrix_norm, DenseMatrix, NormKind};
use crate::model::{Components, DemixProblem, SolverConfig, SparsityMode};
use crate::prox::{self, column_shrink_in_place, entry_shrink_in_place, svt_into};
use crate::{Error, Result};

/// State recorded after each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Objective at the new iterate, with the `nu` used in this iteration.
    pub objective: f64,
    /// `||M - L - D S||_F` at the new iterate.
    pub residual: f64,
    pub nu: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub components: Components,
    pub trace: SolveTrace,
}

/// Solves from `L = S = 0`.
pub fn solve(problem: &DemixProblem, config: &SolverConfig) -> Result<Solution> {
    solve_from(problem, config, None)
}

/// Solves from the given `(L, S)`, or from zero when `start` is `None`.
///
/// The iteration stops once `nu` sits at its floor and the relative change
/// `max(||dL||_F, ||dS||_F) / max(1, ||M||_F)` drops below the tolerance.
/// When `max_iters` runs out first, the lowest-objective iterate seen at the
/// floor is returned with `converged = false`.
pub fn solve_from(
    problem: &DemixProblem,
    config: &SolverConfig,
    start: Option<(&DenseMatrix, &DenseMatrix)>,
) -> Result<Solution> {
    config.validate()?;
    let (n, m, d) = problem.dims();
    let mode = problem.mode();
    let lambda = config.lambda;

    let mobs = problem.m_obs().as_faer().to_owned();
    let dict = problem.dictionary().as_faer().to_owned();
    let lf = prox::lipschitz_constant(problem.dictionary())?;
    let inv_lf = 1.0 / lf;
    let scale = problem.m_obs().frobenius_norm().max(1.0);

    let nu0 = match config.nu_initial {
        Some(v) => v,
        None => matrix_norm(problem.m_obs(), NormKind::Spectral)?,
    };
    let mut nu = nu0.max(config.nu_floor);

    let (mut l, mut s) = match start {
        Some((l0, s0)) => {
            if l0.shape() != (n, m) || s0.shape() != (d, m) {
                return Err(Error::Dimension(
                    "starting point does not fit the problem".into(),
                ));
            }
            (l0.as_faer().to_owned(), s0.as_faer().to_owned())
        }
        None => (Mat::<f64>::zeros(n, m), Mat::<f64>::zeros(d, m)),
    };
    let mut l_prev = l.clone();
    let mut s_prev = s.clone();
    let mut ds = &dict * &s;
    let mut ds_prev = ds.clone();
    let (mut t, mut t_prev) = (1.0_f64, 1.0_f64);

    let mut resid = Mat::<f64>::zeros(n, m);
    let mut gl = Mat::<f64>::zeros(n, m);
    let mut l_new = Mat::<f64>::zeros(n, m);
    let mut ds_new = Mat::<f64>::zeros(n, m);
    let mut s_new = Mat::<f64>::zeros(d, m);

    let mut records = Vec::with_capacity(config.max_iters.min(4096));
    let mut best: Option<(f64, Mat<f64>, Mat<f64>, f64)> = None;

    for iter in 1..=config.max_iters {
        let coef = if config.momentum {
            (t_prev - 1.0) / t
        } else {
            0.0
        };

        // momentum point, residual M - T_L - D T_S and the gradient step on L
        for j in 0..m {
            let (lc, lp) = (l.col_as_slice(j), l_prev.col_as_slice(j));
            let (dc, dp) = (ds.col_as_slice(j), ds_prev.col_as_slice(j));
            let mc = mobs.col_as_slice(j);
            let rc = resid.col_as_slice_mut(j);
            let gc = gl.col_as_slice_mut(j);
            for i in 0..n {
                let tl = lc[i] + coef * (lc[i] - lp[i]);
                let r = mc[i] - tl - (dc[i] + coef * (dc[i] - dp[i]));
                rc[i] = r;
                gc[i] = tl + inv_lf * r;
            }
        }
        // gradient step on S, computed in place in s_new
        for j in 0..m {
            let (sc, sp) = (s.col_as_slice(j), s_prev.col_as_slice(j));
            let out = s_new.col_as_slice_mut(j);
            for i in 0..d {
                out[i] = sc[i] + coef * (sc[i] - sp[i]);
            }
        }
        matmul(
            s_new.as_mut(),
            Accum::Add,
            dict.transpose(),
            &resid,
            inv_lf,
            Par::Seq,
        );

        let svt = svt_into(gl.as_ref(), nu * inv_lf, &mut l_new)?;
        let tau_s = nu * lambda * inv_lf;
        match mode {
            SparsityMode::EntryWise => entry_shrink_in_place(&mut s_new, tau_s),
            SparsityMode::ColumnWise => column_shrink_in_place(&mut s_new, tau_s),
        }
        matmul(
            ds_new.as_mut(),
            Accum::Replace,
            &dict,
            &s_new,
            1.0,
            Par::Seq,
        );

        let (mut fit2, mut dl2) = (0.0, 0.0);
        for j in 0..m {
            let (ln, lc) = (l_new.col_as_slice(j), l.col_as_slice(j));
            let (mc, dn) = (mobs.col_as_slice(j), ds_new.col_as_slice(j));
            for i in 0..n {
                let f = mc[i] - ln[i] - dn[i];
                let dl = ln[i] - lc[i];
                fit2 += f * f;
                dl2 += dl * dl;
            }
        }
        let (mut ds2, mut penalty) = (0.0, 0.0);
        for j in 0..m {
            let (sn, sc) = (s_new.col_as_slice(j), s.col_as_slice(j));
            let mut col2 = 0.0;
            for i in 0..d {
                let x = sn[i] - sc[i];
                ds2 += x * x;
                col2 += sn[i] * sn[i];
                if mode == SparsityMode::EntryWise {
                    penalty += sn[i].abs();
                }
            }
            if mode == SparsityMode::ColumnWise {
                penalty += col2.sqrt();
            }
        }
        let residual = fit2.sqrt();
        let objective = nu * (svt.nuclear + lambda * penalty) + 0.5 * fit2;
        if !objective.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite objective at iteration {iter}"
            )));
        }
        let change = dl2.max(ds2).sqrt() / scale;

        records.push(TraceRecord {
            objective,
            residual,
            nu,
            t,
        });

        // new -> current -> previous; the old previous becomes scratch
        core::mem::swap(&mut l_prev, &mut l);
        core::mem::swap(&mut l, &mut l_new);
        core::mem::swap(&mut s_prev, &mut s);
        core::mem::swap(&mut s, &mut s_new);
        core::mem::swap(&mut ds_prev, &mut ds);
        core::mem::swap(&mut ds, &mut ds_new);
        let t_next = (1.0 + (4.0 * t * t + 1.0).sqrt()) / 2.0;
        t_prev = t;
        t = t_next;

        let at_floor = nu <= config.nu_floor;
        if at_floor && change < config.convergence_tol {
            return Ok(finish(l, s, residual, objective, iter, true, records));
        }
        if at_floor && best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, l.clone(), s.clone(), residual));
        }
        nu = (config.continuation_decay * nu).max(config.nu_floor);
    }

    let iters = config.max_iters;
    Ok(match best {
        Some((objective, bl, bs, residual)) => {
            finish(bl, bs, residual, objective, iters, false, records)
        }
        None => {
            let last = *records.last().expect("at least one iteration");
            finish(l, s, last.residual, last.objective, iters, false, records)
        }
    })
}

fn finish(
    l: Mat<f64>,
    s: Mat<f64>,
    residual: f64,
    objective: f64,
    iterations: usize,
    converged: bool,
    records: Vec<TraceRecord>,
) -> Solution {
    Solution {
        components: Components {
            low_rank: from_faer(l.as_ref()),
            sparse_coeff: from_faer(s.as_ref()),
            iterations,
            final_residual: residual,
            objective,
            converged,
        },
        trace: SolveTrace { records },
    }
}

/// `count` evenly spaced values in `(0, upper]`, where `upper` is
/// `||D^T M||_inf / ||M||_2` (largest absolute entry) for entry-wise problems
/// and `||D^T M||_{inf,2} / ||M||_2` (largest column norm) for column-wise ones.
pub fn lambda_grid(problem: &DemixProblem, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "lambda grid needs at least one value".into(),
        ));
    }
    let m = problem.m_obs();
    let spectral = matrix_norm(m, NormKind::Spectral)?;
    if spectral == 0.0 {
        return Err(Error::Degenerate(
            "observed matrix is zero; lambda grid undefined".into(),
        ));
    }
    let dtm = problem.dictionary().transpose().matmul(m);
    let kind = match problem.mode() {
        SparsityMode::EntryWise => NormKind::LinfEntrywise,
        SparsityMode::ColumnWise => NormKind::Linf2MaxColumn,
    };
    let upper = matrix_norm(&dtm, kind)? / spectral;
    Ok((1..=count)
        .map(|k| upper * k as f64 / count as f64)
        .collect())
}

/// Objective value at `(L, S)`:
/// `nu (||L||_* + lambda P(S)) + 1/2 ||M - L - D S||_F^2`, with `P` the
/// entrywise l1 norm or the sum of column norms according to the mode.
pub fn objective_value(
    problem: &DemixProblem,
    l: &DenseMatrix,
    s: &DenseMatrix,
    lambda: f64,
    nu: f64,
) -> Result<f64> {
    let (n, m, d) = problem.dims();
    if l.shape() != (n, m) || s.shape() != (d, m) {
        return Err(Error::Dimension("components do not fit the problem".into()));
    }
    let fit = &(problem.m_obs() - l) - &problem.dictionary().matmul(s);
    let kind = match problem.mode() {
        SparsityMode::EntryWise => NormKind::L1Entrywise,
        SparsityMode::ColumnWise => NormKind::L12Columns,
    };
    let nuclear = matrix_norm(l, NormKind::Nuclear)?;
    let penalty = matrix_norm(s, kind)?;
    let r = fit.frobenius_norm();
    Ok(nu * (nuclear + lambda * penalty) + 0.5 * r * r)
}
