//! Incoherence parameters of a low-rank plus dictionary-sparse pair, the
//! recovery bounds built from them, and an explicit dual certificate check
//! for small instances.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use faer::{Mat, MatMut, MatRef};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    self, column_space_basis, operator_norm, singular_values, spectral_norm, svd, DenseMatrix,
    LinearOperator, PowerIterationOptions,
};
use crate::model::SparsityMode;
use crate::{Error, Result};

/// Largest `n·m` (and `d·m`) for which the certificate is materialized.
pub const CERTIFICATE_SIZE_LIMIT: usize = 2500;
/// Residual below which the equality conditions of the certificate count as met.
pub const CERTIFICATE_RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Number of random sparse unit vectors behind the fat-dictionary frame bounds.
pub const DEFAULT_FRAME_SAMPLES: usize = 10_000;

/// Support of the sparse coefficient matrix: `(row, column)` pairs in
/// entry-wise mode, column indices in column-wise mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Entries(Vec<(usize, usize)>),
    Columns(Vec<usize>),
}

impl Support {
    /// Exact nonzero pattern of `s` in the given mode.
    pub fn of(s: &DenseMatrix, mode: SparsityMode) -> Self {
        match mode {
            SparsityMode::EntryWise => {
                let mut entries = Vec::new();
                for j in 0..s.cols() {
                    for i in 0..s.rows() {
                        if s.get(i, j) != 0.0 {
                            entries.push((i, j));
                        }
                    }
                }
                Support::Entries(entries)
            }
            SparsityMode::ColumnWise => {
                Support::Columns((0..s.cols()).filter(|&j| s.column_norm(j) > 0.0).collect())
            }
        }
    }

    pub fn mode(&self) -> SparsityMode {
        match self {
            Support::Entries(_) => SparsityMode::EntryWise,
            Support::Columns(_) => SparsityMode::ColumnWise,
        }
    }

    /// Number of nonzero entries, or of nonzero columns.
    pub fn len(&self) -> usize {
        match self {
            Support::Entries(e) => e.len(),
            Support::Columns(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorted, deduplicated support rows of each of the `m` columns.
    fn rows_per_column(&self, d: usize, m: usize) -> Result<Vec<Vec<usize>>> {
        let mut rows = vec![Vec::new(); m];
        match self {
            Support::Entries(entries) => {
                for &(i, j) in entries {
                    if i >= d || j >= m {
                        return Err(Error::Dimension(format!(
                            "support entry ({i}, {j}) outside {d}x{m}"
                        )));
                    }
                    rows[j].push(i);
                }
            }
            Support::Columns(cols) => {
                for &j in cols {
                    if j >= m {
                        return Err(Error::Dimension(format!(
                            "support column {j} outside {m} columns"
                        )));
                    }
                    rows[j] = (0..d).collect();
                }
            }
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncoherenceOptions {
    pub power: PowerIterationOptions,
    pub frame_samples: usize,
    pub frame_seed: u64,
    /// Sparsity of the vectors sampled for fat-dictionary frame bounds. When
    /// absent: the largest per-column support size in entry-wise mode, `n`
    /// in column-wise mode.
    pub sparsity_level: Option<usize>,
}

impl Default for IncoherenceOptions {
    fn default() -> Self {
        Self {
            power: PowerIterationOptions::default(),
            frame_samples: DEFAULT_FRAME_SAMPLES,
            frame_seed: 0xF7A3_E0B0,
            sparsity_level: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceReport {
    pub mu: f64,
    pub gamma_u: f64,
    pub gamma_v: f64,
    pub beta_u: f64,
    pub xi_e: f64,
    pub xi_c: f64,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    /// True when the frame bounds are Monte Carlo estimates (fat dictionary).
    pub alpha_estimated: bool,
    pub rank_r: usize,
    pub mode: SparsityMode,
    /// Whether the power iteration behind `mu` met its tolerance.
    pub mu_converged: bool,
}

fn check_dictionary(d: &DenseMatrix) -> Result<()> {
    for (i, norm) in d.column_norms().into_iter().enumerate() {
        if norm == 0.0 {
            return Err(Error::ZeroDictionaryColumn(i));
        }
    }
    Ok(())
}

/// Left and right singular vectors of the nonzero singular values.
fn singular_subspaces(l: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let f = svd(l, None)?;
    Ok((f.u, f.v))
}

pub fn incoherence_report(
    l: &DenseMatrix,
    d: &DenseMatrix,
    support: &Support,
    mode: SparsityMode,
) -> Result<IncoherenceReport> {
    incoherence_report_with(l, d, support, mode, &IncoherenceOptions::default())
}

pub fn incoherence_report_with(
    l: &DenseMatrix,
    d: &DenseMatrix,
    support: &Support,
    mode: SparsityMode,
    opts: &IncoherenceOptions,
) -> Result<IncoherenceReport> {
    let (n, m) = l.shape();
    let dd = d.cols();
    if d.rows() != n {
        return Err(Error::Dimension(format!(
            "L has {n} rows, D has {}",
            d.rows()
        )));
    }
    if support.mode() != mode {
        return Err(Error::InvalidParameter(
            "support kind does not match the sparsity mode".into(),
        ));
    }
    check_dictionary(d)?;
    let rows = support.rows_per_column(dd, m)?;
    let (u, v) = singular_subspaces(l)?;
    let r = u.cols();

    let ut_d = u.transpose().matmul(d);
    let gamma_u = (0..dd)
        .map(|i| ut_d.column_norm(i).powi(2) / d.column_norm(i).powi(2))
        .fold(0.0, f64::max);
    let gamma_v = (0..m)
        .map(|i| v.row(i).iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max);

    // (I - P_U) restricted to range(D); the ratio only depends on D u
    let w = column_space_basis(d)?;
    let residual = &w - &u.matmul(&u.transpose().matmul(&w));
    let beta_u = spectral_norm(&residual)?.powi(2);

    let dtuv = ut_d.transpose().matmul(&v.transpose());
    let xi_e = dtuv.max_abs();
    let xi_c = dtuv.column_norms().into_iter().fold(0.0, f64::max);

    let (alpha_lower, alpha_upper, alpha_estimated) = if dd <= n {
        let s = singular_values(d)?;
        let lo = if s.len() == dd { s[dd - 1] } else { 0.0 };
        (lo * lo, s[0] * s[0], false)
    } else {
        let k = opts.sparsity_level.unwrap_or(match mode {
            SparsityMode::EntryWise => rows.iter().map(Vec::len).max().unwrap_or(0).max(1),
            SparsityMode::ColumnWise => n,
        });
        let (lo, hi) = sparse_frame_bounds(d, k, opts.frame_samples, opts.frame_seed)?;
        (lo, hi, true)
    };

    let op = ProjectedDictionaryOperator::new(&u, &v, d, &rows)?;
    let norm = operator_norm(&op, opts.power)?;

    Ok(IncoherenceReport {
        mu: norm.value,
        gamma_u,
        gamma_v,
        beta_u,
        xi_e,
        xi_c,
        alpha_lower,
        alpha_upper,
        alpha_estimated,
        rank_r: r,
        mode,
        mu_converged: norm.converged,
    })
}

/// Smallest and largest `||D v||^2` over random `k`-sparse unit vectors.
pub fn sparse_frame_bounds(
    d: &DenseMatrix,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (n, dd) = d.shape();
    if k == 0 || k > dd || samples == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= {dd} and at least one sample, got k={k}, samples={samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..dd).collect();
    let mut coef = vec![0.0; k];
    let mut dv = vec![0.0; n];
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for _ in 0..samples {
        for a in 0..k {
            let b = rng.random_range(a..dd);
            idx.swap(a, b);
        }
        coef.iter_mut()
            .for_each(|c| *c = rng.sample(StandardNormal));
        let norm = linalg::norm2(&coef);
        if norm == 0.0 {
            continue;
        }
        dv.fill(0.0);
        for (a, &c) in coef.iter().enumerate() {
            let col = idx[a];
            for (i, o) in dv.iter_mut().enumerate() {
                *o += d.get(i, col) * c / norm;
            }
        }
        let e = linalg::dot(&dv, &dv);
        lo = lo.min(e);
        hi = hi.max(e);
    }
    Ok((lo, hi))
}

/// `Z -> P_L(Q_T Z)` on n×m matrices flattened column-major, where `Q_T`
/// projects onto `{D H : H supported on the given rows per column}`. Its
/// norm is the largest fraction of a dictionary-sparse matrix kept by `P_L`.
struct ProjectedDictionaryOperator {
    n: usize,
    m: usize,
    u: Mat<f64>,
    v: Mat<f64>,
    bases: Vec<Mat<f64>>,
    column_basis: Vec<Option<usize>>,
}

impl ProjectedDictionaryOperator {
    fn new(u: &DenseMatrix, v: &DenseMatrix, d: &DenseMatrix, rows: &[Vec<usize>]) -> Result<Self> {
        let mut seen: BTreeMap<&[usize], usize> = BTreeMap::new();
        let mut bases = Vec::new();
        let mut column_basis = Vec::with_capacity(rows.len());
        for r in rows {
            if r.is_empty() {
                column_basis.push(None);
                continue;
            }
            let idx = match seen.get(r.as_slice()) {
                Some(&i) => i,
                None => {
                    let b = column_space_basis(&d.select_columns(r))?;
                    bases.push(b.as_faer().to_owned());
                    seen.insert(r, bases.len() - 1);
                    bases.len() - 1
                }
            };
            column_basis.push(Some(idx));
        }
        Ok(Self {
            n: u.rows(),
            m: v.rows(),
            u: u.as_faer().to_owned(),
            v: v.as_faer().to_owned(),
            bases,
            column_basis,
        })
    }

    fn project_support(&self, x: &mut [f64]) {
        let n = self.n;
        for (j, basis) in self.column_basis.iter().enumerate() {
            let col = &mut x[j * n..(j + 1) * n];
            match basis {
                None => col.fill(0.0),
                Some(b) => {
                    let b = &self.bases[*b];
                    let coef: Vec<f64> = (0..b.ncols())
                        .map(|c| linalg::dot(b.col_as_slice(c), col))
                        .collect();
                    col.fill(0.0);
                    for (c, &w) in coef.iter().enumerate() {
                        col.iter_mut()
                            .zip(b.col_as_slice(c))
                            .for_each(|(o, bi)| *o += w * bi);
                    }
                }
            }
        }
    }

    /// `P_L X = X - (I - P_U) X (I - P_V)`.
    fn project_low_rank(&self, x: &[f64], out: &mut [f64]) {
        let xm = MatRef::from_column_major_slice(x, self.n, self.m);
        let y = xm - &self.u * (self.u.transpose() * xm);
        let w = &y - (&y * &self.v) * self.v.transpose();
        let mut o = MatMut::from_column_major_slice_mut(out, self.n, self.m);
        o.copy_from(xm - &w);
    }
}

impl LinearOperator for ProjectedDictionaryOperator {
    fn input_dim(&self) -> usize {
        self.n * self.m
    }

    fn output_dim(&self) -> usize {
        self.n * self.m
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut z = x.to_vec();
        self.project_support(&mut z);
        self.project_low_rank(&z, out);
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        self.project_low_rank(y, out);
        self.project_support(out);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryBounds {
    pub mode: SparsityMode,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `c_t` (thin) or `c_f` (fat); entry-wise only.
    pub c_const: Option<f64>,
    /// `C_e` or `C_c`.
    pub big_c: f64,
    pub s_max: f64,
    pub rank_bound: f64,
    pub feasible: bool,
    pub reason: Option<String>,
}

/// Interval for the regularization weight, largest admissible sparsity and
/// rank condition for a pair with the given incoherence parameters. `s` is
/// the number of nonzero entries (entry-wise) or columns (column-wise); `k`
/// is the per-column sparsity, required for a fat dictionary in entry-wise
/// mode.
pub fn recovery_bounds(
    report: &IncoherenceReport,
    n: usize,
    m: usize,
    d: usize,
    s: usize,
    r: usize,
    k: Option<usize>,
) -> Result<RecoveryBounds> {
    if n == 0 || m == 0 || d == 0 {
        return Err(Error::InvalidParameter(
            "dimensions must be positive".into(),
        ));
    }
    let IncoherenceReport {
        mu,
        gamma_u,
        gamma_v,
        beta_u,
        xi_e,
        xi_c,
        alpha_lower: al,
        alpha_upper: au,
        ..
    } = *report;
    if !(al > 0.0 && au >= al && au.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "frame bounds must satisfy 0 < {al} <= {au}"
        )));
    }
    let (sf, rf) = (s as f64, r as f64);
    let one_mu = 1.0 - mu;
    let lambda_max = (al.sqrt() * one_mu - (rf * au).sqrt() * mu) / sf.sqrt();
    let mut reason = None;

    let (lambda_min, c_const, big_c, s_max, rank_bound) = match report.mode {
        SparsityMode::EntryWise => {
            let spread = if d <= n {
                sf.min(d as f64)
            } else {
                match k {
                    Some(k) => k as f64,
                    None => {
                        return Err(Error::InvalidParameter(
                            "a fat dictionary in entry-wise mode needs the column sparsity k"
                                .into(),
                        ))
                    }
                }
            };
            let inner = spread + sf * gamma_v;
            let c = 0.5 * au * ((1.0 + 2.0 * gamma_u) * inner + 2.0 * gamma_v * sf.min(m as f64))
                - 0.5 * al * inner;
            let denom = al * one_mu * one_mu - c;
            let big_c = c / denom;
            let s_max = one_mu * one_mu * (m as f64) / (2.0 * rf);
            let (lambda_min, rank_bound) = if denom > 0.0 && (0.0..1.0).contains(&big_c) {
                let ratio = (1.0 + big_c) / (1.0 - big_c);
                let rank = rank_condition(al, au, mu, xi_e * ratio, sf);
                (ratio * xi_e, rank)
            } else {
                reason = Some(format!(
                    "C_e = {big_c} outside [0, 1) (denominator sign flip)"
                ));
                (f64::INFINITY, 0.0)
            };
            (lambda_min, Some(c), big_c, s_max, rank_bound)
        }
        SparsityMode::ColumnWise => {
            let big_c = (au / al) * gamma_v * beta_u / (one_mu * one_mu);
            let s_max = (al / (au * gamma_v)) * one_mu * one_mu / beta_u;
            let denom = 1.0 - sf * big_c;
            let lambda_min = if denom > 0.0 && big_c.is_finite() {
                (xi_c + (rf * sf * au).sqrt() * mu * big_c) / denom
            } else {
                reason = Some(format!(
                    "s_c * C_c = {} >= 1 (denominator sign flip)",
                    sf * big_c
                ));
                f64::INFINITY
            };
            (
                lambda_min,
                None,
                big_c,
                s_max,
                rank_condition(al, au, mu, xi_c, sf),
            )
        }
    };

    if reason.is_none() {
        if lambda_min < 0.0 {
            reason = Some("lambda_min is negative".into());
        } else if lambda_min >= lambda_max || lambda_min.is_nan() || lambda_max.is_nan() {
            reason = Some(format!(
                "empty interval: lambda_min {lambda_min} >= lambda_max {lambda_max}"
            ));
        } else if sf > s_max || s_max.is_nan() {
            reason = Some(format!("sparsity {s} exceeds s_max {s_max}"));
        }
    }
    Ok(RecoveryBounds {
        mode: report.mode,
        lambda_min,
        lambda_max,
        c_const,
        big_c,
        s_max,
        rank_bound,
        feasible: reason.is_none(),
        reason,
    })
}

/// `(sqrt(al/au) (1-mu)/mu - xi sqrt(s) / (sqrt(au) mu))^2`, infinite at
/// `mu = 0` and zero when the base is not positive.
fn rank_condition(al: f64, au: f64, mu: f64, xi: f64, s: f64) -> f64 {
    if mu == 0.0 {
        return f64::INFINITY;
    }
    let base = (al / au).sqrt() * (1.0 - mu) / mu - xi * s.sqrt() / (au.sqrt() * mu);
    if base > 0.0 {
        base * base
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub mode: SparsityMode,
    pub lambda: f64,
    /// `||P_L(Gamma) - U V^T||_F`.
    pub c1_residual: f64,
    /// Frobenius distance of the support part of `D^T Gamma` from its target.
    pub c2_residual: f64,
    /// `||P_{L-perp}(Gamma)||_2`, must be below 1.
    pub c3_value: f64,
    /// Off-support part of `D^T Gamma` in the max or max-column norm, must be below `lambda`.
    pub c4_value: f64,
    pub sigma_min: f64,
    /// `sqrt(alpha_lower) (1 - mu)`.
    pub sigma_min_bound: f64,
    pub b_norm: f64,
    pub support_size: usize,
    pub holds: bool,
}

/// Builds the least-norm dual certificate `Gamma = U V^T + (I-P_U) X (I-P_V)`
/// for the pair `(l, s)` by materializing the support rows of
/// `(I - P_V) ⊗ D^T (I - P_U)`, then evaluates the four optimality conditions.
pub fn verify_dual_certificate(
    l: &DenseMatrix,
    s: &DenseMatrix,
    d: &DenseMatrix,
    mode: SparsityMode,
    lambda: f64,
) -> Result<CertificateReport> {
    let (n, m) = l.shape();
    let dd = d.cols();
    if d.rows() != n || s.shape() != (dd, m) {
        return Err(Error::Dimension(format!(
            "L {n}x{m}, D {}x{dd}, S {}x{} are inconsistent",
            d.rows(),
            s.rows(),
            s.cols()
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and positive, got {lambda}"
        )));
    }
    if n * m > CERTIFICATE_SIZE_LIMIT || dd * m > CERTIFICATE_SIZE_LIMIT {
        return Err(Error::SizeLimit(format!(
            "certificate needs n*m and d*m <= {CERTIFICATE_SIZE_LIMIT}, got {} and {}",
            n * m,
            dd * m
        )));
    }
    let support = Support::of(s, mode);
    let report = incoherence_report(l, d, &support, mode)?;
    let (u, v) = singular_subspaces(l)?;
    let pu_perp = &DenseMatrix::identity(n) - &u.matmul(&u.transpose());
    let pv_perp = &DenseMatrix::identity(m) - &v.matmul(&v.transpose());
    let uvt = u.matmul(&v.transpose());
    let dtuv = d.transpose().matmul(&uvt);
    let g = d.transpose().matmul(&pu_perp);

    // target sign pattern on the support
    let mut target = DenseMatrix::zeros(dd, m);
    let mut on_support = vec![false; dd * m];
    match &support {
        Support::Entries(entries) => {
            for &(i, j) in entries {
                target.set(i, j, lambda * s.get(i, j).signum())?;
                on_support[j * dd + i] = true;
            }
        }
        Support::Columns(cols) => {
            for &j in cols {
                let norm = s.column_norm(j);
                for i in 0..dd {
                    target.set(i, j, lambda * s.get(i, j) / norm)?;
                    on_support[j * dd + i] = true;
                }
            }
        }
    }
    let rows: Vec<(usize, usize)> = (0..m)
        .flat_map(|j| (0..dd).map(move |i| (i, j)))
        .filter(|&(i, j)| on_support[j * dd + i])
        .collect();
    let b: Vec<f64> = rows
        .iter()
        .map(|&(i, j)| target.get(i, j) - dtuv.get(i, j))
        .collect();
    let b_norm = linalg::norm2(&b);

    // A_S row (i, j), column vec index (k, c) -> pv_perp[j, c] * g[i, k]
    let a_s = DenseMatrix::from_fn(rows.len(), n * m, |row, col| {
        let (i, j) = rows[row];
        pv_perp.get(j, col / n) * g.get(i, col % n)
    });
    let mut x = DenseMatrix::zeros(n, m);
    let mut sigma_min = f64::INFINITY;
    if !rows.is_empty() {
        let degenerate =
            || Error::Degenerate("degenerate support geometry: A_S A_S^T is singular".into());
        if rows.len() > n * m {
            return Err(degenerate());
        }
        let f = svd(&a_s, None)?;
        if f.sigma.len() < rows.len() {
            return Err(degenerate());
        }
        sigma_min = f.sigma[rows.len() - 1];
        if sigma_min <= 1e-10 * f.sigma[0].max(1.0) {
            return Err(degenerate());
        }
        // least-norm solution V diag(1/sigma) U^T b
        let coef: Vec<f64> = (0..f.sigma.len())
            .map(|c| (0..rows.len()).map(|i| f.u.get(i, c) * b[i]).sum::<f64>() / f.sigma[c])
            .collect();
        for idx in 0..n * m {
            let val: f64 = coef
                .iter()
                .enumerate()
                .map(|(c, w)| f.v.get(idx, c) * w)
                .sum();
            x.set(idx % n, idx / n, val)?;
        }
    }

    let perp = pu_perp.matmul(&x).matmul(&pv_perp);
    let gamma = &uvt + &perp;
    let dtg = d.transpose().matmul(&gamma);
    let pl_gamma = &gamma - &pu_perp.matmul(&gamma).matmul(&pv_perp);
    let c1_residual = (&pl_gamma - &uvt).frobenius_norm();
    let mut c2 = 0.0;
    for &(i, j) in &rows {
        c2 += (dtg.get(i, j) - target.get(i, j)).powi(2);
    }
    let c2_residual = c2.sqrt();
    let c3_value = spectral_norm(&perp)?;
    let c4_value = match mode {
        SparsityMode::EntryWise => {
            let mut top = 0.0_f64;
            for j in 0..m {
                for i in 0..dd {
                    if !on_support[j * dd + i] {
                        top = top.max(dtg.get(i, j).abs());
                    }
                }
            }
            top
        }
        SparsityMode::ColumnWise => (0..m)
            .filter(|&j| dd == 0 || !on_support[j * dd])
            .map(|j| dtg.column_norm(j))
            .fold(0.0, f64::max),
    };
    let holds = c1_residual < CERTIFICATE_RESIDUAL_TOLERANCE
        && c2_residual < CERTIFICATE_RESIDUAL_TOLERANCE
        && c3_value < 1.0
        && c4_value < lambda;
    Ok(CertificateReport {
        mode,
        lambda,
        c1_residual,
        c2_residual,
        c3_value,
        c4_value,
        sigma_min,
        sigma_min_bound: report.alpha_lower.max(0.0).sqrt() * (1.0 - report.mu),
        b_norm,
        support_size: rows.len(),
        holds,
    })
}
