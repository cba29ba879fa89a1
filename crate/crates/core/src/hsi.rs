//! Hyperspectral target localization: cubes, unfolding to a bands × pixels
//! matrix, normalization, dictionaries sampled from or learned on a target
//! class, and the end-to-end scoring pipeline.
//!
//! Pixel order is column-major: matrix column `j` holds the spectrum of the
//! pixel at row `j % height`, column `j / height`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apg;
use crate::baselines::{matched_filter, pinv_transform};
use crate::eval::{self, OperatingPoint, RocCurve, ThresholdMode, DEFAULT_THRESHOLD_COUNT};
use crate::linalg::{self, from_faer, DenseMatrix};
use crate::model::{normalize_columns, DemixProblem, SolverConfig, SparsityMode};
use crate::{Error, Result};

/// Image cube of `bands` planes of `height × width` pixels.
///
/// `voxels[b * height * width + row * width + col]` is band `b` at pixel
/// `(row, col)`; labels are row-major `height × width` class ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    voxels: Vec<f64>,
    labels: Option<Vec<u32>>,
}

impl HyperCube {
    pub fn new(
        height: usize,
        width: usize,
        bands: usize,
        voxels: Vec<f64>,
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::Dimension("cube dimensions must be positive".into()));
        }
        let plane = height
            .checked_mul(width)
            .ok_or_else(|| Error::Dimension("cube too large".into()))?;
        if plane.checked_mul(bands) != Some(voxels.len()) {
            return Err(Error::Dimension(format!(
                "{height}x{width}x{bands} cube needs {} voxels, got {}",
                plane * bands,
                voxels.len()
            )));
        }
        if voxels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cube voxels"));
        }
        if let Some(l) = &labels {
            if l.len() != plane {
                return Err(Error::Dimension(format!(
                    "label map needs {plane} entries, got {}",
                    l.len()
                )));
            }
        }
        Ok(Self {
            height,
            width,
            bands,
            voxels,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn voxels(&self) -> &[f64] {
        &self.voxels
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn with_labels(self, labels: Vec<u32>) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.bands,
            self.voxels,
            Some(labels),
        )
    }

    pub fn voxel(&self, band: usize, row: usize, col: usize) -> f64 {
        self.voxels[band * self.height * self.width + row * self.width + col]
    }

    /// Label of each matrix column (unfolded pixel order).
    pub fn unfolded_labels(&self) -> Option<Vec<u32>> {
        let labels = self.labels.as_ref()?;
        Some(
            (0..self.pixels())
                .map(|j| labels[(j % self.height) * self.width + j / self.height])
                .collect(),
        )
    }

    /// Matrix columns belonging to `class`, in unfolded order.
    pub fn class_columns(&self, class: u32) -> Result<Vec<usize>> {
        let labels = self
            .unfolded_labels()
            .ok_or_else(|| Error::InvalidParameter("cube has no label map".into()))?;
        let cols: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == class).collect();
        if cols.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "class {class} is absent from the label map"
            )));
        }
        Ok(cols)
    }
}

/// Bands × pixels matrix with pixels in column-major order.
pub fn unfold(cube: &HyperCube) -> DenseMatrix {
    let h = cube.height;
    DenseMatrix::from_fn(cube.bands, cube.pixels(), |b, j| {
        cube.voxel(b, j % h, j / h)
    })
}

/// Inverse of [`unfold`]; the result carries no labels.
pub fn fold(m: &DenseMatrix, height: usize, width: usize) -> Result<HyperCube> {
    if height.checked_mul(width) != Some(m.cols()) {
        return Err(Error::Dimension(format!(
            "{} columns do not fill a {height}x{width} image",
            m.cols()
        )));
    }
    let plane = height * width;
    let mut voxels = vec![0.0; plane * m.rows()];
    for b in 0..m.rows() {
        for j in 0..m.cols() {
            voxels[b * plane + (j % height) * width + j / height] = m.get(b, j);
        }
    }
    HyperCube::new(height, width, m.rows(), voxels, None)
}

/// Scales the data by its largest absolute entry. A sampled dictionary is
/// scaled the same way and then given unit columns; a learned one is
/// returned unchanged.
pub fn normalize(
    m_raw: &DenseMatrix,
    dict_raw: &DenseMatrix,
    dict_is_learned: bool,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let top = m_raw.max_abs();
    if top == 0.0 {
        return Err(Error::Degenerate("data matrix is zero".into()));
    }
    let m = m_raw.map(|x| x / top);
    let d = if dict_is_learned {
        dict_raw.clone()
    } else {
        normalize_columns(&dict_raw.map(|x| x / top))?
    };
    Ok((m, d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnOptions {
    /// Iteration cap of each sparse coding pass.
    pub inner_iters: usize,
    /// Relative objective change at which a sparse coding pass stops.
    pub inner_tol: f64,
    /// Ridge added to `A A^T` in the dictionary update.
    pub ridge: f64,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            inner_iters: 300,
            inner_tol: 1e-10,
            ridge: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedDictionary {
    /// Unit-norm atoms, `n × d`.
    pub dictionary: DenseMatrix,
    /// Sparse codes, `d × p`.
    pub codes: DenseMatrix,
    /// `||Y - D A||_F^2 + rho ||A||_1` at the start (codes zero) and after
    /// every outer iteration.
    pub objective: Vec<f64>,
    /// Outer iterations whose dictionary update was rejected for not
    /// decreasing the objective.
    pub rejected_updates: usize,
}

pub fn learn_dictionary(
    y: &DenseMatrix,
    d: usize,
    rho: f64,
    outer_iters: usize,
    seed: u64,
) -> Result<LearnedDictionary> {
    learn_dictionary_with(y, d, rho, outer_iters, seed, &LearnOptions::default())
}

fn dict_objective(y: &Mat<f64>, d: &Mat<f64>, a: &Mat<f64>, rho: f64) -> f64 {
    let r = y - d * a;
    let l1: f64 = (0..a.ncols())
        .map(|j| a.col_as_slice(j).iter().map(|x| x.abs()).sum::<f64>())
        .sum();
    r.norm_l2().powi(2) + rho * l1
}

/// Alternates monotone FISTA sparse coding of `Y ≈ D A` with a ridge
/// least-squares dictionary update followed by column renormalization. The
/// dictionary update is kept only when it does not raise the objective, so
/// the objective trace is nonincreasing. Atoms whose codes vanish are
/// restarted from the worst-represented voxel.
pub fn learn_dictionary_with(
    y: &DenseMatrix,
    d: usize,
    rho: f64,
    outer_iters: usize,
    seed: u64,
    opts: &LearnOptions,
) -> Result<LearnedDictionary> {
    let (n, p) = y.shape();
    if d == 0 || d > p {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= d <= {p} atoms, got {d}"
        )));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let norms = y.column_norms();
    let mut candidates: Vec<usize> = (0..p).filter(|&j| norms[j] > 0.0).collect();
    if candidates.len() < d {
        return Err(Error::Degenerate(format!(
            "only {} nonzero voxels for {d} atoms",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for a in 0..d {
        let b = rng.random_range(a..candidates.len());
        candidates.swap(a, b);
    }
    let yf = y.as_faer().to_owned();
    let mut dict = Mat::<f64>::from_fn(n, d, |i, k| yf[(i, candidates[k])] / norms[candidates[k]]);
    let mut codes = Mat::<f64>::zeros(d, p);
    let mut current = dict_objective(&yf, &dict, &codes, rho);
    let mut objective = vec![current];
    let mut rejected = 0;

    for _ in 0..outer_iters {
        current = sparse_code(&yf, &dict, &mut codes, rho, current, opts)?;

        // dead atoms: restart from the worst-represented voxels; codes stay zero
        let resid = &yf - &dict * &codes;
        let mut order: Vec<usize> = (0..p).collect();
        let rn: Vec<f64> = (0..p)
            .map(|j| linalg::norm2(resid.col_as_slice(j)))
            .collect();
        order.sort_by(|&a, &b| rn[b].total_cmp(&rn[a]));
        let mut next_worst = order.into_iter().filter(|&j| rn[j] > 0.0);
        for k in 0..d {
            if codes.row(k).iter().all(|&x| x == 0.0) {
                if let Some(j) = next_worst.next() {
                    for i in 0..n {
                        dict[(i, k)] = resid[(i, j)] / rn[j];
                    }
                }
            }
        }

        // ridge least squares D = Y A^T (A A^T + eps I)^-1, then unit columns
        if let Some((cand_d, cand_a)) = dictionary_update(&yf, &codes, &dict, opts.ridge)? {
            let value = dict_objective(&yf, &cand_d, &cand_a, rho);
            if value <= current {
                dict = cand_d;
                codes = cand_a;
                current = value;
            } else {
                rejected += 1;
            }
        }
        objective.push(current);
    }
    Ok(LearnedDictionary {
        dictionary: from_faer(dict.as_ref()),
        codes: from_faer(codes.as_ref()),
        objective,
        rejected_updates: rejected,
    })
}

/// Monotone FISTA on `||Y - D A||_F^2 + rho ||A||_1`, warm-started at
/// `codes`, whose objective is `start`. Returns the final objective.
fn sparse_code(
    y: &Mat<f64>,
    dict: &Mat<f64>,
    codes: &mut Mat<f64>,
    rho: f64,
    start: f64,
    opts: &LearnOptions,
) -> Result<f64> {
    let (d, p) = (codes.nrows(), codes.ncols());
    let top = linalg::symmetric_eigen((dict.transpose() * dict).as_ref())?
        .0
        .last()
        .copied()
        .unwrap_or(0.0);
    if top <= 0.0 || top.is_nan() {
        return Ok(start);
    }
    let step = 1.0 / (2.0 * top);
    let gram = dict.transpose() * dict;
    let dty = dict.transpose() * y;
    let mut best = start;
    let mut x = codes.clone();
    let mut x_prev = codes.clone();
    let mut z = Mat::<f64>::zeros(d, p);
    let mut t = 1.0_f64;
    let mut probe = codes.clone();
    let mut last = start;
    for _ in 0..opts.inner_iters {
        // gradient step on 2 (D^T D A - D^T Y) at the extrapolated point
        matmul(
            z.as_mut(),
            Accum::Replace,
            &gram,
            &probe,
            -2.0 * step,
            Par::Seq,
        );
        z += &probe + &dty * (2.0 * step);
        for j in 0..p {
            z.col_as_slice_mut(j)
                .iter_mut()
                .for_each(|v| *v = crate::prox::shrink(*v, rho * step));
        }
        let fz = dict_objective(y, dict, &z, rho);
        if !fz.is_finite() {
            return Err(Error::Numerical("sparse coding diverged".into()));
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        core::mem::swap(&mut x_prev, &mut x);
        if fz <= best {
            x.copy_from(&z);
            best = fz;
        } else {
            x.copy_from(&x_prev);
        }
        // x + t/t' (z - x) + (t-1)/t' (x - x_prev)
        probe = &x + (&z - &x) * (t / t_next) + (&x - &x_prev) * ((t - 1.0) / t_next);
        t = t_next;
        if (last - fz).abs() <= opts.inner_tol * fz.max(f64::MIN_POSITIVE) {
            break;
        }
        last = fz;
    }
    codes.copy_from(&x);
    Ok(best)
}

/// Ridge least-squares atoms for fixed codes, renormalized with the codes
/// rescaled so that `D A` is unchanged. Atoms without codes keep their
/// current value. `None` when the update breaks down.
fn dictionary_update(
    y: &Mat<f64>,
    codes: &Mat<f64>,
    current: &Mat<f64>,
    ridge: f64,
) -> Result<Option<(Mat<f64>, Mat<f64>)>> {
    let d = codes.nrows();
    let mut gram = codes * codes.transpose();
    for k in 0..d {
        gram[(k, k)] += ridge;
    }
    let rhs = y * codes.transpose();
    // D gram = rhs through the symmetric eigendecomposition of gram
    let (vals, vecs) = linalg::symmetric_eigen(gram.as_ref())?;
    if vals.first().is_none_or(|&v| v <= 0.0) {
        return Ok(None);
    }
    let inv = Mat::<f64>::from_fn(d, d, |i, j| {
        (0..d).map(|k| vecs[(i, k)] * vecs[(j, k)] / vals[k]).sum()
    });
    let mut dict = &rhs * &inv;
    let mut scaled = codes.clone();
    for k in 0..d {
        if codes.row(k).iter().all(|&x| x == 0.0) {
            dict.col_mut(k).copy_from(current.col(k));
            continue;
        }
        let norm = linalg::norm2(dict.col_as_slice(k));
        if !(norm > 0.0 && norm.is_finite()) {
            return Ok(None);
        }
        dict.col_as_slice_mut(k).iter_mut().for_each(|x| *x /= norm);
        for j in 0..scaled.ncols() {
            scaled[(k, j)] *= norm;
        }
    }
    Ok(Some((dict, scaled)))
}

/// Where the dictionary comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DictionarySpec {
    /// `count` distinct voxels of `class`, drawn with `seed`.
    Sampled { class: u32, count: usize, seed: u64 },
    /// `atoms` atoms learned on the voxels of `class`.
    Learned {
        class: u32,
        atoms: usize,
        rho: f64,
        iters: usize,
        seed: u64,
    },
    /// A given `bands × d` matrix, treated like sampled voxels.
    Provided(DenseMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizeMethod {
    /// Demixing with the dictionary.
    Direct,
    /// Demixing of `D^+ M` with an identity dictionary.
    PseudoInverse,
    /// Matched filter on `M`.
    MatchedFilter,
    /// Matched filter on `D^+ M`.
    MatchedFilterPinv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizeConfig {
    pub method: LocalizeMethod,
    pub mode: SparsityMode,
    pub lambda_count: usize,
    pub threshold_count: usize,
    /// Column threshold of the ROC traced over lambda.
    pub threshold_mode: ThresholdMode,
    /// Solver settings; the lambda field is replaced by each grid value.
    pub solver: SolverConfig,
}

impl LocalizeConfig {
    pub fn new(method: LocalizeMethod, mode: SparsityMode) -> Self {
        Self {
            method,
            mode,
            lambda_count: 100,
            threshold_count: DEFAULT_THRESHOLD_COUNT,
            threshold_mode: ThresholdMode::MaximizeAuc,
            solver: SolverConfig::new(1.0),
        }
    }
}

/// Scores of one detector run: per-pixel column norms of `S` for one
/// lambda, or the matched-filter scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub lambda: Option<f64>,
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub auc: Option<f64>,
}

/// Normalized problem, labels and lambda grid of one localization run.
#[derive(Debug, Clone)]
pub struct LocalizationSetup {
    pub config: LocalizeConfig,
    /// The problem handed to the solver (transformed for the pseudo-inverse methods).
    pub problem: DemixProblem,
    /// Normalized data and dictionary before any transformation.
    pub data: DenseMatrix,
    pub dictionary: DenseMatrix,
    pub labels: Option<Vec<bool>>,
    pub lambdas: Vec<f64>,
    pub height: usize,
    pub width: usize,
}

/// Builds `M` and `D` for the target `class` (when labels are present,
/// pixels of that class are the positives).
pub fn prepare(
    cube: &HyperCube,
    spec: &DictionarySpec,
    target: Option<u32>,
    config: LocalizeConfig,
) -> Result<LocalizationSetup> {
    let m_raw = unfold(cube);
    let class_of_spec = match spec {
        DictionarySpec::Sampled { class, .. } | DictionarySpec::Learned { class, .. } => {
            Some(*class)
        }
        DictionarySpec::Provided(_) => None,
    };
    let target = target.or(class_of_spec);
    let labels = match (cube.unfolded_labels(), target) {
        (Some(l), Some(class)) => {
            cube.class_columns(class)?;
            Some(l.iter().map(|&c| c == class).collect::<Vec<bool>>())
        }
        _ => None,
    };
    let (data, dictionary) = match spec {
        DictionarySpec::Sampled { class, count, seed } => {
            let mut cols = cube.class_columns(*class)?;
            if *count == 0 || *count > cols.len() {
                return Err(Error::InvalidParameter(format!(
                    "cannot sample {count} voxels from {} in class {class}",
                    cols.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for a in 0..*count {
                let b = rng.random_range(a..cols.len());
                cols.swap(a, b);
            }
            cols.truncate(*count);
            normalize(&m_raw, &m_raw.select_columns(&cols), false)?
        }
        DictionarySpec::Learned {
            class,
            atoms,
            rho,
            iters,
            seed,
        } => {
            let cols = cube.class_columns(*class)?;
            let top = m_raw.max_abs();
            if top == 0.0 {
                return Err(Error::Degenerate("data matrix is zero".into()));
            }
            // learn on the same scale the solver sees
            let y = m_raw.select_columns(&cols).map(|x| x / top);
            let learned = learn_dictionary(&y, *atoms, *rho, *iters, *seed)?;
            normalize(&m_raw, &learned.dictionary, true)?
        }
        DictionarySpec::Provided(d) => {
            if d.rows() != cube.bands() {
                return Err(Error::Dimension(format!(
                    "dictionary has {} rows, cube has {} bands",
                    d.rows(),
                    cube.bands()
                )));
            }
            normalize(&m_raw, d, false)?
        }
    };
    let direct = DemixProblem::new(data.clone(), dictionary.clone(), config.mode)?;
    let problem = match config.method {
        LocalizeMethod::Direct
        | LocalizeMethod::MatchedFilter
        | LocalizeMethod::MatchedFilterPinv => direct,
        LocalizeMethod::PseudoInverse => pinv_transform(&direct)?,
    };
    let lambdas = match config.method {
        LocalizeMethod::Direct | LocalizeMethod::PseudoInverse => {
            apg::lambda_grid(&problem, config.lambda_count)?
        }
        _ => Vec::new(),
    };
    Ok(LocalizationSetup {
        config,
        problem,
        data,
        dictionary,
        labels,
        lambdas,
        height: cube.height(),
        width: cube.width(),
    })
}

impl LocalizationSetup {
    /// Number of independent detector runs: one per lambda, or one matched filter.
    pub fn candidate_count(&self) -> usize {
        match self.config.method {
            LocalizeMethod::Direct | LocalizeMethod::PseudoInverse => self.lambdas.len(),
            _ => 1,
        }
    }

    /// Runs candidate `k`; independent of every other candidate.
    pub fn run_candidate(&self, k: usize) -> Result<Candidate> {
        if k >= self.candidate_count() {
            return Err(Error::InvalidParameter(format!(
                "candidate {k} out of range"
            )));
        }
        let (lambda, scores, iterations, converged) = match self.config.method {
            LocalizeMethod::MatchedFilter => (
                None,
                matched_filter(&self.data, &self.dictionary, false)?,
                0,
                true,
            ),
            LocalizeMethod::MatchedFilterPinv => (
                None,
                matched_filter(&self.data, &self.dictionary, true)?,
                0,
                true,
            ),
            LocalizeMethod::Direct | LocalizeMethod::PseudoInverse => {
                let lambda = self.lambdas[k];
                let cfg = SolverConfig {
                    lambda,
                    ..self.config.solver
                };
                let c = apg::solve(&self.problem, &cfg)?.components;
                (
                    Some(lambda),
                    c.sparse_coeff.column_norms(),
                    c.iterations,
                    c.converged,
                )
            }
        };
        let auc = match &self.labels {
            Some(l) => Some(eval::roc(&scores, l, self.config.threshold_count)?.auc),
            None => None,
        };
        Ok(Candidate {
            lambda,
            scores,
            iterations,
            converged,
            auc,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScan {
    pub curve: RocCurve,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub method: LocalizeMethod,
    pub mode: SparsityMode,
    pub height: usize,
    pub width: usize,
    pub dictionary_atoms: usize,
    pub candidates: Vec<Candidate>,
    /// Candidate with the largest area under its threshold-swept ROC.
    pub best: Option<usize>,
    pub roc: Option<RocCurve>,
    pub operating_point: Option<OperatingPoint>,
    /// ROC traced by lambda at a fixed column threshold.
    pub lambda_scan: Option<LambdaScan>,
}

impl LocalizationResult {
    pub fn best_candidate(&self) -> Option<&Candidate> {
        self.best.map(|k| &self.candidates[k])
    }
}

/// Combines candidate runs (in candidate order) into the final result.
pub fn summarize(
    setup: &LocalizationSetup,
    candidates: Vec<Candidate>,
) -> Result<LocalizationResult> {
    if candidates.len() != setup.candidate_count() {
        return Err(Error::Dimension(format!(
            "expected {} candidates, got {}",
            setup.candidate_count(),
            candidates.len()
        )));
    }
    let (mut best, mut roc, mut point, mut scan) = (None, None, None, None);
    if let Some(labels) = &setup.labels {
        let mut top = f64::NEG_INFINITY;
        for (k, c) in candidates.iter().enumerate() {
            let auc = c.auc.unwrap_or(f64::NEG_INFINITY);
            if auc > top {
                top = auc;
                best = Some(k);
            }
        }
        if let Some(k) = best {
            let curve = eval::roc(&candidates[k].scores, labels, setup.config.threshold_count)?;
            point = Some(eval::best_operating_point(&curve));
            roc = Some(curve);
        }
        if candidates.iter().all(|c| c.lambda.is_some()) && !candidates.is_empty() {
            let per_lambda: Vec<Vec<f64>> = candidates.iter().map(|c| c.scores.clone()).collect();
            let (curve, threshold) = eval::lambda_scan_roc(
                &per_lambda,
                labels,
                setup.config.threshold_mode,
                setup.config.threshold_count,
            )?;
            scan = Some(LambdaScan { curve, threshold });
        }
    }
    Ok(LocalizationResult {
        method: setup.config.method,
        mode: setup.config.mode,
        height: setup.height,
        width: setup.width,
        dictionary_atoms: setup.dictionary.cols(),
        candidates,
        best,
        roc,
        operating_point: point,
        lambda_scan: scan,
    })
}

/// Sequential end-to-end localization.
pub fn localize(
    cube: &HyperCube,
    spec: &DictionarySpec,
    target: Option<u32>,
    config: LocalizeConfig,
) -> Result<LocalizationResult> {
    let setup = prepare(cube, spec, target, config)?;
    let candidates = (0..setup.candidate_count())
        .map(|k| setup.run_candidate(k))
        .collect::<Result<Vec<_>>>()?;
    summarize(&setup, candidates)
}
