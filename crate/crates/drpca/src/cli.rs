//! Command-line front end. Exit codes: 0 on success (including runs that
//! report non-convergence), 2 for usage or input errors, 3 for numerical
//! failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use drpca_core::apg::{self, Solution};
use drpca_core::diagnostics::{
    incoherence_report, recovery_bounds, verify_dual_certificate, CertificateReport,
    IncoherenceReport, RecoveryBounds, Support,
};
use drpca_core::eval::ThresholdMode;
use drpca_core::hsi::{self, DictionarySpec, HyperCube, LocalizeConfig, LocalizeMethod};
use drpca_core::model::UNIT_NORM_TOLERANCE;
use drpca_core::synth::{self, Method, SuccessRule, SweepConfig, CSV_HEADER};
use drpca_core::{DemixProblem, SolverConfig, SparsityMode};
use serde::Serialize;
use serde_json::json;

use crate::formats::{self, FormatError};
use crate::parallel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Core(#[from] drpca_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) | CliError::Format(FormatError::Core(e)) if e.is_numerical() => {
                EXIT_NUMERICAL
            }
            _ => EXIT_INPUT,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "drpca",
    version,
    about = "Low-rank plus dictionary-sparse demixing toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a data matrix into a low-rank part and a dictionary-sparse part.
    Demix(DemixArgs),
    /// Success rates of planted recovery over a grid of ranks and sparsities.
    Phase(PhaseArgs),
    /// Incoherence parameters, recovery bounds and optional dual certificate.
    Diagnose(DiagnoseArgs),
    /// Target localization in a hyperspectral cube.
    Localize(LocalizeArgs),
    /// Write a planted instance to disk.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Entry,
    Column,
}

impl From<ModeArg> for SparsityMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Entry => SparsityMode::EntryWise,
            ModeArg::Column => SparsityMode::ColumnWise,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Iteration cap of each solve.
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    /// Relative change at which a solve stops.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Continuation decay factor.
    #[arg(long, default_value_t = 0.95)]
    pub decay: f64,
    /// Continuation floor.
    #[arg(long, default_value_t = 1e-4)]
    pub nu_floor: f64,
}

impl SolverArgs {
    fn config(&self, lambda: f64) -> SolverConfig {
        SolverConfig {
            lambda,
            continuation_decay: self.decay,
            nu_floor: self.nu_floor,
            max_iters: self.max_iters,
            convergence_tol: self.tol,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DemixArgs {
    /// Data matrix (DMX1 or CSV).
    #[arg(long)]
    pub data: PathBuf,
    /// Dictionary (DMX1 or CSV); columns are rescaled to unit norm if needed.
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Single regularization weight.
    #[arg(
        long,
        conflicts_with = "lambda_grid",
        required_unless_present = "lambda_grid"
    )]
    pub lambda: Option<f64>,
    /// Solve for this many evenly spaced weights up to the zeroing bound.
    #[arg(long)]
    pub lambda_grid: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Direct,
    Pinv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    /// Both L and S within 2% relative error.
    Recovery,
    /// S within 2% relative error.
    Sparse,
    /// Outlier precision of at least 0.99.
    Precision,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub d: usize,
    /// Ranks: comma-separated values or inclusive `start:stop:step` ranges.
    #[arg(long)]
    pub r_grid: String,
    /// Sparsities, same syntax as the rank grid.
    #[arg(long)]
    pub s_grid: String,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 100)]
    pub lambdas: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "DEMIX_THREADS", default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Direct)]
    pub method: MethodArg,
    /// Defaults to `recovery` (entry) or `precision` (column).
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    /// End a trial's lambda scan at its first success.
    #[arg(long)]
    pub stop_on_success: bool,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Low-rank component.
    #[arg(long)]
    pub low_rank: Option<PathBuf>,
    /// Data matrix; with `--sparse` the low-rank part is taken as `M - D S`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sparse coefficients; their nonzero pattern is the support.
    #[arg(long)]
    pub sparse: Option<PathBuf>,
    /// Support file: `row,col` lines (entry) or column indices (column).
    #[arg(long)]
    pub truth_support: Option<PathBuf>,
    /// Per-column sparsity for fat dictionaries (default: largest in the support).
    #[arg(long)]
    pub k: Option<usize>,
    /// Build and check the dual certificate (small instances only).
    #[arg(long)]
    pub certificate: bool,
    /// Weight for the certificate; defaults to the middle of the bound interval.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DictModeArg {
    Sampled,
    Learned,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LocalizeMethodArg {
    Direct,
    Pinv,
    Mf,
    MfPinv,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// Cube: JSON sidecar with binary, or a directory of per-band CSVs.
    #[arg(long)]
    pub cube: PathBuf,
    /// Label map CSV (h rows × w columns).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Target class id.
    #[arg(long)]
    pub class: Option<u32>,
    #[arg(long, value_enum, default_value_t = DictModeArg::Sampled)]
    pub dict_mode: DictModeArg,
    /// Dictionary matrix for `--dict-mode file`.
    #[arg(long)]
    pub dict_file: Option<PathBuf>,
    /// Number of sampled voxels or learned atoms.
    #[arg(long, default_value_t = 15)]
    pub d: usize,
    /// Sparsity weight of dictionary learning.
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    /// Outer iterations of dictionary learning.
    #[arg(long, default_value_t = 50)]
    pub learn_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Entry)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = LocalizeMethodArg::Direct)]
    pub method: LocalizeMethodArg,
    #[arg(long, default_value_t = 100)]
    pub lambdas: usize,
    /// Column threshold of the ROC traced over lambda: `auc` or a number.
    #[arg(long, default_value = "auc")]
    pub threshold: String,
    #[arg(long, default_value_t = 1000)]
    pub threshold_count: usize,
    /// Crop `row,col,height,width` before processing.
    #[arg(long)]
    pub crop: Option<String>,
    #[arg(long, env = "DEMIX_THREADS", default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub r: usize,
    /// Nonzero entries (entry) or outlier columns (column).
    #[arg(long)]
    pub s: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Demix(a) => demix(&a),
        Command::Phase(a) => phase(&a),
        Command::Diagnose(a) => diagnose(&a),
        Command::Localize(a) => localize(&a),
        Command::Synth(a) => synth_cmd(&a),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| {
        CliError::Format(FormatError::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn trace_csv(sol: &Solution) -> String {
    let mut out = String::from("iteration,objective,residual,nu,t\n");
    for (k, r) in sol.trace.records.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            k + 1,
            r.objective,
            r.residual,
            r.nu,
            r.t
        ));
    }
    out
}

fn write_solution(
    dir: &Path,
    mode: SparsityMode,
    lambda: f64,
    sol: &Solution,
    normalized: bool,
) -> CliResult<serde_json::Value> {
    create_dir(dir)?;
    let c = &sol.components;
    let support_size = match mode {
        SparsityMode::EntryWise => c.nonzero_entries(),
        SparsityMode::ColumnWise => c.nonzero_columns(0.0),
    };
    formats::write_matrix(&dir.join("L.dmx"), &c.low_rank)?;
    formats::write_matrix(&dir.join("S.dmx"), &c.sparse_coeff)?;
    formats::write_text(&dir.join("trace.csv"), &trace_csv(sol))?;
    let summary = json!({
        "lambda": lambda,
        "objective": c.objective,
        "residual": c.final_residual,
        "iterations": c.iterations,
        "converged": c.converged,
        "rank": c.rank()?,
        "support_size": support_size,
        "support_entries": c.nonzero_entries(),
        "support_columns": c.nonzero_columns(0.0),
        "dictionary_normalized": normalized,
    });
    formats::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn demix(a: &DemixArgs) -> CliResult<()> {
    let m = formats::read_matrix(&a.data)?;
    let d = formats::read_matrix(&a.dict)?;
    let mode = a.mode.into();
    let unit = d
        .column_norms()
        .iter()
        .all(|n| (n - 1.0).abs() <= UNIT_NORM_TOLERANCE);
    let problem = if unit {
        DemixProblem::new(m, d, mode)?
    } else {
        DemixProblem::normalized(m, d, mode)?
    };
    let lambdas = match (a.lambda, a.lambda_grid) {
        (Some(l), _) => vec![l],
        (None, Some(count)) => apg::lambda_grid(&problem, count)?,
        (None, None) => return Err(CliError::Usage("give --lambda or --lambda-grid".into())),
    };
    if lambdas.len() == 1 && a.lambda.is_some() {
        let sol = apg::solve(&problem, &a.solver.config(lambdas[0]))?;
        write_solution(&a.out, mode, lambdas[0], &sol, !unit)?;
        return Ok(());
    }
    let mut runs = Vec::new();
    for (k, &lambda) in lambdas.iter().enumerate() {
        let sol = apg::solve(&problem, &a.solver.config(lambda))?;
        runs.push(write_solution(
            &a.out.join(format!("lambda_{:03}", k + 1)),
            mode,
            lambda,
            &sol,
            !unit,
        )?);
    }
    formats::write_json(&a.out.join("summary.json"), &json!({ "runs": runs }))?;
    Ok(())
}

/// `1,2,5:20:5` -> [1, 2, 5, 10, 15, 20].
pub fn parse_grid(text: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("cannot parse grid {text:?}"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(v.parse().map_err(|_| bad())?),
            [start, stop, step] => {
                let (start, stop, step): (usize, usize, usize) = (
                    start.parse().map_err(|_| bad())?,
                    stop.parse().map_err(|_| bad())?,
                    step.parse().map_err(|_| bad())?,
                );
                if step == 0 {
                    return Err(bad());
                }
                out.extend((start..=stop).step_by(step));
            }
            _ => return Err(bad()),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn phase(a: &PhaseArgs) -> CliResult<()> {
    let mode: SparsityMode = a.mode.into();
    let mut cfg = SweepConfig::new(a.n, a.m, a.d, mode);
    cfg.method = match a.method {
        MethodArg::Direct => Method::Direct,
        MethodArg::Pinv => Method::PseudoInverse,
    };
    if let Some(rule) = a.rule {
        cfg.rule = match rule {
            RuleArg::Recovery => SuccessRule::Recovery,
            RuleArg::Sparse => SuccessRule::SparseRecovery,
            RuleArg::Precision => SuccessRule::Precision,
        };
    }
    cfg.trials = a.trials;
    cfg.lambda_count = a.lambdas;
    cfg.base_seed = a.seed;
    cfg.solver = a.solver.config(1.0);
    cfg.stop_on_success = a.stop_on_success;
    let rs = parse_grid(&a.r_grid)?;
    let ss = parse_grid(&a.s_grid)?;
    let cells: Vec<(usize, usize)> = rs
        .iter()
        .flat_map(|&r| ss.iter().map(move |&s| (r, s)))
        .collect();
    let results = parallel::phase_sweep(&cfg, &cells, a.jobs)?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &results {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    match &a.out {
        Some(path) => formats::write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn read_support(path: &Path, mode: SparsityMode) -> CliResult<Support> {
    let m = formats::read_matrix(path)?;
    let as_index = |x: f64| -> CliResult<usize> {
        if x >= 0.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(CliError::Usage(format!(
                "{}: {x} is not an index",
                path.display()
            )))
        }
    };
    match mode {
        SparsityMode::EntryWise => {
            if m.rows() > 0 && m.cols() != 2 {
                return Err(CliError::Usage(format!(
                    "{}: expected row,col pairs",
                    path.display()
                )));
            }
            let entries = (0..m.rows())
                .map(|i| Ok((as_index(m.get(i, 0))?, as_index(m.get(i, 1))?)))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(Support::Entries(entries))
        }
        SparsityMode::ColumnWise => Ok(Support::Columns(
            m.data()
                .iter()
                .map(|&x| as_index(x))
                .collect::<CliResult<Vec<_>>>()?,
        )),
    }
}

#[derive(Serialize)]
struct DiagnoseReport {
    n: usize,
    m: usize,
    d: usize,
    support_size: usize,
    k: Option<usize>,
    incoherence: IncoherenceReport,
    bounds: RecoveryBounds,
    certificate: Option<CertificateReport>,
}

fn diagnose(a: &DiagnoseArgs) -> CliResult<()> {
    let mode: SparsityMode = a.mode.into();
    let d = formats::read_matrix(&a.dict)?;
    let sparse = a.sparse.as_deref().map(formats::read_matrix).transpose()?;
    let l = match (&a.low_rank, &a.data, &sparse) {
        (Some(p), _, _) => formats::read_matrix(p)?,
        (None, Some(p), Some(s)) => {
            let m = formats::read_matrix(p)?;
            if d.cols() != s.rows() || m.shape() != (d.rows(), s.cols()) {
                return Err(CliError::Usage(
                    "data, dictionary and sparse shapes do not fit".into(),
                ));
            }
            &m - &d.matmul(s)
        }
        _ => {
            return Err(CliError::Usage(
                "give --low-rank, or --data together with --sparse".into(),
            ))
        }
    };
    let support = match (&a.truth_support, &sparse) {
        (Some(p), _) => read_support(p, mode)?,
        (None, Some(s)) => Support::of(s, mode),
        (None, None) => return Err(CliError::Usage("give --sparse or --truth-support".into())),
    };
    let (n, m) = l.shape();
    let dd = d.cols();
    let report = incoherence_report(&l, &d, &support, mode)?;
    let k = match (a.k, &support) {
        (Some(k), _) => Some(k),
        (None, Support::Entries(e)) => {
            let mut per_col = vec![0usize; m];
            e.iter().for_each(|&(_, j)| per_col[j] += 1);
            Some(per_col.into_iter().max().unwrap_or(0).max(1))
        }
        (None, Support::Columns(_)) => None,
    };
    let bounds = recovery_bounds(&report, n, m, dd, support.len(), report.rank_r, k)?;
    let certificate = if a.certificate {
        let s = sparse
            .as_ref()
            .ok_or_else(|| CliError::Usage("--certificate needs --sparse".into()))?;
        let lambda = match a.lambda {
            Some(l) => l,
            None if bounds.feasible => 0.5 * (bounds.lambda_min + bounds.lambda_max),
            None => {
                return Err(CliError::Usage(
                    "the bounds give no lambda interval; pass --lambda for the certificate".into(),
                ))
            }
        };
        Some(verify_dual_certificate(&l, s, &d, mode, lambda)?)
    } else {
        None
    };
    let out = DiagnoseReport {
        n,
        m,
        d: dd,
        support_size: support.len(),
        k,
        incoherence: report,
        bounds,
        certificate,
    };
    match &a.out {
        Some(p) => formats::write_json(p, &out)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&out).expect("report serializes")
        ),
    }
    Ok(())
}

fn crop(cube: HyperCube, spec: &str) -> CliResult<HyperCube> {
    let v = parse_grid(spec)?;
    let [r0, c0, h, w] = v[..] else {
        return Err(CliError::Usage("--crop takes row,col,height,width".into()));
    };
    if h == 0 || w == 0 || r0 + h > cube.height() || c0 + w > cube.width() {
        return Err(CliError::Usage(format!(
            "crop {spec} does not fit a {}x{} image",
            cube.height(),
            cube.width()
        )));
    }
    let mut voxels = Vec::with_capacity(h * w * cube.bands());
    for b in 0..cube.bands() {
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                voxels.push(cube.voxel(b, r, c));
            }
        }
    }
    let labels = cube.labels().map(|l| {
        (r0..r0 + h)
            .flat_map(|r| (c0..c0 + w).map(move |c| (r, c)))
            .map(|(r, c)| l[r * cube.width() + c])
            .collect()
    });
    Ok(HyperCube::new(h, w, cube.bands(), voxels, labels)?)
}

fn localize(a: &LocalizeArgs) -> CliResult<()> {
    let mut cube = formats::read_cube(&a.cube)?;
    if let Some(p) = &a.labels {
        let (h, w, labels) = formats::read_labels(p)?;
        if (h, w) != (cube.height(), cube.width()) {
            return Err(CliError::Usage(format!(
                "label map is {h}x{w}, cube is {}x{}",
                cube.height(),
                cube.width()
            )));
        }
        cube = cube.with_labels(labels)?;
    }
    if let Some(spec) = &a.crop {
        cube = crop(cube, spec)?;
    }
    let need_class = || {
        a.class
            .ok_or_else(|| CliError::Usage("--class is required for this dictionary mode".into()))
    };
    let spec = match a.dict_mode {
        DictModeArg::Sampled => DictionarySpec::Sampled {
            class: need_class()?,
            count: a.d,
            seed: a.seed,
        },
        DictModeArg::Learned => DictionarySpec::Learned {
            class: need_class()?,
            atoms: a.d,
            rho: a.rho,
            iters: a.learn_iters,
            seed: a.seed,
        },
        DictModeArg::File => {
            let p = a
                .dict_file
                .as_ref()
                .ok_or_else(|| CliError::Usage("--dict-mode file needs --dict-file".into()))?;
            DictionarySpec::Provided(formats::read_matrix(p)?)
        }
    };
    let method = match a.method {
        LocalizeMethodArg::Direct => LocalizeMethod::Direct,
        LocalizeMethodArg::Pinv => LocalizeMethod::PseudoInverse,
        LocalizeMethodArg::Mf => LocalizeMethod::MatchedFilter,
        LocalizeMethodArg::MfPinv => LocalizeMethod::MatchedFilterPinv,
    };
    let mut cfg = LocalizeConfig::new(method, a.mode.into());
    cfg.lambda_count = a.lambdas;
    cfg.threshold_count = a.threshold_count;
    cfg.threshold_mode = if a.threshold.eq_ignore_ascii_case("auc") {
        ThresholdMode::MaximizeAuc
    } else {
        ThresholdMode::Fixed(a.threshold.parse().map_err(|_| {
            CliError::Usage(format!(
                "--threshold takes `auc` or a number, got {:?}",
                a.threshold
            ))
        })?)
    };
    cfg.solver = a.solver.config(1.0);
    let setup = hsi::prepare(&cube, &spec, a.class, cfg)?;
    let result = parallel::localize(&setup, a.jobs)?;

    create_dir(&a.out)?;
    let (h, w) = (result.height, result.width);
    match result.best_candidate() {
        Some(best) => formats::write_score_map(&a.out.join("scoremap.csv"), &best.scores, h, w)?,
        None => {
            for (k, c) in result.candidates.iter().enumerate() {
                formats::write_score_map(
                    &a.out.join(format!("scoremap_{:03}.csv", k + 1)),
                    &c.scores,
                    h,
                    w,
                )?;
            }
        }
    }
    if let Some(roc) = &result.roc {
        formats::write_roc_csv(&a.out.join("roc.csv"), roc)?;
    }
    if let Some(scan) = &result.lambda_scan {
        formats::write_roc_csv(&a.out.join("lambda_roc.csv"), &scan.curve)?;
    }
    let mut table = String::from("index,lambda,auc,iterations,converged\n");
    for (k, c) in result.candidates.iter().enumerate() {
        let lambda = c.lambda.map_or(String::new(), |l| l.to_string());
        let auc = c.auc.map_or(String::new(), |x| x.to_string());
        table.push_str(&format!(
            "{},{lambda},{auc},{},{}\n",
            k + 1,
            c.iterations,
            c.converged
        ));
    }
    formats::write_text(&a.out.join("candidates.csv"), &table)?;
    let best = result.best_candidate();
    let summary = json!({
        "method": result.method,
        "mode": result.mode,
        "height": h,
        "width": w,
        "dictionary_atoms": result.dictionary_atoms,
        "candidates": result.candidates.len(),
        "best_index": result.best,
        "best_lambda": best.and_then(|c| c.lambda),
        "auc": result.roc.as_ref().map(|r| r.auc),
        "flipped": result.roc.as_ref().map(|r| r.flipped),
        "best_point": result.operating_point,
        "lambda_scan": result.lambda_scan.as_ref().map(|s| json!({
            "auc": s.curve.auc,
            "threshold": s.threshold,
        })),
        "converged": result.candidates.iter().all(|c| c.converged),
    });
    formats::write_json(&a.out.join("summary.json"), &summary)?;
    Ok(())
}

fn synth_cmd(a: &SynthArgs) -> CliResult<()> {
    create_dir(&a.out)?;
    let (problem, truth, outliers) = match a.mode {
        ModeArg::Entry => {
            let inst = synth::gen_entrywise_instance(a.n, a.m, a.d, a.r, a.s, a.seed)?;
            (inst.problem, inst.truth, None)
        }
        ModeArg::Column => {
            let inst = synth::gen_columnwise_instance(a.n, a.m, a.d, a.r, a.s, a.seed)?;
            let cols = inst.oracle.outlier_columns().to_vec();
            (inst.problem, inst.truth, Some(cols))
        }
    };
    formats::write_matrix(&a.out.join("M.dmx"), problem.m_obs())?;
    formats::write_matrix(&a.out.join("D.dmx"), problem.dictionary())?;
    formats::write_matrix(&a.out.join("L.dmx"), &truth.low_rank)?;
    formats::write_matrix(&a.out.join("S.dmx"), &truth.sparse_coeff)?;
    if let Some(cols) = &outliers {
        let text: String = cols.iter().map(|c| format!("{c}\n")).collect();
        formats::write_text(&a.out.join("outliers.csv"), &text)?;
    }
    formats::write_json(
        &a.out.join("instance.json"),
        &json!({
            "mode": SparsityMode::from(a.mode),
            "n": a.n, "m": a.m, "d": a.d, "r": a.r, "s": a.s, "seed": a.seed,
        }),
    )?;
    Ok(())
}
