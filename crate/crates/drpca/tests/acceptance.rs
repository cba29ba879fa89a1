//! Acceptance run: every criterion at its stated tolerance and time budget,
//! one verdict line each. Criterion 9 needs real hyperspectral scenes; point
//! `DRPCA_HSI_DIR` at a directory holding `indian_pines.json` with
//! `indian_pines_labels.csv` and `pavia.json` with `pavia_labels.csv`
//! (cube sidecars as read by `drpca localize`). `DRPCA_PAVIA_CROP` takes an
//! optional `row,col,height,width` crop. Without the directory those parts
//! are reported as skipped.
//!
//! `DRPCA_ACCEPT=1,2,8` restricts the run to the listed criteria.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use drpca::cli::{run as cli_run, EXIT_OK};
use drpca::{formats, parallel};
use drpca_core::apg;
use drpca_core::diagnostics::{
    incoherence_report, recovery_bounds, verify_dual_certificate, IncoherenceReport, Support,
};
use drpca_core::hsi::{self, DictionarySpec, HyperCube, LocalizeConfig, LocalizeMethod};
use drpca_core::linalg::{
    column_space_basis, projector, pseudo_inverse, singular_values, spectral_norm,
};
use drpca_core::prox::{column_soft_threshold, singular_value_threshold, soft_threshold_entries};
use drpca_core::synth::{gen_entrywise_instance, Method, SuccessRule, SweepConfig};
use drpca_core::{DemixProblem, DenseMatrix, SolverConfig, SparsityMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    skipped: bool,
    detail: String,
}

impl Verdict {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            skipped: false,
            detail: detail.into(),
        }
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn unit_columns(a: &DenseMatrix) -> DenseMatrix {
    let norms = a.column_norms();
    DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) / norms[j])
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn c1_prox() -> Verdict {
    let mut ok = true;
    let y = DenseMatrix::from_rows(&[&[3.0, -1.0]]).unwrap();
    ok &= soft_threshold_entries(&y, 2.0).unwrap().data() == [1.0, 0.0];
    let y = DenseMatrix::from_rows(&[&[-3.0, 0.5]]).unwrap();
    ok &= soft_threshold_entries(&y, 1.0).unwrap().data() == [-2.0, 0.0];
    let col = DenseMatrix::new(2, 1, vec![3.0, 4.0]).unwrap();
    ok &= column_soft_threshold(&col, 5.0).unwrap().is_zero();
    ok &= column_soft_threshold(&col, 2.5).unwrap().data() == [1.5, 2.0];
    ok &= column_soft_threshold(&DenseMatrix::zeros(3, 1), 1.0)
        .unwrap()
        .is_zero();
    let svt = singular_value_threshold(&DenseMatrix::from_diagonal(&[3.0, 1.0]), 2.0).unwrap();
    ok &= (&svt - &DenseMatrix::from_diagonal(&[1.0, 0.0])).max_abs() == 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let (r, c) = (rng.random_range(1..8), rng.random_range(1..8));
        let x = gaussian(r, c, &mut rng);
        let scale = rng.random_range(0.1..3.0);
        let y = gaussian(r, c, &mut rng).scale(scale);
        let tau = rng.random_range(0.0..2.0);
        let gap = (&x - &y).frobenius_norm();
        for f in [
            singular_value_threshold,
            soft_threshold_entries,
            column_soft_threshold,
        ] {
            let moved = (&f(&x, tau).unwrap() - &f(&y, tau).unwrap()).frobenius_norm();
            worst = worst.max(moved - gap);
        }
    }
    Verdict::check(
        ok && worst <= 1e-10,
        format!("examples exact: {ok}; worst expansion {worst:.2e} over 1000 pairs"),
    )
}

fn c2_boundary_zeroing() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut all_converged = true;
    for _ in 0..20 {
        let m = gaussian(30, 30, &mut rng);
        let d = unit_columns(&gaussian(30, 10, &mut rng));
        let nu = 1.01 * spectral_norm(&m).unwrap();
        let lambda = 1.01 * d.transpose().matmul(&m).max_abs() / nu;
        let problem = DemixProblem::new(m, d, SparsityMode::EntryWise).unwrap();
        let cfg = SolverConfig {
            lambda,
            nu_initial: Some(nu),
            nu_floor: nu,
            max_iters: 5000,
            ..SolverConfig::default()
        };
        let c = apg::solve(&problem, &cfg).unwrap().components;
        all_converged &= c.converged;
        worst = worst
            .max(c.low_rank.frobenius_norm())
            .max(c.sparse_coeff.frobenius_norm());
    }
    Verdict::check(
        all_converged && worst < 1e-8,
        format!(
            "20 problems, all converged: {all_converged}, largest ||L||_F or ||S||_F {worst:.2e}"
        ),
    )
}

fn sweep(mut cfg: SweepConfig, r: usize, s: usize) -> usize {
    cfg.stop_on_success = true;
    parallel::phase_sweep(&cfg, &[(r, s)], jobs()).unwrap()[0].successes
}

fn c3_entry_recovery() -> Verdict {
    let cfg = SweepConfig::new(100, 100, 5, SparsityMode::EntryWise);
    let easy = sweep(cfg, 2, 50);
    let hard = sweep(cfg, 90, 8000);
    Verdict::check(
        easy >= 9 && hard == 0,
        format!("(r=2, s=50): {easy}/10, need >= 9; (r=90, s=8000): {hard}/10, need 0"),
    )
}

fn c4_pinv_failure() -> Verdict {
    let mut cfg = SweepConfig::new(100, 100, 5, SparsityMode::EntryWise);
    cfg.rule = SuccessRule::SparseRecovery;
    let direct = sweep(cfg, 20, 100);
    cfg.method = Method::PseudoInverse;
    let pinv = sweep(cfg, 20, 100);
    Verdict::check(
        pinv == 0 && direct >= 8,
        format!(
            "(r=20, s=100, d=5): pseudo-inverse {pinv}/10, need 0; direct {direct}/10, need >= 8"
        ),
    )
}

fn c5_column_recovery() -> Verdict {
    let small = sweep(
        SweepConfig::new(100, 1000, 50, SparsityMode::ColumnWise),
        10,
        100,
    );
    let large = sweep(
        SweepConfig::new(100, 1000, 150, SparsityMode::ColumnWise),
        50,
        200,
    );
    Verdict::check(
        small >= 9 && large >= 8,
        format!(
            "d=50 (r=10, s=100): {small}/10, need >= 9; d=150 (r=50, s=200): {large}/10, need >= 8"
        ),
    )
}

/// Largest singular value of `X -> P_L(Q(X))` built column by column from
/// the unit basis. `Q` projects column `j` onto the span of the dictionary
/// atoms active in column `j` of `s`.
fn mu_oracle(l: &DenseMatrix, d: &DenseMatrix, s: &DenseMatrix) -> f64 {
    let (n, m) = l.shape();
    let pu = projector(&column_space_basis(l).unwrap());
    let pv = projector(&column_space_basis(&l.transpose()).unwrap());
    let col_proj: Vec<DenseMatrix> = (0..m)
        .map(|j| {
            let active: Vec<usize> = (0..s.rows()).filter(|&i| s.get(i, j) != 0.0).collect();
            if active.is_empty() {
                return DenseMatrix::zeros(n, n);
            }
            let dj = d.select_columns(&active);
            dj.matmul(&pseudo_inverse(&dj).unwrap())
        })
        .collect();
    let mut op = DenseMatrix::zeros(n * m, n * m);
    for k in 0..n * m {
        let (i0, j0) = (k % n, k / n);
        let mut q = DenseMatrix::zeros(n, m);
        for i in 0..n {
            q.set(i, j0, col_proj[j0].get(i, i0)).unwrap();
        }
        let a = pu.matmul(&q);
        let b = q.matmul(&pv);
        let c = a.matmul(&pv);
        let z = &(&a + &b) - &c;
        for jj in 0..m {
            for ii in 0..n {
                op.set(jj * n + ii, k, z.get(ii, jj)).unwrap();
            }
        }
    }
    singular_values(&op)
        .unwrap()
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// Smallest singular value of the map `X -> [D^T (I - P_U) X (I - P_V)]_S`.
fn sigma_min_oracle(l: &DenseMatrix, d: &DenseMatrix, support: &[(usize, usize)]) -> f64 {
    let (n, m) = l.shape();
    let pu_perp = &DenseMatrix::identity(n) - &projector(&column_space_basis(l).unwrap());
    let pv_perp =
        &DenseMatrix::identity(m) - &projector(&column_space_basis(&l.transpose()).unwrap());
    let g = d.transpose().matmul(&pu_perp);
    let mut a = DenseMatrix::zeros(support.len(), n * m);
    for k in 0..n * m {
        let mut x = DenseMatrix::zeros(n, m);
        x.set(k % n, k / n, 1.0).unwrap();
        let y = g.matmul(&x).matmul(&pv_perp);
        for (row, &(i, j)) in support.iter().enumerate() {
            a.set(row, k, y.get(i, j)).unwrap();
        }
    }
    singular_values(&a)
        .unwrap()
        .get(support.len() - 1)
        .copied()
        .unwrap_or(0.0)
}

fn c6_diagnostics_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_mu, mut worst_sigma, mut certified) = (0.0f64, f64::INFINITY, 0);
    let mut count = 0;
    let mut seed = 0u64;
    while count < 50 {
        seed += 1;
        let n = rng.random_range(4..10);
        let m = rng.random_range(4..10);
        let d = rng.random_range(1..=n);
        let r = rng.random_range(1..n.min(m));
        let s = rng.random_range(1..=(d * m / 3).max(1));
        let Ok(inst) = gen_entrywise_instance(n, m, d, r, s, seed) else {
            continue;
        };
        count += 1;
        let (l, st, dict) = (
            &inst.truth.low_rank,
            &inst.truth.sparse_coeff,
            inst.problem.dictionary(),
        );
        let support = Support::of(st, SparsityMode::EntryWise);
        let rep = incoherence_report(l, dict, &support, SparsityMode::EntryWise).unwrap();
        let oracle = mu_oracle(l, dict, st);
        worst_mu = worst_mu.max((rep.mu - oracle).abs());

        let Support::Entries(entries) = &support else {
            unreachable!()
        };
        let smin_d = singular_values(dict).unwrap()[dict.cols() - 1];
        let bound = smin_d * (1.0 - oracle);
        let sigma = sigma_min_oracle(l, dict, entries);
        worst_sigma = worst_sigma.min(sigma - bound);
        if let Ok(cert) = verify_dual_certificate(l, st, dict, SparsityMode::EntryWise, 1.0) {
            // the solver route must agree with the materialized one
            worst_sigma = worst_sigma.min(cert.sigma_min - bound);
            if (cert.sigma_min - sigma).abs() > 1e-8 {
                worst_sigma = f64::NEG_INFINITY;
            }
            certified += 1;
        }
    }
    Verdict::check(
        worst_mu <= 1e-8 && worst_sigma >= -1e-9,
        format!(
            "50 instances: largest |mu - oracle| {worst_mu:.2e}; smallest sigma_min - bound {worst_sigma:.2e}; \
             {certified} cross-checked through the certificate"
        ),
    )
}

fn c7_certificates() -> Verdict {
    let (n, m, d, r, s) = (30, 80, 2, 1, 1);
    let mut found = 0;
    let mut held = 0;
    let mut seed = 0u64;
    let mut worst = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    while found < 20 && seed < 5000 {
        seed += 1;
        let inst = gen_entrywise_instance(n, m, d, r, s, seed).unwrap();
        let (l, st, dict) = (
            &inst.truth.low_rank,
            &inst.truth.sparse_coeff,
            inst.problem.dictionary(),
        );
        let support = Support::of(st, SparsityMode::EntryWise);
        let rep = incoherence_report(l, dict, &support, SparsityMode::EntryWise).unwrap();
        let b = recovery_bounds(&rep, n, m, d, support.len(), rep.rank_r, None).unwrap();
        if !b.feasible {
            continue;
        }
        found += 1;
        let tries = [0.5, 0.25, 0.75, 0.1, 0.9];
        let ok = tries.iter().any(|&t| {
            let lambda = b.lambda_min + t * (b.lambda_max - b.lambda_min);
            match verify_dual_certificate(l, st, dict, SparsityMode::EntryWise, lambda) {
                Ok(c) => {
                    worst = (
                        worst.0.max(c.c1_residual),
                        worst.1.max(c.c2_residual),
                        worst.2.max(c.c3_value),
                        worst.3.max(c.c4_value / lambda),
                    );
                    c.c1_residual < 1e-8
                        && c.c2_residual < 1e-8
                        && c.c3_value < 1.0
                        && c.c4_value < lambda
                }
                Err(_) => false,
            }
        });
        held += ok as usize;
    }
    Verdict::check(
        found == 20 && held == 20,
        format!(
            "{held}/{found} feasible instances certified (scanned {seed} seeds); worst C1 {:.1e}, C2 {:.1e}, C3 {:.3}, C4/lambda {:.3}",
            worst.0, worst.1, worst.2, worst.3
        ),
    )
}

fn c8_bound_formulas() -> Verdict {
    let report = |mu: f64| IncoherenceReport {
        mu,
        gamma_u: 0.0,
        gamma_v: 0.1,
        beta_u: 1.0,
        xi_e: 0.0,
        xi_c: 0.0,
        alpha_lower: 1.0,
        alpha_upper: 1.0,
        alpha_estimated: false,
        rank_r: 5,
        mode: SparsityMode::EntryWise,
        mu_converged: true,
    };
    let b = recovery_bounds(&report(0.0), 100, 100, 20, 1, 5, None).unwrap();
    let s_ok = (b.s_max - 10.0).abs() < 1e-12;

    let mut monotone = true;
    for mu in [0.0, 0.1, 0.3] {
        let mut prev = f64::INFINITY;
        for s in 1..=100 {
            let b = recovery_bounds(&report(mu), 100, 100, 20, s, 5, None).unwrap();
            monotone &= b.lambda_max < prev;
            prev = b.lambda_max;
        }
    }
    Verdict::check(
        s_ok && monotone,
        format!(
            "s_max = {} (want 10); lambda_max strictly decreasing over 100 sparsities: {monotone}",
            b.s_max
        ),
    )
}

fn read_scene(dir: &Path, name: &str) -> HyperCube {
    let cube = formats::read_cube(&dir.join(format!("{name}.json"))).unwrap();
    let (_, _, labels) = formats::read_labels(&dir.join(format!("{name}_labels.csv"))).unwrap();
    cube.with_labels(labels).unwrap()
}

fn crop(cube: &HyperCube, r0: usize, c0: usize, h: usize, w: usize) -> HyperCube {
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
            .flat_map(|r| (c0..c0 + w).map(move |c| l[r * cube.width() + c]))
            .collect()
    });
    HyperCube::new(h, w, cube.bands(), voxels, labels).unwrap()
}

fn scene_auc(cube: &HyperCube, spec: &DictionarySpec, class: u32, mode: SparsityMode) -> f64 {
    let cfg = LocalizeConfig::new(LocalizeMethod::Direct, mode);
    let setup = hsi::prepare(cube, spec, Some(class), cfg).unwrap();
    parallel::localize(&setup, jobs())
        .unwrap()
        .roc
        .map_or(0.0, |r| r.auc)
}

fn c9_hyperspectral() -> Verdict {
    // dictionary learning property on synthetic data, always checked
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let atoms = unit_columns(&gaussian(20, 4, &mut rng));
    let codes = DenseMatrix::from_fn(4, 60, |i, j| {
        if (i + j) % 3 == 0 {
            rng.random_range(0.5..2.0)
        } else {
            0.0
        }
    });
    let y = &atoms.matmul(&codes) + &gaussian(20, 60, &mut rng).scale(0.01);
    let learned = hsi::learn_dictionary(&y, 4, 0.1, 30, 3).unwrap();
    let monotone = learned
        .objective
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let mut detail = format!("synthetic learning objective monotone: {monotone}");
    let mut pass = monotone;

    let Some(dir) = std::env::var_os("DRPCA_HSI_DIR").map(PathBuf::from) else {
        return Verdict {
            pass,
            skipped: true,
            detail: format!("{detail}; scenes skipped (DRPCA_HSI_DIR unset)"),
        };
    };
    let pines = read_scene(&dir, "indian_pines");
    let sampled = scene_auc(
        &pines,
        &DictionarySpec::Sampled {
            class: 16,
            count: 15,
            seed: 0,
        },
        16,
        SparsityMode::EntryWise,
    );
    let learned_spec = DictionarySpec::Learned {
        class: 16,
        atoms: 4,
        rho: 0.1,
        iters: 50,
        seed: 0,
    };
    let learned_auc = scene_auc(&pines, &learned_spec, 16, SparsityMode::EntryWise);
    let mut pavia = read_scene(&dir, "pavia");
    if let Ok(spec) = std::env::var("DRPCA_PAVIA_CROP") {
        let v: Vec<usize> = spec.split(',').map(|x| x.trim().parse().unwrap()).collect();
        pavia = crop(&pavia, v[0], v[1], v[2], v[3]);
    }
    let pavia_auc = scene_auc(
        &pavia,
        &DictionarySpec::Sampled {
            class: 5,
            count: 60,
            seed: 0,
        },
        5,
        SparsityMode::ColumnWise,
    );
    pass &= sampled >= 0.98 && learned_auc >= 0.90 && pavia_auc >= 0.98;
    detail.push_str(&format!(
        "; Indian Pines class 16 sampled d=15 AUC {sampled:.4} (>= 0.98), learned d=4 AUC {learned_auc:.4} (>= 0.90); \
         Pavia class 5 sampled d=60 column AUC {pavia_auc:.4} (>= 0.98)"
    ));
    Verdict::check(pass, detail)
}

fn cli(args: &[&str]) -> i32 {
    cli_run(std::iter::once("drpca").chain(args.iter().copied()))
}

fn tree(dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            tree(&p, out);
        } else {
            out.push((p.clone(), fs::read(&p).unwrap()));
        }
    }
}

fn c10_determinism() -> Verdict {
    let tmp = tempfile::TempDir::new().unwrap();
    let root = tmp.path();
    let phase = |jobs: &str, out: &Path| {
        cli(&[
            "phase",
            "--mode",
            "entry",
            "--n",
            "30",
            "--m",
            "30",
            "--d",
            "6",
            "--r-grid",
            "1:5:2",
            "--s-grid",
            "10,40",
            "--trials",
            "4",
            "--lambdas",
            "8",
            "--seed",
            "10",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ])
    };
    let (one, eight) = (root.join("p1.csv"), root.join("p8.csv"));
    let mut ok = phase("1", &one) == EXIT_OK && phase("8", &eight) == EXIT_OK;
    let same_phase = ok && fs::read(&one).unwrap() == fs::read(&eight).unwrap();

    // every seeded subcommand twice into separate trees
    let cube = HyperCube::new(
        4,
        5,
        6,
        (0..120)
            .map(|k| ((k * 37 % 11) as f64 + 1.0) / 11.0)
            .collect(),
        Some((0..20).map(|k| if k % 7 == 3 { 2 } else { 1 }).collect()),
    )
    .unwrap();
    formats::write_cube(&root.join("cube.json"), &cube).unwrap();
    formats::write_labels(&root.join("labels.csv"), 4, 5, cube.labels().unwrap()).unwrap();
    let mut runs = Vec::new();
    for tag in ["a", "b"] {
        let dir = root.join(tag);
        let s = |p: &str| dir.join(p).to_str().unwrap().to_string();
        let cube_path = root.join("cube.json").to_str().unwrap().to_string();
        let labels_path = root.join("labels.csv").to_str().unwrap().to_string();
        ok &= cli(&[
            "synth",
            "--mode",
            "entry",
            "--n",
            "20",
            "--m",
            "20",
            "--d",
            "5",
            "--r",
            "2",
            "--s",
            "10",
            "--seed",
            "3",
            "--out",
            &s("syn"),
        ]) == EXIT_OK;
        ok &= cli(&[
            "demix",
            "--data",
            &s("syn/M.dmx"),
            "--dict",
            &s("syn/D.dmx"),
            "--mode",
            "entry",
            "--lambda-grid",
            "4",
            "--out",
            &s("dm"),
        ]) == EXIT_OK;
        ok &= cli(&[
            "phase",
            "--mode",
            "column",
            "--n",
            "20",
            "--m",
            "40",
            "--d",
            "10",
            "--r-grid",
            "2",
            "--s-grid",
            "4",
            "--trials",
            "3",
            "--lambdas",
            "5",
            "--seed",
            "8",
            "--jobs",
            "4",
            "--out",
            &s("phase.csv"),
        ]) == EXIT_OK;
        ok &= cli(&[
            "localize",
            "--cube",
            &cube_path,
            "--labels",
            &labels_path,
            "--class",
            "2",
            "--dict-mode",
            "learned",
            "--d",
            "2",
            "--learn-iters",
            "5",
            "--seed",
            "1",
            "--lambdas",
            "6",
            "--jobs",
            "3",
            "--out",
            &s("loc"),
        ]) == EXIT_OK;
        ok &= cli(&[
            "localize",
            "--cube",
            &cube_path,
            "--labels",
            &labels_path,
            "--class",
            "1",
            "--d",
            "3",
            "--seed",
            "2",
            "--mode",
            "column",
            "--lambdas",
            "6",
            "--out",
            &s("loc2"),
        ]) == EXIT_OK;
        let mut files = Vec::new();
        tree(&dir, &mut files);
        runs.push(
            files
                .into_iter()
                .map(|(p, b)| (p.strip_prefix(&dir).unwrap().to_path_buf(), b))
                .collect::<Vec<_>>(),
        );
    }
    let same_runs = runs[0] == runs[1];
    Verdict::check(
        ok && same_phase && same_runs,
        format!(
            "all commands exited 0: {ok}; phase --jobs 1 vs 8 identical: {same_phase}; {} seeded output files byte-identical: {same_runs}",
            runs[0].len()
        ),
    )
}

type Criterion = (usize, &'static str, Duration, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "prox oracles", Duration::from_secs(1), c1_prox),
        (
            2,
            "lambda-boundary zeroing",
            Duration::from_secs(30),
            c2_boundary_zeroing,
        ),
        (
            3,
            "entry-wise recovery",
            Duration::from_secs(20 * 60),
            c3_entry_recovery,
        ),
        (
            4,
            "pseudo-inverse failure mode",
            Duration::from_secs(10 * 60),
            c4_pinv_failure,
        ),
        (
            5,
            "column-wise recovery",
            Duration::from_secs(30 * 60),
            c5_column_recovery,
        ),
        (
            6,
            "diagnostics oracle equivalence",
            Duration::from_secs(60),
            c6_diagnostics_oracles,
        ),
        (
            7,
            "certificate conditions",
            Duration::from_secs(2 * 60),
            c7_certificates,
        ),
        (
            8,
            "bound formulas",
            Duration::from_secs(1),
            c8_bound_formulas,
        ),
        (
            9,
            "hyperspectral integration",
            Duration::from_secs(45 * 60),
            c9_hyperspectral,
        ),
        (
            10,
            "determinism",
            Duration::from_secs(5 * 60),
            c10_determinism,
        ),
    ];
    let only: Option<Vec<usize>> = std::env::var("DRPCA_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    // libtest-style flags (e.g. from `cargo test -- --nocapture`) are ignored
    let mut failed = 0;
    for (id, name, budget, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let v = f();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = v.pass && in_time;
        let word = match (pass, v.skipped) {
            (false, _) => "FAIL",
            (true, true) => "PASS (partial, data skipped)",
            (true, false) => "PASS",
        };
        println!(
            "criterion {id:>2} [{name}]: {word} | {} | {:.1}s of {}s budget{}",
            v.detail,
            took.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { " (over budget)" }
        );
        failed += (!pass) as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
