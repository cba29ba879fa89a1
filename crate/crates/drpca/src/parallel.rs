//! Thread-pool runners for the embarrassingly parallel parts: trials of a
//! phase sweep and lambda values of a localization. Results land in slots
//! indexed by work item, so output does not depend on the thread count.

use drpca_core::hsi::{summarize, Candidate, LocalizationResult, LocalizationSetup};
use drpca_core::synth::{aggregate, run_trial, PhaseCellResult, SweepConfig, TrialOutcome};
use drpca_core::{Error, Result};
use rayon::prelude::*;

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Parallel counterpart of `drpca_core::synth::phase_sweep`.
pub fn phase_sweep(
    cfg: &SweepConfig,
    cells: &[(usize, usize)],
    jobs: usize,
) -> Result<Vec<PhaseCellResult>> {
    if cells.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial per cell".into(),
        ));
    }
    let items: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = pool(jobs)?.install(|| {
        items
            .par_iter()
            .map(|&(c, t)| run_trial(cfg, cells[c].0, cells[c].1, t))
            .collect()
    });
    Ok(cells
        .iter()
        .zip(outcomes.chunks(cfg.trials))
        .map(|(&(r, s), chunk)| aggregate(cfg, r, s, chunk))
        .collect())
}

/// Runs every candidate of a prepared localization on `jobs` threads.
pub fn localize(setup: &LocalizationSetup, jobs: usize) -> Result<LocalizationResult> {
    let candidates: Vec<Candidate> = pool(jobs)?.install(|| {
        (0..setup.candidate_count())
            .into_par_iter()
            .map(|k| setup.run_candidate(k))
            .collect::<Result<Vec<_>>>()
    })?;
    summarize(setup, candidates)
}
