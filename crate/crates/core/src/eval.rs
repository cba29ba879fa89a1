//! Success rules for planted instances and ROC analysis for detectors.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::model::{column_support, Components, OracleModel, DEFAULT_COLUMN_THRESHOLD};
use crate::synth::relative_error;
use crate::{Error, Result};

/// Largest relative Frobenius error accepted as recovery.
pub const RELATIVE_ERROR_TOLERANCE: f64 = 0.02;
/// Smallest outlier-detection precision accepted as recovery.
pub const PRECISION_TARGET: f64 = 0.99;
/// Number of ROC thresholds used by the hyperspectral experiments.
pub const DEFAULT_THRESHOLD_COUNT: usize = 1000;

/// Relative errors of `L` and `S`; absolute errors where the truth is zero.
pub fn entrywise_errors(truth: &Components, found: &Components) -> (f64, f64) {
    (
        relative_error(&found.low_rank, &truth.low_rank),
        relative_error(&found.sparse_coeff, &truth.sparse_coeff),
    )
}

/// Both relative errors within [`RELATIVE_ERROR_TOLERANCE`].
pub fn success_entrywise(truth: &Components, found: &Components) -> bool {
    let (el, es) = entrywise_errors(truth, found);
    el <= RELATIVE_ERROR_TOLERANCE && es <= RELATIVE_ERROR_TOLERANCE
}

/// Precision of the detected outlier columns (column norm above
/// `threshold`). An empty detection scores 1 when there are no true
/// outliers and 0 otherwise.
pub fn outlier_precision(found: &Components, truth: &OracleModel, threshold: f64) -> f64 {
    let detected = column_support(&found.sparse_coeff, threshold);
    let outliers = truth.outlier_columns();
    if detected.is_empty() {
        return if outliers.is_empty() { 1.0 } else { 0.0 };
    }
    let tp = detected
        .iter()
        .filter(|j| outliers.binary_search(j).is_ok())
        .count();
    tp as f64 / detected.len() as f64
}

/// Precision at the default column threshold and whether it reaches
/// [`PRECISION_TARGET`].
pub fn success_columnwise(found: &Components, truth: &OracleModel) -> (f64, bool) {
    let p = outlier_precision(found, truth, DEFAULT_COLUMN_THRESHOLD);
    (p, p >= PRECISION_TARGET)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Decreasing thresholds; a sample is called positive when its score is
    /// at least the threshold. For a flipped curve these apply to the
    /// negated scores.
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub auc: f64,
    pub flipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&b| b).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(
            "undefined ROC: labels contain a single class".into(),
        ));
    }
    Ok((pos, neg))
}

/// Trapezoidal area under points ordered by increasing false positive rate,
/// closed with the (0,0) and (1,1) corners.
fn trapezoid(fpr: &[f64], tpr: &[f64]) -> f64 {
    let mut area = 0.0;
    let (mut px, mut py) = (0.0, 0.0);
    for (&x, &y) in fpr.iter().zip(tpr).chain(core::iter::once((&1.0, &1.0))) {
        area += (x - px) * (y + py) / 2.0;
        px = x;
        py = y;
    }
    area
}

/// ROC of the rule `score >= threshold` over `threshold_count` evenly spaced
/// thresholds in `(lo, max score]`, where `lo` is 0 for nonnegative scores
/// and the smallest score otherwise. When the area is below 0.5 the curve of
/// the inverted classifier (negated scores) is returned with `flipped` set.
pub fn roc(scores: &[f64], labels: &[bool], threshold_count: usize) -> Result<RocCurve> {
    let curve = roc_unflipped(scores, labels, threshold_count)?;
    if curve.auc >= 0.5 {
        return Ok(curve);
    }
    let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
    let mut inverted = roc_unflipped(&negated, labels, threshold_count)?;
    inverted.flipped = true;
    Ok(inverted)
}

/// [`roc`] without the inversion rule.
pub fn roc_unflipped(scores: &[f64], labels: &[bool], threshold_count: usize) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(
            "scores and labels differ in length".into(),
        ));
    }
    if threshold_count == 0 {
        return Err(Error::InvalidParameter(
            "need at least one threshold".into(),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let (pos, neg) = class_counts(labels)?;
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = scores.iter().copied().fold(0.0, f64::min);
    let span = hi - lo;
    let thresholds: Vec<f64> = (0..threshold_count)
        .map(|k| lo + span * (threshold_count - k) as f64 / threshold_count as f64)
        .collect();

    // sort once, then sweep thresholds from high to low
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp, mut cursor) = (0usize, 0usize, 0usize);
    let mut tpr = Vec::with_capacity(threshold_count);
    let mut fpr = Vec::with_capacity(threshold_count);
    for &t in &thresholds {
        while cursor < order.len() && scores[order[cursor]] >= t {
            if labels[order[cursor]] {
                tp += 1;
            } else {
                fp += 1;
            }
            cursor += 1;
        }
        tpr.push(tp as f64 / pos as f64);
        fpr.push(fp as f64 / neg as f64);
    }
    let auc = trapezoid(&fpr, &tpr);
    Ok(RocCurve {
        thresholds,
        tpr,
        fpr,
        auc,
        flipped: false,
    })
}

/// Point with the largest `tpr - fpr`; ties go to the lower false positive
/// rate, then to the higher threshold.
pub fn best_operating_point(curve: &RocCurve) -> OperatingPoint {
    let mut best = OperatingPoint {
        threshold: curve.thresholds.first().copied().unwrap_or(f64::NAN),
        tpr: curve.tpr.first().copied().unwrap_or(0.0),
        fpr: curve.fpr.first().copied().unwrap_or(0.0),
    };
    for k in 0..curve.thresholds.len() {
        let (t, f) = (curve.tpr[k], curve.fpr[k]);
        let (j, bj) = (t - f, best.tpr - best.fpr);
        if j > bj || (j == bj && f < best.fpr) {
            best = OperatingPoint {
                threshold: curve.thresholds[k],
                tpr: t,
                fpr: f,
            };
        }
    }
    best
}

/// How the column-norm threshold of a lambda-scan ROC is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Pick, among evenly spaced candidates, the threshold with the largest area.
    MaximizeAuc,
    Fixed(f64),
}

/// ROC traced by the regularization parameter: each entry of `per_lambda`
/// holds the column norms of `S` for one lambda; at column threshold `tau`
/// every lambda contributes the point of the rule `norm > tau`. The points
/// are ordered by false positive rate before integration. Returns the curve
/// (whose `thresholds` are the lambda indices as floats, in curve order) and
/// the threshold used.
pub fn lambda_scan_roc(
    per_lambda: &[Vec<f64>],
    labels: &[bool],
    mode: ThresholdMode,
    threshold_count: usize,
) -> Result<(RocCurve, f64)> {
    let (pos, neg) = class_counts(labels)?;
    if per_lambda.is_empty() || per_lambda.iter().any(|v| v.len() != labels.len()) {
        return Err(Error::Dimension(
            "each lambda needs one score per label".into(),
        ));
    }
    let curve_at = |tau: f64| -> RocCurve {
        let mut pts: Vec<(f64, f64, usize)> = per_lambda
            .iter()
            .enumerate()
            .map(|(k, norms)| {
                let (mut tp, mut fp) = (0usize, 0usize);
                for (&x, &lab) in norms.iter().zip(labels) {
                    if x > tau {
                        if lab {
                            tp += 1;
                        } else {
                            fp += 1;
                        }
                    }
                }
                (fp as f64 / neg as f64, tp as f64 / pos as f64, k)
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let fpr: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let tpr: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let auc = trapezoid(&fpr, &tpr);
        RocCurve {
            thresholds: pts.iter().map(|p| p.2 as f64).collect(),
            tpr,
            fpr,
            auc,
            flipped: false,
        }
    };
    match mode {
        ThresholdMode::Fixed(tau) => Ok((curve_at(tau), tau)),
        ThresholdMode::MaximizeAuc => {
            if threshold_count == 0 {
                return Err(Error::InvalidParameter(
                    "need at least one threshold".into(),
                ));
            }
            let top = per_lambda.iter().flatten().copied().fold(0.0, f64::max);
            let mut best: Option<(RocCurve, f64)> = None;
            for k in 0..threshold_count {
                // candidates below the top norm, from 0 upward
                let tau = top * k as f64 / threshold_count as f64;
                let c = curve_at(tau);
                if best.as_ref().is_none_or(|b| c.auc > b.0.auc) {
                    best = Some((c, tau));
                }
            }
            Ok(best.expect("at least one candidate"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn comps(l: DenseMatrix, s: DenseMatrix) -> Components {
        Components {
            low_rank: l,
            sparse_coeff: s,
            iterations: 0,
            final_residual: 0.0,
            objective: 0.0,
            converged: true,
        }
    }

    #[test]
    fn entrywise_rule() {
        let l = DenseMatrix::from_fn(4, 4, |i, j| (i + 2 * j) as f64 + 1.0);
        let s = DenseMatrix::identity(4);
        let truth = comps(l.clone(), s.clone());
        assert!(success_entrywise(&truth, &truth.clone()));
        let scaled = comps(l.scale(1.05), s);
        assert!(!success_entrywise(&truth, &scaled));
    }

    #[test]
    fn precision_rule() {
        let oracle = OracleModel::new(DenseMatrix::zeros(3, 0), vec![2, 3], 5).unwrap();
        let s = DenseMatrix::from_fn(2, 5, |_, j| if j == 2 || j == 3 { 1.0 } else { 0.0 });
        let (p, ok) = success_columnwise(&comps(DenseMatrix::zeros(3, 5), s), &oracle);
        assert_eq!((p, ok), (1.0, true));

        let all = DenseMatrix::from_fn(2, 5, |_, _| 1.0);
        let (p, ok) = success_columnwise(&comps(DenseMatrix::zeros(3, 5), all), &oracle);
        assert_eq!((p, ok), (2.0 / 5.0, false));

        let none = comps(DenseMatrix::zeros(3, 5), DenseMatrix::zeros(2, 5));
        assert_eq!(success_columnwise(&none, &oracle), (0.0, false));
        let empty_truth = OracleModel::new(DenseMatrix::zeros(3, 0), vec![], 5).unwrap();
        assert_eq!(success_columnwise(&none, &empty_truth), (1.0, true));
    }

    #[test]
    fn perfect_and_inverted_roc() {
        let labels = [true, true, false, false, false];
        let scores = [0.9, 0.8, 0.1, 0.2, 0.0];
        let c = roc(&scores, &labels, 100).unwrap();
        assert_eq!(c.auc, 1.0);
        assert!(!c.flipped);
        let p = best_operating_point(&c);
        assert_eq!((p.tpr, p.fpr), (1.0, 0.0));

        let inverted: Vec<f64> = labels.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect();
        let c = roc(&inverted, &labels, 100).unwrap();
        assert!(c.flipped);
        assert_eq!(c.auc, 1.0);
    }

    #[test]
    fn constant_scores_pick_highest_threshold() {
        let labels = [true, false, true, false];
        let c = roc(&[0.5; 4], &labels, 10).unwrap();
        let p = best_operating_point(&c);
        assert_eq!(p.tpr - p.fpr, 0.0);
        assert_eq!(p.threshold, c.thresholds[0]);
        assert!((c.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc(&[0.1, 0.2], &[true, true], 10).is_err());
        assert!(roc(&[0.1, 0.2], &[false, false], 10).is_err());
    }

    #[test]
    fn random_scores_give_chance_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let labels: Vec<bool> = (0..1000).map(|_| rng.random::<bool>()).collect();
        let scores: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let c = roc_unflipped(&scores, &labels, 1000).unwrap();
        // Hanley-McNeil standard error at AUC 0.5
        let pos = labels.iter().filter(|&&b| b).count() as f64;
        let neg = 1000.0 - pos;
        let se = ((pos + neg + 1.0) / (12.0 * pos * neg)).sqrt();
        assert!((c.auc - 0.5).abs() < 3.0 * se, "auc {} se {}", c.auc, se);
    }

    #[test]
    fn curve_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels: Vec<bool> = (0..200).map(|i| i % 3 == 0).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|&b| rng.random::<f64>() + if b { 0.3 } else { 0.0 })
            .collect();
        let c = roc(&scores, &labels, 50).unwrap();
        assert!(c.thresholds.windows(2).all(|w| w[0] > w[1]));
        assert!(c.tpr.windows(2).all(|w| w[0] <= w[1]));
        assert!(c.fpr.windows(2).all(|w| w[0] <= w[1]));
        assert!(c.auc > 0.5 && c.auc <= 1.0);
    }

    #[test]
    fn lambda_scan_examples() {
        let labels = [true, false, false];
        // small lambda flags everything, large lambda only the target
        let per_lambda = vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ];
        let (c, tau) =
            lambda_scan_roc(&per_lambda, &labels, ThresholdMode::MaximizeAuc, 100).unwrap();
        assert_eq!(c.auc, 1.0);
        assert_eq!(tau, 0.0);
        let (c, _) = lambda_scan_roc(&per_lambda, &labels, ThresholdMode::Fixed(2.0), 100).unwrap();
        assert_eq!(c.auc, 0.5);
    }
}
