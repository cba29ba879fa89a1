//! Proximal maps of the nuclear norm, the entrywise l1 norm and the column
//! l1,2 norm, plus the gradient Lipschitz constant of the data-fit term.

use alloc::vec::Vec;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{self, from_faer, DenseMatrix, RANK_TOLERANCE};
use crate::{Error, Result};

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(alloc::format!(
            "threshold must be finite and >= 0, got {tau}"
        )))
    }
}

#[inline]
pub(crate) fn shrink(x: f64, tau: f64) -> f64 {
    let a = x.abs() - tau;
    if a > 0.0 {
        a.copysign(x)
    } else {
        0.0
    }
}

/// `sgn(y) * max(|y| - tau, 0)` applied to every entry.
pub fn soft_threshold_entries(y: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    check_tau(tau)?;
    Ok(y.map(|x| shrink(x, tau)))
}

/// Scales each column `y_j` by `max(1 - tau / ||y_j||, 0)`.
pub fn column_soft_threshold(y: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    check_tau(tau)?;
    let mut out = y.as_faer().to_owned();
    column_shrink_in_place(&mut out, tau);
    Ok(from_faer(out.as_ref()))
}

pub(crate) fn column_shrink_in_place(y: &mut Mat<f64>, tau: f64) {
    for j in 0..y.ncols() {
        let col = y.col_as_slice_mut(j);
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = if norm > tau { 1.0 - tau / norm } else { 0.0 };
        col.iter_mut().for_each(|x| *x *= scale);
    }
}

pub(crate) fn entry_shrink_in_place(y: &mut Mat<f64>, tau: f64) {
    for j in 0..y.ncols() {
        y.col_as_slice_mut(j)
            .iter_mut()
            .for_each(|x| *x = shrink(*x, tau));
    }
}

/// Nuclear norm and rank of a thresholded matrix.
pub(crate) struct SvtInfo {
    pub nuclear: f64,
    #[allow(dead_code)]
    pub rank: usize,
}

/// Singular value thresholding through the eigendecomposition of the smaller
/// Gram matrix, written into `out`. With `Y Y^T = U diag(s^2) U^T` the
/// result is `U_k diag(1 - tau/s_i) U_k^T Y` over the singular values above
/// `tau` (and above the rank tolerance).
pub(crate) fn svt_into(y: MatRef<'_, f64>, tau: f64, out: &mut Mat<f64>) -> Result<SvtInfo> {
    let (n, m) = (y.nrows(), y.ncols());
    out.fill(0.0);
    if n == 0 || m == 0 {
        return Ok(SvtInfo {
            nuclear: 0.0,
            rank: 0,
        });
    }
    let wide = n <= m;
    let gram = if wide {
        y * y.transpose()
    } else {
        y.transpose() * y
    };
    let (vals, vecs) = linalg::symmetric_eigen(gram.as_ref())?;
    let top = vals.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    if !top.is_finite() {
        return Err(Error::Numerical(
            "non-finite singular value in thresholding".into(),
        ));
    }
    // eigenvalues come nondecreasing; walk from the top
    let mut keep: Vec<(usize, f64)> = Vec::new();
    for (idx, &lam) in vals.iter().enumerate().rev() {
        let s = lam.max(0.0).sqrt();
        if s <= tau || s <= RANK_TOLERANCE * top {
            break;
        }
        keep.push((idx, s));
    }
    let rank = keep.len();
    let nuclear = keep.iter().map(|&(_, s)| s - tau).sum();
    if rank == 0 {
        return Ok(SvtInfo {
            nuclear: 0.0,
            rank: 0,
        });
    }
    let p = vecs.nrows();
    let basis = Mat::<f64>::from_fn(p, rank, |i, k| vecs[(i, keep[k].0)]);
    let weighted = Mat::<f64>::from_fn(p, rank, |i, k| {
        vecs[(i, keep[k].0)] * (1.0 - tau / keep[k].1)
    });
    if wide {
        // U_k W U_k^T Y
        let proj = basis.transpose() * y;
        matmul(
            out.as_mut(),
            Accum::Replace,
            &weighted,
            &proj,
            1.0,
            Par::Seq,
        );
    } else {
        // Y V_k W V_k^T
        let proj = y * &weighted;
        matmul(
            out.as_mut(),
            Accum::Replace,
            &proj,
            basis.transpose(),
            1.0,
            Par::Seq,
        );
    }
    Ok(SvtInfo { nuclear, rank })
}

/// Shrinks the singular values of `y` by `tau`, dropping those that reach zero.
pub fn singular_value_threshold(y: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    check_tau(tau)?;
    if tau == 0.0 {
        return Ok(y.clone());
    }
    let mut out = Mat::<f64>::zeros(y.rows(), y.cols());
    svt_into(y.as_faer(), tau, &mut out)?;
    Ok(from_faer(out.as_ref()))
}

/// Largest eigenvalue of `[I D]^T [I D]`, which equals `1 + ||D||_2^2`.
pub fn lipschitz_constant(dictionary: &DenseMatrix) -> Result<f64> {
    let s = linalg::spectral_norm(dictionary)?;
    Ok(1.0 + s * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matrix_norm, singular_values, NormKind};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn entry_shrinkage_examples() {
        let y = DenseMatrix::from_rows(&[&[3.0, -1.0]]).unwrap();
        assert_eq!(soft_threshold_entries(&y, 2.0).unwrap().data(), &[1.0, 0.0]);
        let y = DenseMatrix::from_rows(&[&[-3.0, 0.5]]).unwrap();
        assert_eq!(
            soft_threshold_entries(&y, 1.0).unwrap().data(),
            &[-2.0, 0.0]
        );

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = gaussian(4, 5, &mut rng);
        assert_eq!(soft_threshold_entries(&r, 0.0).unwrap(), r);
        assert!(soft_threshold_entries(&r, r.max_abs()).unwrap().is_zero());
        assert!(soft_threshold_entries(&r, -1.0).is_err());
    }

    #[test]
    fn column_shrinkage_examples() {
        let y = DenseMatrix::new(2, 1, vec![3.0, 4.0]).unwrap();
        assert!(column_soft_threshold(&y, 5.0).unwrap().is_zero());
        let out = column_soft_threshold(&y, 2.5).unwrap();
        assert_relative_eq!(out.get(0, 0), 1.5, epsilon = 1e-15);
        assert_relative_eq!(out.get(1, 0), 2.0, epsilon = 1e-15);
        let z = DenseMatrix::zeros(3, 1);
        assert!(column_soft_threshold(&z, 1.0).unwrap().is_zero());
    }

    #[test]
    fn one_by_one_column_and_entry_agree() {
        for x in [-2.0, -0.3, 0.0, 0.7, 5.0] {
            let y = DenseMatrix::new(1, 1, vec![x]).unwrap();
            let a = column_soft_threshold(&y, 0.5).unwrap();
            let b = soft_threshold_entries(&y, 0.5).unwrap();
            assert!((&a - &b).max_abs() <= 1e-15);
        }
    }

    #[test]
    fn svt_examples() {
        let y = DenseMatrix::from_diagonal(&[3.0, 1.0]);
        let out = singular_value_threshold(&y, 2.0).unwrap();
        let expect = DenseMatrix::from_diagonal(&[1.0, 0.0]);
        assert!((&out - &expect).max_abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = gaussian(6, 9, &mut rng);
        assert!((&singular_value_threshold(&r, 0.0).unwrap() - &r).max_abs() < 1e-10);
    }

    #[test]
    fn svt_rank_drops_between_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (rows, cols) in [(10, 8), (8, 10)] {
            let y = gaussian(rows, 3, &mut rng).matmul(&gaussian(3, cols, &mut rng));
            let s = singular_values(&y).unwrap();
            let tau = 0.5 * (s[1] + s[2]);
            let out = singular_value_threshold(&y, tau).unwrap();
            let t = singular_values(&out).unwrap();
            let rank = t.iter().filter(|&&x| x > 1e-10 * t[0]).count();
            assert_eq!(rank, 2);
            assert_relative_eq!(t[0], s[0] - tau, epsilon = 1e-9 * s[0]);
            assert_relative_eq!(t[1], s[1] - tau, epsilon = 1e-9 * s[0]);
        }
    }

    #[test]
    fn svt_matches_explicit_svd_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (rows, cols) in [(7, 12), (12, 7), (5, 5)] {
            let y = gaussian(rows, cols, &mut rng);
            let tau = 1.3;
            let f = crate::linalg::svd(&y, None).unwrap();
            let k = f.sigma.iter().filter(|&&s| s > tau).count();
            let us = DenseMatrix::from_fn(rows, k, |i, c| f.u.get(i, c) * (f.sigma[c] - tau));
            let vk = DenseMatrix::from_fn(cols, k, |i, c| f.v.get(i, c));
            let expect = us.matmul(&vk.transpose());
            let got = singular_value_threshold(&y, tau).unwrap();
            assert!((&got - &expect).max_abs() < 1e-9);
            let mut buf = Mat::<f64>::zeros(rows, cols);
            let inner = svt_into(y.as_faer(), tau, &mut buf).unwrap();
            assert_eq!(inner.rank, k);
            assert_relative_eq!(
                inner.nuclear,
                matrix_norm(&expect, NormKind::Nuclear).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn lipschitz_examples() {
        assert_relative_eq!(
            lipschitz_constant(&DenseMatrix::identity(4)).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        let col = DenseMatrix::new(3, 1, vec![0.0, 0.6, 0.8]).unwrap();
        assert_relative_eq!(lipschitz_constant(&col).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn lipschitz_matches_explicit_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let raw = gaussian(10, 6, &mut rng);
        let norms = raw.column_norms();
        let d = DenseMatrix::from_fn(10, 6, |i, j| raw.get(i, j) / norms[j]);
        // [I D] materialized
        let stacked = DenseMatrix::from_fn(10, 16, |i, j| {
            if j < 10 {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            } else {
                d.get(i, j - 10)
            }
        });
        let gram = stacked.transpose().matmul(&stacked);
        let (vals, _) = linalg::symmetric_eigen(gram.as_faer()).unwrap();
        let top = *vals.last().unwrap();
        assert_relative_eq!(lipschitz_constant(&d).unwrap(), top, epsilon = 1e-10);
    }

    fn pair(seed: u64, rows: usize, cols: usize) -> (DenseMatrix, DenseMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (
            gaussian(rows, cols, &mut rng),
            gaussian(rows, cols, &mut rng).scale(rng.random_range(0.1..3.0)),
        )
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(128))]
        #[test]
        fn prox_maps_are_non_expansive(seed in 0u64..1_000_000, rows in 1usize..7, cols in 1usize..7, tau in 0.0f64..3.0) {
            let (x, y) = pair(seed, rows, cols);
            let gap = (&x - &y).frobenius_norm();
            let maps: [fn(&DenseMatrix, f64) -> Result<DenseMatrix>; 3] =
                [singular_value_threshold, soft_threshold_entries, column_soft_threshold];
            for f in maps {
                let moved = (&f(&x, tau).unwrap() - &f(&y, tau).unwrap()).frobenius_norm();
                proptest::prop_assert!(moved <= gap + 1e-10, "{} > {}", moved, gap);
            }
        }
    }
}
