//! PCA/SVD subspace baseline: decompose the patch matrix, keep the leading
//! singular directions, reconstruct by truncation.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Thin SVD of a data matrix with strictly positive, non-increasing
/// singular values and orthonormal bases.
#[derive(Debug, Clone)]
pub struct SvdDecomposition {
    pub left_basis: Mat,
    pub singular_values: Vec<f64>,
    pub right_basis: Mat,
}

impl SvdDecomposition {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Computes the thin SVD, keeping singular values above
/// `rank_tolerance * sigma_1`.
pub fn svd_decompose(data: &Mat, rank_tolerance: f64) -> Result<SvdDecomposition> {
    if !(rank_tolerance >= 0.0) {
        return Err(Error::InvalidArgument(
            "rank tolerance must be non-negative".into(),
        ));
    }
    let svd = linalg::svd_thin(data, rank_tolerance)?;
    Ok(SvdDecomposition {
        left_basis: svd.u,
        singular_values: svd.sigma,
        right_basis: svd.v,
    })
}

/// Rank-`principal_count` truncation `sum_i u_i sigma_i v_i^T`.
pub fn pca_reconstruct(svd: &SvdDecomposition, principal_count: usize) -> Result<Mat> {
    if principal_count > svd.rank() {
        return Err(Error::InvalidArgument(format!(
            "principal count {} exceeds rank {}",
            principal_count,
            svd.rank()
        )));
    }
    let n = svd.left_basis.rows();
    let m = svd.right_basis.rows();
    let mut out = Mat::zeros(n, m);
    for i in 0..principal_count {
        let u = svd.left_basis.col(i);
        let v = svd.right_basis.col(i);
        let s = svd.singular_values[i];
        for j in 0..m {
            let w = s * v[j];
            let col = out.col_mut(j);
            for r in 0..n {
                col[r] += w * u[r];
            }
        }
    }
    Ok(out)
}

/// Smallest `P` whose leading singular energy reaches
/// `energy_fraction * total energy`.
pub fn pca_select_count(svd: &SvdDecomposition, energy_fraction: f64) -> Result<usize> {
    if svd.rank() == 0 {
        return Err(Error::InvalidArgument(
            "empty decomposition has no components to select".into(),
        ));
    }
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "energy fraction must be in (0, 1], got {energy_fraction}"
        )));
    }
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let target = energy_fraction * total;
    let mut acc = 0.0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        acc += s * s;
        if acc >= target {
            return Ok(i + 1);
        }
    }
    Ok(svd.rank())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_mat(n: usize, m: usize, seed: u64) -> Mat {
        let mut rng = SplitMix64::new(seed);
        let mut x = Mat::zeros(n, m);
        for j in 0..m {
            for v in x.col_mut(j) {
                *v = rng.gaussian();
            }
        }
        x
    }

    #[test]
    fn rank_one_outer_product() {
        let mut u = vec![0.0; 6];
        let mut v = vec![0.0; 9];
        for (i, x) in u.iter_mut().enumerate() {
            *x = (i as f64 + 1.0).cos();
        }
        for (j, x) in v.iter_mut().enumerate() {
            *x = (j as f64 * 0.7).sin() + 0.1;
        }
        linalg::normalize(&mut u);
        linalg::normalize(&mut v);
        let mut x = Mat::zeros(6, 9);
        for j in 0..9 {
            for i in 0..6 {
                x.set(i, j, 4.0 * u[i] * v[j]);
            }
        }
        let svd = svd_decompose(&x, 1e-10).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!((svd.singular_values[0] - 4.0).abs() <= 1e-10);
    }

    #[test]
    fn zero_matrix_empty_decomposition() {
        let svd = svd_decompose(&Mat::zeros(5, 7), 1e-10).unwrap();
        assert_eq!(svd.rank(), 0);
        assert!(pca_select_count(&svd, 0.9).is_err());
    }

    #[test]
    fn full_rank_reconstruction_and_tail_energy() {
        let x = random_mat(10, 20, 314);
        let svd = svd_decompose(&x, 1e-10).unwrap();
        let full = pca_reconstruct(&svd, svd.rank()).unwrap();
        let mut err = 0.0;
        for j in 0..20 {
            for i in 0..10 {
                err += (full.get(i, j) - x.get(i, j)).powi(2);
            }
        }
        assert!(err.sqrt() <= 1e-10 * x.frob_norm());

        // Eckart-Young: truncation error^2 equals the tail singular energy.
        for p in 0..svd.rank() {
            let approx = pca_reconstruct(&svd, p).unwrap();
            let mut err2 = 0.0;
            for j in 0..20 {
                for i in 0..10 {
                    err2 += (approx.get(i, j) - x.get(i, j)).powi(2);
                }
            }
            let tail: f64 = svd.singular_values[p..].iter().map(|s| s * s).sum();
            assert!(
                (err2 - tail).abs() <= 1e-8 * tail.max(1e-12),
                "p={p}: {err2} vs {tail}"
            );
        }
    }

    #[test]
    fn reconstruct_zero_components_is_zero() {
        let x = random_mat(4, 6, 2);
        let svd = svd_decompose(&x, 1e-10).unwrap();
        let zero = pca_reconstruct(&svd, 0).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
        assert!(pca_reconstruct(&svd, svd.rank() + 1).is_err());
    }

    #[test]
    fn select_count_hand_case_and_monotonicity() {
        let svd = SvdDecomposition {
            left_basis: Mat::identity(3),
            singular_values: vec![10.0, 1.0, 1.0],
            right_basis: Mat::identity(3),
        };
        assert_eq!(pca_select_count(&svd, 0.9).unwrap(), 1);
        assert_eq!(pca_select_count(&svd, 1.0).unwrap(), 3);

        let x = random_mat(8, 15, 5);
        let svd = svd_decompose(&x, 1e-10).unwrap();
        let mut last = 0;
        for f in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0] {
            let p = pca_select_count(&svd, f).unwrap();
            assert!(p >= last, "fraction {f} gave smaller P");
            last = p;
        }
    }
}
