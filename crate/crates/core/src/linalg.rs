//! Minimal dense linear algebra used by the coding and decomposition stages.
//!
//! Everything here is deterministic: no randomized pivoting, fixed sweep
//! order, fixed accumulation order. That property is relied on by the
//! reproducibility contracts of the callers.

use crate::error::{Error, Result};

/// Dense column-major matrix of `f64`.
///
/// Column-major layout keeps patch vectors and dictionary atoms contiguous,
/// which is the access pattern of every hot loop in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from column-major data. `data.len()` must equal
    /// `rows * cols`.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "column-major buffer of {} values cannot hold a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Mutable views of two distinct columns.
    fn col_pair_mut(&mut self, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
        assert!(i < j);
        let (lo, hi) = self.data.split_at_mut(j * self.rows);
        (
            &mut lo[i * self.rows..(i + 1) * self.rows],
            &mut hi[..self.rows],
        )
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}

pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Least squares `min ||A x - b||_2` for a tall matrix given as column
/// slices, solved with Householder QR (re-factorized from scratch).
///
/// Returns `None` when the columns are numerically rank deficient, which a
/// caller treats as "this support cannot be extended".
pub fn lstsq_cols(cols: &[&[f64]], b: &[f64]) -> Option<Vec<f64>> {
    let n = cols.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let m = cols[0].len();
    debug_assert!(cols.iter().all(|c| c.len() == m));
    debug_assert_eq!(b.len(), m);
    if m < n {
        return None;
    }

    // Working copy: A in column-major, plus the transformed rhs.
    let mut a: Vec<f64> = Vec::with_capacity(m * n);
    for c in cols {
        a.extend_from_slice(c);
    }
    let mut rhs = b.to_vec();

    // Column scale for the rank test.
    let scale: f64 = cols
        .iter()
        .map(|c| norm2(c))
        .fold(0.0f64, |acc, v| acc.max(v));
    let tiny = 1e-12 * scale.max(1e-300);

    for k in 0..n {
        // Householder vector for column k, rows k..m.
        let alpha = {
            let col = &a[k * m + k..(k + 1) * m];
            let nrm = norm2(col);
            if col[0] >= 0.0 {
                -nrm
            } else {
                nrm
            }
        };
        if alpha.abs() <= tiny {
            return None;
        }
        // v = x - alpha * e1, stored over the column.
        a[k * m + k] -= alpha;
        let vnorm2: f64 = {
            let v = &a[k * m + k..(k + 1) * m];
            dot(v, v)
        };
        if vnorm2 <= 0.0 {
            return None;
        }

        // Apply H = I - 2 v v^T / (v^T v) to remaining columns and rhs.
        for j in (k + 1)..n {
            let coef = {
                let v = &a[k * m + k..(k + 1) * m];
                let c = &a[j * m + k..(j + 1) * m];
                2.0 * dot(v, c) / vnorm2
            };
            let (before, after) = a.split_at_mut(j * m);
            let v = &before[k * m + k..(k + 1) * m];
            let c = &mut after[k..m];
            for i in 0..v.len() {
                c[i] -= coef * v[i];
            }
        }
        {
            let v = &a[k * m + k..(k + 1) * m];
            let coef = 2.0 * dot(v, &rhs[k..]) / vnorm2;
            for i in 0..v.len() {
                rhs[k + i] -= coef * v[i];
            }
        }

        // R(k,k) = alpha; the column below is implicitly zero now.
        a[k * m + k] = alpha;
    }

    // Back substitution on the upper-triangular R stored in the columns.
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..n {
            s -= a[j * m + k] * x[j];
        }
        let r_kk = a[k * m + k];
        if r_kk.abs() <= tiny {
            return None;
        }
        x[k] = s / r_kk;
    }
    Some(x)
}

/// Thin singular value decomposition `X = U * diag(sigma) * V^T`.
///
/// `sigma` is non-increasing and strictly positive; columns beyond the
/// numerical rank are not included. `u` is `rows x r`, `v` is `cols x r`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

/// One-sided Jacobi SVD (Hestenes). Orthogonalizes the columns of `w` by
/// plane rotations, accumulating them into `v`. On return the columns of `w`
/// are mutually orthogonal: `w = U * diag(column norms)`.
fn jacobi_orthogonalize(w: &mut Mat, v: &mut Mat) {
    const TOL: f64 = 1e-15;
    const MAX_SWEEPS: usize = 60;

    let n = w.cols();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let a = dot(w.col(i), w.col(i));
                let b = dot(w.col(j), w.col(j));
                let c = dot(w.col(i), w.col(j));
                if a == 0.0 || b == 0.0 {
                    continue;
                }
                if c.abs() <= TOL * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;

                let (wi, wj) = w.col_pair_mut(i, j);
                rotate_pair(wi, wj, cs, sn);
                let (vi, vj) = v.col_pair_mut(i, j);
                rotate_pair(vi, vj, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
}

#[inline]
fn rotate_pair(x: &mut [f64], y: &mut [f64], cs: f64, sn: f64) {
    for k in 0..x.len() {
        let xi = x[k];
        let yi = y[k];
        x[k] = cs * xi - sn * yi;
        y[k] = sn * xi + cs * yi;
    }
}

/// Full-accuracy thin SVD of an arbitrary matrix, with the numerical rank
/// decided by `rank_tolerance` relative to the largest singular value.
///
/// A zero matrix yields an empty decomposition (`r = 0`).
pub fn svd_thin(x: &Mat, rank_tolerance: f64) -> Result<ThinSvd> {
    if !x.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let (rows, cols) = (x.rows(), x.cols());

    // Work on the orientation with fewer columns so Jacobi rotates at most
    // min(rows, cols) columns.
    let transposed = cols > rows;
    let mut w = if transposed {
        // w = X^T, size cols x rows
        let mut t = Mat::zeros(cols, rows);
        for j in 0..cols {
            for i in 0..rows {
                t.set(j, i, x.get(i, j));
            }
        }
        t
    } else {
        x.clone()
    };
    let small = w.cols();
    let mut v = Mat::identity(small);
    jacobi_orthogonalize(&mut w, &mut v);

    // Column norms are the singular values; sort descending, stable.
    let mut order: Vec<usize> = (0..small).collect();
    let norms: Vec<f64> = (0..small).map(|j| norm2(w.col(j))).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let sigma_max = norms[order[0]];
    let cutoff = rank_tolerance * sigma_max;
    let rank = order
        .iter()
        .take_while(|&&j| norms[j] > cutoff && norms[j] > 0.0)
        .count();

    // Left factor of the working orientation: normalized columns of w.
    let mut left = Mat::zeros(w.rows(), rank);
    let mut right = Mat::zeros(small, rank);
    let mut sigma = Vec::with_capacity(rank);
    for (out, &j) in order[..rank].iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        let dst = left.col_mut(out);
        let src = w.col(j);
        for i in 0..dst.len() {
            dst[i] = src[i] / s;
        }
        right.col_mut(out).copy_from_slice(v.col(j));
    }

    // Undo the orientation swap: X = U S V^T with U rows x r, V cols x r.
    if transposed {
        // X^T = left * S * right^T  =>  X = right * S * left^T
        Ok(ThinSvd {
            u: right,
            sigma,
            v: left,
        })
    } else {
        Ok(ThinSvd {
            u: left,
            sigma,
            v: right,
        })
    }
}

/// Best rank-1 factorization `E ~ sigma * u * v^T` by power iteration on the
/// Gram matrix `E E^T`, warm-started from `start` when it is usable.
///
/// The iteration monotonically increases the Rayleigh quotient, so the
/// returned pair is never a worse rank-1 fit of `E` than `start` paired with
/// its optimal row. Returns `None` for a numerically zero `E` (the caller
/// falls back to atom replacement).
pub fn top_singular_triple(e: &Mat, start: Option<&[f64]>) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let m = e.rows();
    let n = e.cols();
    let total = e.frob_norm();
    if total <= 1e-300 {
        return None;
    }

    // Gram matrix B = E E^T (m x m), symmetric, PSD.
    let mut b = vec![0.0; m * m];
    for j in 0..n {
        let c = e.col(j);
        for p in 0..m {
            let cp = c[p];
            if cp == 0.0 {
                continue;
            }
            let row = &mut b[p * m..(p + 1) * m];
            for q in 0..m {
                row[q] += cp * c[q];
            }
        }
    }

    let mut u = match start {
        Some(s) if s.len() == m && norm2(s) > 1e-12 => {
            let mut v = s.to_vec();
            normalize(&mut v);
            v
        }
        _ => fallback_start(e),
    };

    // If the warm start is (numerically) orthogonal to the column space,
    // restart from the dominant column of E.
    let mut bu = mat_vec_sym(&b, &u, m);
    if norm2(&bu) <= 1e-14 * total * total {
        u = fallback_start(e);
        bu = mat_vec_sym(&b, &u, m);
        if norm2(&bu) == 0.0 {
            return None;
        }
    }

    let mut lambda = dot(&u, &bu);
    for _ in 0..2000 {
        let mut next = bu;
        if normalize(&mut next) == 0.0 {
            return None;
        }
        bu = mat_vec_sym(&b, &next, m);
        let l = dot(&next, &bu);
        u = next;
        if (l - lambda).abs() <= 1e-14 * l.max(1e-300) {
            lambda = l;
            break;
        }
        lambda = l;
    }
    if lambda <= 0.0 {
        return None;
    }
    let sigma = lambda.sqrt();

    // v = E^T u / sigma
    let mut v = vec![0.0; n];
    for j in 0..n {
        v[j] = dot(e.col(j), &u) / sigma;
    }
    Some((u, sigma, v))
}

fn fallback_start(e: &Mat) -> Vec<f64> {
    let mut best = 0;
    let mut best_norm = -1.0;
    for j in 0..e.cols() {
        let n = norm2(e.col(j));
        if n > best_norm {
            best_norm = n;
            best = j;
        }
    }
    let mut v = e.col(best).to_vec();
    if normalize(&mut v) == 0.0 {
        // Zero matrix is rejected by the caller before this can matter.
        v[0] = 1.0;
    }
    v
}

fn mat_vec_sym(b: &[f64], x: &[f64], m: usize) -> Vec<f64> {
    let mut y = vec![0.0; m];
    for p in 0..m {
        y[p] = dot(&b[p * m..(p + 1) * m], x);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn lstsq_exact_square() {
        // [2 1; 1 3] x = [5; 6] -> x = (9/5, 7/5)
        let c0 = [2.0, 1.0];
        let c1 = [1.0, 3.0];
        let x = lstsq_cols(&[&c0, &c1], &[5.0, 6.0]).unwrap();
        approx(x[0], 9.0 / 5.0, 1e-12);
        approx(x[1], 7.0 / 5.0, 1e-12);
    }

    #[test]
    fn lstsq_overdetermined_projects() {
        // Fit y = a on three samples: least squares mean.
        let ones = [1.0, 1.0, 1.0];
        let x = lstsq_cols(&[&ones], &[1.0, 2.0, 6.0]).unwrap();
        approx(x[0], 3.0, 1e-12);
    }

    #[test]
    fn lstsq_rank_deficient_is_none() {
        let c0 = [1.0, 2.0, 3.0];
        let c1 = [2.0, 4.0, 6.0];
        assert!(lstsq_cols(&[&c0, &c1], &[1.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn svd_rank1() {
        // X = 4 * u v^T for unit u, v.
        let u = [0.6, 0.8];
        let v = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
        let mut x = Mat::zeros(2, 3);
        for j in 0..3 {
            for i in 0..2 {
                x.set(i, j, 4.0 * u[i] * v[j]);
            }
        }
        let svd = svd_thin(&x, 1e-10).unwrap();
        assert_eq!(svd.sigma.len(), 1);
        approx(svd.sigma[0], 4.0, 1e-12);
    }

    #[test]
    fn svd_zero_matrix_empty() {
        let x = Mat::zeros(3, 5);
        let svd = svd_thin(&x, 1e-10).unwrap();
        assert_eq!(svd.sigma.len(), 0);
        assert_eq!(svd.u.cols(), 0);
        assert_eq!(svd.v.cols(), 0);
    }

    #[test]
    fn svd_reconstructs_random() {
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let (m, n) = (10, 20);
        let mut x = Mat::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                x.set(i, j, next());
            }
        }
        let svd = svd_thin(&x, 1e-10).unwrap();
        // U S V^T == X to 1e-10 relative.
        let mut err = 0.0f64;
        for j in 0..n {
            for i in 0..m {
                let mut s = 0.0;
                for r in 0..svd.sigma.len() {
                    s += svd.u.get(i, r) * svd.sigma[r] * svd.v.get(j, r);
                }
                err += (s - x.get(i, j)).powi(2);
            }
        }
        assert!(err.sqrt() <= 1e-10 * x.frob_norm());
        // Orthonormal bases.
        for a in 0..svd.sigma.len() {
            for b in a..svd.sigma.len() {
                let expect = if a == b { 1.0 } else { 0.0 };
                approx(dot(svd.u.col(a), svd.u.col(b)), expect, 1e-10);
                approx(dot(svd.v.col(a), svd.v.col(b)), expect, 1e-10);
            }
        }
        // Non-increasing singular values.
        for w in svd.sigma.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn top_triple_matches_svd_on_random() {
        let mut state = 0xdead_beef_cafe_f00du64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let (m, n) = (8, 30);
        let mut e = Mat::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                e.set(i, j, next());
            }
        }
        let svd = svd_thin(&e, 1e-12).unwrap();
        let (u, sigma, v) = top_singular_triple(&e, None).unwrap();
        approx(sigma, svd.sigma[0], 1e-9 * svd.sigma[0]);
        // Rank-1 residual equals the tail energy of the SVD.
        let mut res = 0.0f64;
        for j in 0..n {
            for i in 0..m {
                res += (e.get(i, j) - sigma * u[i] * v[j]).powi(2);
            }
        }
        let tail: f64 = svd.sigma[1..].iter().map(|s| s * s).sum();
        approx(res, tail, 1e-8 * (1.0 + tail));
    }

    #[test]
    fn top_triple_zero_is_none() {
        let e = Mat::zeros(4, 4);
        assert!(top_singular_triple(&e, None).is_none());
    }
}
