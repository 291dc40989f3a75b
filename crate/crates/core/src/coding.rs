//! Greedy sparse coding against a fixed dictionary (orthogonal matching
//! pursuit) and the linear reconstruction of the coded signals.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, lstsq_cols, norm2, Mat};

/// An `N x K` atom matrix with unit-norm columns, `K >= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Mat,
}

impl Dictionary {
    /// Validates the over-completeness and unit-norm invariants.
    pub fn new(atoms: Mat) -> Result<Dictionary> {
        if atoms.cols() < atoms.rows() {
            return Err(Error::InvalidDictionary(format!(
                "dictionary must have at least as many atoms as signal dimensions ({} < {})",
                atoms.cols(),
                atoms.rows()
            )));
        }
        if !atoms.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        for k in 0..atoms.cols() {
            let n = norm2(atoms.col(k));
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDictionary(format!(
                    "atom {k} has norm {n}, expected 1"
                )));
            }
        }
        Ok(Dictionary { atoms })
    }

    /// Internal constructor for callers that maintain the invariants
    /// themselves (the K-SVD update loop re-normalizes every atom).
    pub(crate) fn new_unchecked(atoms: Mat) -> Dictionary {
        Dictionary { atoms }
    }

    pub fn signal_dim(&self) -> usize {
        self.atoms.rows()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.cols()
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        self.atoms.col(k)
    }

    pub fn atoms(&self) -> &Mat {
        &self.atoms
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut Mat {
        &mut self.atoms
    }
}

/// Sparse code of one signal: strictly increasing atom indices, aligned
/// coefficients, and the exact Euclidean residual norm of the code.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub residual_norm: f64,
}

impl SparseCode {
    pub fn empty(residual_norm: f64) -> SparseCode {
        SparseCode {
            indices: Vec::new(),
            values: Vec::new(),
            residual_norm,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// The sparse code matrix `A`: one code per data column.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub codes: Vec<SparseCode>,
    pub atom_count: usize,
}

impl CoefficientMatrix {
    pub fn column_count(&self) -> usize {
        self.codes.len()
    }

    pub fn total_nonzeros(&self) -> usize {
        self.codes.iter().map(SparseCode::nnz).sum()
    }
}

/// Orthogonal matching pursuit for a single signal.
///
/// Repeatedly selects the atom with the largest absolute inner product with
/// the current residual (ties broken toward the lower index), re-solves the
/// least squares on the selected support from scratch, and stops once the
/// residual norm is at most `epsilon` or the support reached `max_sparsity`.
pub fn omp_encode(
    dict: &Dictionary,
    x: &[f64],
    epsilon: f64,
    max_sparsity: usize,
) -> Result<SparseCode> {
    let n = dict.signal_dim();
    let k = dict.atom_count();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "signal of length {} against dictionary of dimension {}",
            x.len(),
            n
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(
            "epsilon must be non-negative".into(),
        ));
    }
    if max_sparsity == 0 || max_sparsity > n {
        return Err(Error::InvalidArgument(format!(
            "max_sparsity must be in 1..={n}, got {max_sparsity}"
        )));
    }

    let mut residual = x.to_vec();
    let mut res_norm = norm2(&residual);
    if res_norm <= epsilon {
        return Ok(SparseCode::empty(res_norm));
    }

    let mut selected: Vec<usize> = Vec::new();
    let mut in_support = vec![false; k];
    let mut coeffs: Vec<f64> = Vec::new();

    while res_norm > epsilon && selected.len() < max_sparsity {
        // Atom most correlated with the residual; strict > keeps the lowest
        // index on exact ties.
        let mut best = None;
        let mut best_abs = 0.0;
        for a in 0..k {
            if in_support[a] {
                continue;
            }
            let c = dot(dict.atom(a), &residual).abs();
            if c > best_abs {
                best_abs = c;
                best = Some(a);
            }
        }
        let Some(atom) = best else {
            break; // residual orthogonal to every remaining atom
        };

        selected.push(atom);
        in_support[atom] = true;
        let cols: Vec<&[f64]> = selected.iter().map(|&a| dict.atom(a)).collect();
        match lstsq_cols(&cols, x) {
            Some(solution) => coeffs = solution,
            None => {
                // Numerically dependent support; the new atom cannot improve
                // the fit, so return the previous code.
                selected.pop();
                in_support[atom] = false;
                break;
            }
        }

        residual.copy_from_slice(x);
        for (i, &a) in selected.iter().enumerate() {
            axpy(-coeffs[i], dict.atom(a), &mut residual);
        }
        let new_norm = norm2(&residual);
        assert!(
            new_norm <= res_norm + 1e-9 * (1.0 + res_norm),
            "OMP residual increased: {res_norm} -> {new_norm}"
        );
        res_norm = new_norm;
    }

    // Sorted support with aligned values.
    let mut pairs: Vec<(usize, f64)> = selected.into_iter().zip(coeffs).collect();
    pairs.sort_by_key(|&(a, _)| a);
    Ok(SparseCode {
        indices: pairs.iter().map(|&(a, _)| a).collect(),
        values: pairs.iter().map(|&(_, v)| v).collect(),
        residual_norm: res_norm,
    })
}

/// Codes every column of `patches` independently. The result does not
/// depend on the evaluation order, so columns are processed in parallel.
pub fn batch_encode(
    dict: &Dictionary,
    patches: &Mat,
    epsilon: f64,
    max_sparsity: usize,
) -> Result<CoefficientMatrix> {
    if patches.rows() != dict.signal_dim() {
        return Err(Error::DimensionMismatch(format!(
            "patch dimension {} against dictionary dimension {}",
            patches.rows(),
            dict.signal_dim()
        )));
    }
    let codes: Vec<Result<SparseCode>> = (0..patches.cols())
        .into_par_iter()
        .map(|m| {
            omp_encode(dict, patches.col(m), epsilon, max_sparsity).map_err(|e| e.at_column(m))
        })
        .collect();
    let mut out = Vec::with_capacity(codes.len());
    for code in codes {
        out.push(code?);
    }
    Ok(CoefficientMatrix {
        codes: out,
        atom_count: dict.atom_count(),
    })
}

/// Sparse product `D * A`, column by column.
pub fn reconstruct(dict: &Dictionary, coeffs: &CoefficientMatrix) -> Result<Mat> {
    if coeffs.atom_count != dict.atom_count() {
        return Err(Error::DimensionMismatch(format!(
            "codes over {} atoms against dictionary of {}",
            coeffs.atom_count,
            dict.atom_count()
        )));
    }
    let mut out = Mat::zeros(dict.signal_dim(), coeffs.codes.len());
    for (m, code) in coeffs.codes.iter().enumerate() {
        let col = out.col_mut(m);
        for (&a, &v) in code.indices.iter().zip(&code.values) {
            axpy(v, dict.atom(a), col);
        }
    }
    Ok(out)
}
