//! K-SVD dictionary learning: alternate sparse coding of the data against
//! the current dictionary with a per-atom rank-1 update of the restricted
//! error matrix.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coding::{batch_encode, CoefficientMatrix, Dictionary};
use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot, norm2, Mat};
use crate::rng::SplitMix64;

/// How near-parallel two atoms may be before the later one is replaced.
const DUPLICATE_COHERENCE: f64 = 0.999;

/// Dictionary initialization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictInit {
    /// Separable over-complete DCT frame.
    OvercompleteDct,
    /// Seeded draw of distinct data columns, normalized.
    RandomPatches,
}

/// Learning configuration. `epsilon`/`max_sparsity` are handed to the
/// coding stage unchanged; all randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub atom_count: usize,
    pub iterations: usize,
    pub epsilon: f64,
    pub max_sparsity: usize,
    pub init: DictInit,
    pub seed: u64,
}

/// Per-iteration observability of a learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnReport {
    /// Root-mean-square per-column residual norm, measured after the
    /// atom-update stage of each iteration.
    pub mean_residuals: Vec<f64>,
    /// Atoms replaced per iteration (unused, duplicate or degenerate).
    pub replacements: Vec<usize>,
    /// Usage count of every atom under the final codes.
    pub atom_usage: Vec<usize>,
}

/// Builds the starting dictionary for [`ksvd_learn`].
pub fn init_dictionary(data: &Mat, cfg: &LearnConfig) -> Result<Dictionary> {
    let n = data.rows();
    let k = cfg.atom_count;
    if k < n {
        return Err(Error::InvalidArgument(format!(
            "atom count {k} below signal dimension {n}"
        )));
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let mut atoms = match cfg.init {
        DictInit::OvercompleteDct => overcomplete_dct(n, k)?,
        DictInit::RandomPatches => {
            if data.cols() < k {
                return Err(Error::InvalidArgument(format!(
                    "random_patches init needs at least {k} columns, got {}",
                    data.cols()
                )));
            }
            // Seeded partial Fisher-Yates pick of K distinct columns.
            let mut order: Vec<usize> = (0..data.cols()).collect();
            for i in 0..k {
                let j = i + rng.below(order.len() - i);
                order.swap(i, j);
            }
            let mut atoms = Mat::zeros(n, k);
            for (slot, &col) in order[..k].iter().enumerate() {
                atoms.col_mut(slot).copy_from_slice(data.col(col));
            }
            atoms
        }
    };

    for j in 0..k {
        if linalg::normalize(atoms.col_mut(j)) <= 1e-12 {
            random_unit(atoms.col_mut(j), &mut rng);
        }
    }
    Ok(Dictionary::new_unchecked(atoms))
}

/// Separable over-complete DCT frame: an `L x L` grid of outer products of
/// 1-D DCT vectors (`L = ceil(sqrt(K))`), truncated to `K` columns.
fn overcomplete_dct(n: usize, k: usize) -> Result<Mat> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::InvalidArgument(format!(
            "overcomplete_dct init needs a square signal dimension, got {n}"
        )));
    }
    let grid = (k as f64).sqrt().ceil() as usize;
    // 1-D atoms: cos(pi * i * l / grid) on i = 0..side, mean-removed for l > 0.
    let mut basis = vec![vec![0.0f64; side]; grid];
    for (l, v) in basis.iter_mut().enumerate() {
        for (i, x) in v.iter_mut().enumerate() {
            *x = (std::f64::consts::PI * i as f64 * l as f64 / grid as f64).cos();
        }
        if l > 0 {
            let mean = v.iter().sum::<f64>() / side as f64;
            for x in v.iter_mut() {
                *x -= mean;
            }
        }
    }
    let mut atoms = Mat::zeros(n, k);
    for idx in 0..k {
        let (p, q) = (idx / grid, idx % grid);
        let col = atoms.col_mut(idx);
        for i in 0..side {
            for j in 0..side {
                col[i * side + j] = basis[p][i] * basis[q][j];
            }
        }
    }
    Ok(atoms)
}

fn coherent_with_other_atom(dict: &Dictionary, skip: usize, candidate: &[f64]) -> bool {
    (0..dict.atom_count())
        .any(|j| j != skip && dot(dict.atom(j), candidate).abs() > DUPLICATE_COHERENCE)
}

fn random_unit(col: &mut [f64], rng: &mut SplitMix64) {
    loop {
        for v in col.iter_mut() {
            *v = rng.gaussian();
        }
        if linalg::normalize(col) > 1e-12 {
            return;
        }
    }
}

/// Forces the largest-magnitude entry of an atom positive, compensating in
/// its coefficient row, so runs are comparable despite SVD sign ambiguity.
fn canonical_sign(atom: &mut [f64], row: &mut [f64]) {
    let mut arg = 0;
    let mut best = -1.0;
    for (i, v) in atom.iter().enumerate() {
        if v.abs() > best {
            best = v.abs();
            arg = i;
        }
    }
    if atom[arg] < 0.0 {
        for v in atom.iter_mut() {
            *v = -*v;
        }
        for v in row.iter_mut() {
            *v = -*v;
        }
    }
}

/// Runs K-SVD on the column-stacked data matrix.
///
/// Each iteration sparse-codes every column, then updates atoms one at a
/// time in ascending index order: atom `k` and its coefficient row are
/// replaced by the best rank-1 factorization of the error matrix restricted
/// to the columns that use the atom. Unused, duplicate and degenerate atoms
/// are replaced by the worst-reconstructed data columns. The returned codes
/// are a fresh encode against the final dictionary.
pub fn ksvd_learn(
    data: &Mat,
    cfg: &LearnConfig,
) -> Result<(Dictionary, CoefficientMatrix, LearnReport)> {
    if data.cols() == 0 || data.rows() == 0 {
        return Err(Error::InvalidArgument("empty data matrix".into()));
    }
    if !data.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument(
            "iterations must be at least 1".into(),
        ));
    }

    let n = data.rows();
    let m = data.cols();
    let k = cfg.atom_count;
    let mut dict = init_dictionary(data, cfg)?;
    let mut rng = SplitMix64::new(cfg.seed ^ 0x5D54_01D3);

    let mut mean_residuals = Vec::with_capacity(cfg.iterations);
    let mut replacements = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        let mut coeffs = batch_encode(&dict, data, cfg.epsilon, cfg.max_sparsity)?;

        // usage[k] = (column, position-in-code) pairs, ascending column.
        let mut usage: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
        for (col, code) in coeffs.codes.iter().enumerate() {
            for (pos, &atom) in code.indices.iter().enumerate() {
                usage[atom].push((col, pos));
            }
        }

        // Residual matrix R = X - D A, kept exact across atom updates.
        let mut residual = data.clone();
        for (col, code) in coeffs.codes.iter().enumerate() {
            let r = residual.col_mut(col);
            for (&a, &v) in code.indices.iter().zip(&code.values) {
                axpy(-v, dict.atom(a), r);
            }
        }

        let mut degenerate: Vec<usize> = Vec::new();
        for atom_idx in 0..k {
            if usage[atom_idx].is_empty() {
                continue;
            }
            let omega = &usage[atom_idx];

            // E = restricted residual with this atom's contribution restored.
            let mut err_mat = Mat::zeros(n, omega.len());
            let mut old_fit = 0.0f64;
            for (slot, &(col, pos)) in omega.iter().enumerate() {
                let beta = coeffs.codes[col].values[pos];
                let dst = err_mat.col_mut(slot);
                let src = residual.col(col);
                let atom = dict.atom(atom_idx);
                for i in 0..n {
                    dst[i] = src[i] + beta * atom[i];
                }
                old_fit += dot(src, src);
            }

            let Some((mut u, sigma, mut v)) =
                linalg::top_singular_triple(&err_mat, Some(dict.atom(atom_idx)))
            else {
                degenerate.push(atom_idx);
                continue;
            };
            for x in v.iter_mut() {
                *x *= sigma;
            }
            canonical_sign(&mut u, &mut v);

            // Rank-1 optimality: the new pair never fits E worse than the
            // old (atom, row) pair did.
            let mut new_fit = 0.0f64;
            for (slot, &(col, _)) in omega.iter().enumerate() {
                let e = err_mat.col(slot);
                let r = residual.col_mut(col);
                let w = v[slot];
                let mut acc = 0.0;
                for i in 0..n {
                    r[i] = e[i] - w * u[i];
                    acc += r[i] * r[i];
                }
                new_fit += acc;
            }
            assert!(
                new_fit <= old_fit * (1.0 + 1e-9) + 1e-12,
                "atom update increased restricted error: {old_fit} -> {new_fit}"
            );

            dict.atoms_mut().col_mut(atom_idx).copy_from_slice(&u);
            for (slot, &(col, pos)) in omega.iter().enumerate() {
                coeffs.codes[col].values[pos] = v[slot];
            }
        }

        // RMS column residual after the update stage.
        let rms = residual.frob_norm() / (m as f64).sqrt();
        mean_residuals.push(rms);

        // Dictionary hygiene: replace unused, degenerate and near-duplicate
        // atoms with the worst-reconstructed data columns.
        let mut to_replace: Vec<usize> = (0..k).filter(|&a| usage[a].is_empty()).collect();
        to_replace.extend(degenerate);
        for i in 0..k {
            for j in (i + 1)..k {
                if dot(dict.atom(i), dict.atom(j)).abs() > DUPLICATE_COHERENCE {
                    to_replace.push(j);
                }
            }
        }
        to_replace.sort_unstable();
        to_replace.dedup();

        if !to_replace.is_empty() {
            let mut col_order: Vec<usize> = (0..m).collect();
            let res_norm: Vec<f64> = (0..m).map(|c| norm2(residual.col(c))).collect();
            col_order.sort_by(|&a, &b| {
                res_norm[b]
                    .partial_cmp(&res_norm[a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut pick = col_order.into_iter();
            let mut candidate = vec![0.0; n];
            for &atom_idx in &to_replace {
                let mut replaced = false;
                for col in pick.by_ref() {
                    candidate.copy_from_slice(data.col(col));
                    if linalg::normalize(&mut candidate) <= 1e-12 {
                        continue;
                    }
                    if coherent_with_other_atom(&dict, atom_idx, &candidate) {
                        continue;
                    }
                    let dst = dict.atoms_mut().col_mut(atom_idx);
                    dst.copy_from_slice(&candidate);
                    canonical_sign(dst, &mut []);
                    replaced = true;
                    break;
                }
                if !replaced {
                    // No usable data column left: fall back to seeded random
                    // unit vectors, still avoiding near-duplicates.
                    for _ in 0..32 {
                        random_unit(&mut candidate, &mut rng);
                        if !coherent_with_other_atom(&dict, atom_idx, &candidate) {
                            break;
                        }
                    }
                    let dst = dict.atoms_mut().col_mut(atom_idx);
                    dst.copy_from_slice(&candidate);
                    canonical_sign(dst, &mut []);
                }
            }
        }
        replacements.push(to_replace.len());

        for a in 0..k {
            let norm = norm2(dict.atom(a));
            assert!(
                (norm - 1.0).abs() <= 1e-9,
                "atom {a} left iteration with norm {norm}"
            );
        }
    }

    let coeffs = batch_encode(&dict, data, cfg.epsilon, cfg.max_sparsity)?;
    let mut atom_usage = vec![0usize; k];
    for code in &coeffs.codes {
        for &a in &code.indices {
            atom_usage[a] += 1;
        }
    }
    let report = LearnReport {
        mean_residuals,
        replacements,
        atom_usage,
    };
    Ok((dict, coeffs, report))
}

const DICT_MAGIC: &[u8; 4] = b"SSD1";

/// Writes a dictionary in the `SSD1` format: magic, u32-LE `N`, u32-LE `K`,
/// then `N*K` IEEE-754 little-endian f64 values in column-major order.
pub fn serialize_dictionary(dict: &Dictionary, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    (|| -> std::io::Result<()> {
        w.write_all(DICT_MAGIC)?;
        w.write_all(&(dict.signal_dim() as u32).to_le_bytes())?;
        w.write_all(&(dict.atom_count() as u32).to_le_bytes())?;
        for v in dict.atoms().data() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Reads a dictionary written by [`serialize_dictionary`]; the round-trip is
/// bit-exact.
pub fn deserialize_dictionary(path: &Path) -> Result<Dictionary> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.len() < 12 || &raw[0..4] != DICT_MAGIC {
        return Err(Error::BadDictionaryMagic);
    }
    let n = u32::from_le_bytes(raw[4..8].try_into().unwrap()) as usize;
    let k = u32::from_le_bytes(raw[8..12].try_into().unwrap()) as usize;
    let count = n
        .checked_mul(k)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::InvalidDictionary("dimension overflow".into()))?;
    if raw.len() != 12 + count {
        return Err(Error::InvalidDictionary(format!(
            "truncated file: expected {} bytes of atom data, found {}",
            count,
            raw.len() - 12
        )));
    }
    let values: Vec<f64> = raw[12..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Dictionary::new(Mat::from_col_major(n, k, values)?)
}
