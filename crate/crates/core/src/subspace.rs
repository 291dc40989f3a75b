//! Signal/noise subspace split of a learned dictionary by atom occurrence
//! frequency: count how often each atom appears across the sparse codes,
//! order atoms by that frequency, threshold at the mode of the nonzero
//! frequency histogram, and reconstruct on the principal atoms only.

use std::fmt::Write as _;

use crate::coding::{CoefficientMatrix, Dictionary};
use crate::error::{Error, Result};
use crate::linalg::{axpy, Mat};

/// Occurrence count of every atom over the coded data set.
///
/// `freqs[k]` is the number of code columns whose support contains atom `k`
/// (the l0 pseudo-norm of coefficient row `k`), counted from the support
/// exactly, never by magnitude thresholding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomFrequencies {
    pub freqs: Vec<usize>,
    pub total_columns: usize,
}

/// The subspace split decision: atom order, threshold frequency and the
/// number of principal atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceSelection {
    /// Bijection on atom indices with non-increasing frequency.
    pub permutation: Vec<usize>,
    /// Histogram-mode threshold `f*`.
    pub threshold_freq: usize,
    /// `P = |{k : f_k >= f*}|`; the first `P` permuted atoms are principal.
    pub principal_count: usize,
}

impl SubspaceSelection {
    /// Membership mask over original atom indices.
    pub fn principal_mask(&self, atom_count: usize) -> Vec<bool> {
        let mut mask = vec![false; atom_count];
        for &a in &self.permutation[..self.principal_count] {
            mask[a] = true;
        }
        mask
    }
}

/// Counts atom occurrences over the code columns.
pub fn atom_frequencies(coeffs: &CoefficientMatrix) -> AtomFrequencies {
    let mut freqs = vec![0usize; coeffs.atom_count];
    for code in &coeffs.codes {
        for &a in &code.indices {
            freqs[a] += 1;
        }
    }
    AtomFrequencies {
        freqs,
        total_columns: coeffs.codes.len(),
    }
}

/// Stable descending sort of atom indices by frequency; ties keep ascending
/// atom index.
pub fn frequency_permutation(freqs: &AtomFrequencies) -> Vec<usize> {
    let mut order: Vec<usize> = (0..freqs.freqs.len()).collect();
    order.sort_by(|&a, &b| freqs.freqs[b].cmp(&freqs.freqs[a]).then(a.cmp(&b)));
    order
}

/// Integer histogram of the nonzero frequencies, as `(frequency, count)`
/// pairs in ascending frequency order. Bin width is 1.
pub fn frequency_histogram(freqs: &AtomFrequencies) -> Vec<(usize, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for &f in &freqs.freqs {
        if f > 0 {
            *counts.entry(f).or_insert(0usize) += 1;
        }
    }
    counts.into_iter().collect()
}

/// Histogram CSV (`frequency,count`, ascending frequency).
pub fn histogram_csv(freqs: &AtomFrequencies) -> String {
    let mut out = String::from("frequency,count\n");
    for (f, c) in frequency_histogram(freqs) {
        let _ = writeln!(out, "{f},{c}");
    }
    out
}

/// Picks the threshold frequency `f*` as the mode of the nonzero-frequency
/// histogram (ties toward the smaller value) and derives the principal atom
/// count `P = |{k : f_k >= f*}|`.
///
/// `smoothing_window` optionally averages histogram counts over a centered
/// odd-width window on the frequency axis before taking the mode; small
/// dictionaries produce noisy raw histograms.
pub fn select_threshold(
    freqs: &AtomFrequencies,
    smoothing_window: Option<usize>,
) -> Result<(usize, usize)> {
    let hist = frequency_histogram(freqs);
    if hist.is_empty() {
        return Err(Error::EmptyCoding);
    }

    let f_star = match smoothing_window {
        None | Some(0) | Some(1) => {
            let mut best = (0usize, 0usize); // (count, value)
            for &(value, count) in &hist {
                if count > best.0 {
                    best = (count, value);
                }
            }
            best.1
        }
        Some(w) => {
            if w % 2 == 0 {
                return Err(Error::InvalidArgument(format!(
                    "smoothing window must be odd, got {w}"
                )));
            }
            let max_f = hist.last().unwrap().0;
            let mut dense = vec![0usize; max_f + 1];
            for &(value, count) in &hist {
                dense[value] = count;
            }
            let half = w / 2;
            let mut best_sum = 0usize;
            let mut best_value = 0usize;
            for v in 1..=max_f {
                let lo = v.saturating_sub(half).max(1);
                let hi = (v + half).min(max_f);
                let sum: usize = dense[lo..=hi].iter().sum();
                if sum > best_sum {
                    best_sum = sum;
                    best_value = v;
                }
            }
            best_value
        }
    };

    let principal_count = freqs.freqs.iter().filter(|&&f| f >= f_star).count();
    Ok((f_star, principal_count))
}

/// Builds the full selection from the codes in one step.
pub fn select_subspace(
    coeffs: &CoefficientMatrix,
    smoothing_window: Option<usize>,
) -> Result<(AtomFrequencies, SubspaceSelection)> {
    let freqs = atom_frequencies(coeffs);
    let permutation = frequency_permutation(&freqs);
    let (threshold_freq, principal_count) = select_threshold(&freqs, smoothing_window)?;
    Ok((
        freqs,
        SubspaceSelection {
            permutation,
            threshold_freq,
            principal_count,
        },
    ))
}

/// A borrowed subset of dictionary atoms carrying their original indices.
#[derive(Debug, Clone)]
pub struct DictionaryView<'a> {
    dict: &'a Dictionary,
    atom_ids: Vec<usize>,
}

impl<'a> DictionaryView<'a> {
    pub fn atom_ids(&self) -> &[usize] {
        &self.atom_ids
    }

    pub fn len(&self) -> usize {
        self.atom_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atom_ids.is_empty()
    }

    /// Atom `i` of the view (columns of the originating dictionary).
    pub fn atom(&self, i: usize) -> &[f64] {
        self.dict.atom(self.atom_ids[i])
    }
}

/// Splits the dictionary into the principal (signal) view and the residual
/// (noise) view according to the selection.
pub fn split_subspaces<'a>(
    dict: &'a Dictionary,
    sel: &SubspaceSelection,
) -> Result<(DictionaryView<'a>, DictionaryView<'a>)> {
    validate_selection(dict.atom_count(), sel)?;
    let signal = sel.permutation[..sel.principal_count].to_vec();
    let noise = sel.permutation[sel.principal_count..].to_vec();
    Ok((
        DictionaryView {
            dict,
            atom_ids: signal,
        },
        DictionaryView {
            dict,
            atom_ids: noise,
        },
    ))
}

fn validate_selection(atom_count: usize, sel: &SubspaceSelection) -> Result<()> {
    if sel.permutation.len() != atom_count {
        return Err(Error::DimensionMismatch(format!(
            "selection permutation over {} atoms against dictionary of {}",
            sel.permutation.len(),
            atom_count
        )));
    }
    let mut seen = vec![false; atom_count];
    for &a in &sel.permutation {
        if a >= atom_count || seen[a] {
            return Err(Error::InvalidArgument(
                "permutation is not a bijection".into(),
            ));
        }
        seen[a] = true;
    }
    if sel.principal_count == 0 || sel.principal_count > atom_count {
        return Err(Error::InvalidArgument(format!(
            "principal count {} out of range 1..={}",
            sel.principal_count, atom_count
        )));
    }
    Ok(())
}

/// Reconstruction restricted to the principal subspace: the full sparse
/// product with every non-principal coefficient row zeroed. No re-coding.
pub fn reconstruct_principal(
    dict: &Dictionary,
    coeffs: &CoefficientMatrix,
    sel: &SubspaceSelection,
) -> Result<Mat> {
    if coeffs.atom_count != dict.atom_count() {
        return Err(Error::DimensionMismatch(format!(
            "codes over {} atoms against dictionary of {}",
            coeffs.atom_count,
            dict.atom_count()
        )));
    }
    validate_selection(dict.atom_count(), sel)?;
    let mask = sel.principal_mask(dict.atom_count());
    let mut out = Mat::zeros(dict.signal_dim(), coeffs.codes.len());
    for (m, code) in coeffs.codes.iter().enumerate() {
        let col = out.col_mut(m);
        for (&a, &v) in code.indices.iter().zip(&code.values) {
            if mask[a] {
                axpy(v, dict.atom(a), col);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::SparseCode;

    fn coeffs_from(entries: &[&[(usize, f64)]], atom_count: usize) -> CoefficientMatrix {
        CoefficientMatrix {
            codes: entries
                .iter()
                .map(|cols| SparseCode {
                    indices: cols.iter().map(|&(a, _)| a).collect(),
                    values: cols.iter().map(|&(_, v)| v).collect(),
                    residual_norm: 0.0,
                })
                .collect(),
            atom_count,
        }
    }

    #[test]
    fn frequencies_count_support() {
        let coeffs = coeffs_from(&[&[(0, 1.0), (2, -2.0)], &[(0, 0.5)]], 3);
        let f = atom_frequencies(&coeffs);
        assert_eq!(f.freqs, vec![2, 0, 1]);
        assert_eq!(f.total_columns, 2);
    }

    #[test]
    fn empty_matrix_zero_frequencies() {
        let coeffs = coeffs_from(&[], 4);
        let f = atom_frequencies(&coeffs);
        assert_eq!(f.freqs, vec![0, 0, 0, 0]);
    }

    #[test]
    fn frequency_invariant_under_value_scaling() {
        let mut coeffs = coeffs_from(&[&[(0, 1.0), (3, -0.2)], &[(3, 2.0)], &[(1, 9.0)]], 5);
        let before = atom_frequencies(&coeffs);
        for code in &mut coeffs.codes {
            for v in &mut code.values {
                *v *= 7.3;
            }
        }
        assert_eq!(atom_frequencies(&coeffs), before);
    }

    #[test]
    fn permutation_hand_case_and_stability() {
        let f = AtomFrequencies {
            freqs: vec![2, 0, 1],
            total_columns: 2,
        };
        assert_eq!(frequency_permutation(&f), vec![0, 2, 1]);

        let equal = AtomFrequencies {
            freqs: vec![3, 3, 3, 3],
            total_columns: 9,
        };
        assert_eq!(frequency_permutation(&equal), vec![0, 1, 2, 3]);
    }

    #[test]
    fn threshold_hand_histogram() {
        let f = AtomFrequencies {
            freqs: vec![5, 5, 5, 1, 1, 0],
            total_columns: 17,
        };
        let (f_star, p) = select_threshold(&f, None).unwrap();
        assert_eq!(f_star, 5);
        assert_eq!(p, 3);
    }

    #[test]
    fn threshold_tie_takes_smaller_value() {
        let f = AtomFrequencies {
            freqs: vec![3, 3, 2, 2, 1],
            total_columns: 11,
        };
        let (f_star, p) = select_threshold(&f, None).unwrap();
        assert_eq!(f_star, 2);
        assert_eq!(p, 4);
    }

    #[test]
    fn threshold_rejects_all_zero() {
        let f = AtomFrequencies {
            freqs: vec![0, 0],
            total_columns: 3,
        };
        match select_threshold(&f, None) {
            Err(Error::EmptyCoding) => {}
            other => panic!("expected empty coding error, got {other:?}"),
        }
    }

    #[test]
    fn smoothing_window_shifts_mode_to_dense_region() {
        // Raw mode is the spike at 1; a width-5 window prefers the cluster
        // around 10.
        let freqs: Vec<usize> = [vec![1usize; 4], vec![9, 9, 10, 10, 11, 11, 12, 8]].concat();
        let f = AtomFrequencies {
            freqs,
            total_columns: 100,
        };
        let (raw, _) = select_threshold(&f, None).unwrap();
        assert_eq!(raw, 1);
        let (smoothed, p) = select_threshold(&f, Some(5)).unwrap();
        assert_eq!(smoothed, 10);
        assert_eq!(p, f.freqs.iter().filter(|&&x| x >= 10).count());
    }

    #[test]
    fn selection_prefix_is_threshold_set() {
        let f = AtomFrequencies {
            freqs: vec![4, 0, 9, 4, 1, 9, 2],
            total_columns: 29,
        };
        let permutation = frequency_permutation(&f);
        let (f_star, p) = select_threshold(&f, None).unwrap();
        let sel = SubspaceSelection {
            permutation,
            threshold_freq: f_star,
            principal_count: p,
        };
        let in_prefix: std::collections::BTreeSet<_> =
            sel.permutation[..p].iter().copied().collect();
        let by_threshold: std::collections::BTreeSet<_> = (0..f.freqs.len())
            .filter(|&k| f.freqs[k] >= f_star)
            .collect();
        assert_eq!(in_prefix, by_threshold);
    }

    #[test]
    fn split_partitions_atoms() {
        let dict = Dictionary::new(Mat::identity(4)).unwrap();
        let sel = SubspaceSelection {
            permutation: vec![2, 0, 3, 1],
            threshold_freq: 1,
            principal_count: 2,
        };
        let (signal, noise) = split_subspaces(&dict, &sel).unwrap();
        assert_eq!(signal.atom_ids(), &[2, 0]);
        assert_eq!(noise.atom_ids(), &[3, 1]);
        let mut all: Vec<usize> = signal
            .atom_ids()
            .iter()
            .chain(noise.atom_ids())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert_eq!(signal.atom(0), dict.atom(2));
    }

    #[test]
    fn principal_reconstruction_boundaries() {
        let dict = Dictionary::new(Mat::identity(3)).unwrap();
        let coeffs = coeffs_from(&[&[(0, 2.0), (2, 1.0)], &[(1, -1.0)]], 3);
        let full_sel = SubspaceSelection {
            permutation: vec![0, 1, 2],
            threshold_freq: 1,
            principal_count: 3,
        };
        let full = reconstruct_principal(&dict, &coeffs, &full_sel).unwrap();
        let direct = crate::coding::reconstruct(&dict, &coeffs).unwrap();
        assert_eq!(full.data(), direct.data());

        // Supports disjoint from the principal set give a zero matrix.
        let only_one = SubspaceSelection {
            permutation: vec![1, 0, 2],
            threshold_freq: 9,
            principal_count: 1,
        };
        let part = reconstruct_principal(&dict, &coeffs, &only_one).unwrap();
        assert_eq!(part.col(0), &[0.0, 0.0, 0.0]);
        assert_eq!(part.col(1), &[0.0, -1.0, 0.0]);
    }

    #[test]
    fn histogram_csv_format() {
        let f = AtomFrequencies {
            freqs: vec![2, 0, 1, 2],
            total_columns: 4,
        };
        assert_eq!(histogram_csv(&f), "frequency,count\n1,1\n2,2\n");
    }
}
