//! Property tests for the library invariants that hold for *any* input.

use proptest::prelude::*;

use ssd3::coding::{omp_encode, Dictionary};
use ssd3::coding::{CoefficientMatrix, SparseCode};
use ssd3::image::Image;
use ssd3::linalg::{axpy, norm2, Mat};
use ssd3::metrics::{ssim, SsimWindow};
use ssd3::patches::{aggregate_patches, extract_patches};
use ssd3::subspace::{atom_frequencies, frequency_permutation};

fn arbitrary_image(max_side: usize) -> impl Strategy<Value = Image> {
    ((8usize..=max_side), (8usize..=max_side)).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0.0f64..=255.0, w * h)
            .prop_map(move |pixels| Image::new(w, h, pixels, 255.0).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// extract -> aggregate is the identity for any image, stride and DC
    /// policy.
    #[test]
    fn extract_aggregate_identity(
        img in arbitrary_image(24),
        stride in 1usize..=5,
        patch_side in 3usize..8,
        remove_dc in proptest::bool::ANY,
    ) {
        prop_assume!(patch_side <= img.width().min(img.height()));
        let stride = stride.min(patch_side);
        let pm = extract_patches(&img, patch_side, stride, remove_dc).unwrap();
        let back = aggregate_patches(&pm.data, &pm.grid, &pm.dc_offsets,
                                     (img.width(), img.height())).unwrap();
        for (a, b) in back.pixels().iter().zip(img.pixels()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    /// Every OMP code satisfies its contract: exact residual norm, strictly
    /// increasing support, and either the tolerance was reached or the
    /// sparsity cap was hit.
    #[test]
    fn omp_contract(
        seed in proptest::num::u64::ANY,
        epsilon in 0.0f64..2.0,
        max_sparsity in 1usize..8,
    ) {
        let mut state = seed;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let (n, k) = (8usize, 14usize);
        let mut atoms = Mat::zeros(n, k);
        for j in 0..k {
            let col = atoms.col_mut(j);
            for v in col.iter_mut() {
                *v = next();
            }
            let norm = norm2(col);
            prop_assume!(norm > 1e-3);
            for v in col.iter_mut() {
                *v /= norm;
            }
        }
        let dict = Dictionary::new(atoms).unwrap();
        let x: Vec<f64> = (0..n).map(|_| 4.0 * next()).collect();

        let code = omp_encode(&dict, &x, epsilon, max_sparsity).unwrap();
        prop_assert!(code.indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(code.nnz() <= max_sparsity);

        let mut residual = x.clone();
        for (&a, &v) in code.indices.iter().zip(&code.values) {
            axpy(-v, dict.atom(a), &mut residual);
        }
        prop_assert!((norm2(&residual) - code.residual_norm).abs() <= 1e-9);
        prop_assert!(code.residual_norm <= epsilon + 1e-12 || code.nnz() == max_sparsity);
    }

    /// Atom frequencies depend only on the support: any nonzero rescaling
    /// of the values leaves them unchanged, and the permutation sorts them.
    #[test]
    fn frequency_support_only(
        entries in proptest::collection::vec(
            (0usize..12, -3.0f64..3.0), 0..40),
        scale in prop_oneof![Just(7.3f64), Just(-0.02), Just(1e6)],
    ) {
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 8];
        for (i, (atom, value)) in entries.into_iter().enumerate() {
            if value != 0.0 {
                let col = &mut columns[i % 8];
                if !col.iter().any(|&(a, _)| a == atom) {
                    col.push((atom, value));
                }
            }
        }
        let build = |scale: f64| CoefficientMatrix {
            codes: columns
                .iter()
                .map(|col| {
                    let mut sorted = col.clone();
                    sorted.sort_by_key(|&(a, _)| a);
                    SparseCode {
                        indices: sorted.iter().map(|&(a, _)| a).collect(),
                        values: sorted.iter().map(|&(_, v)| v * scale).collect(),
                        residual_norm: 0.0,
                    }
                })
                .collect(),
            atom_count: 12,
        };
        let base = atom_frequencies(&build(1.0));
        let scaled = atom_frequencies(&build(scale));
        prop_assert_eq!(&base, &scaled);

        let perm = frequency_permutation(&base);
        prop_assert!(perm.windows(2).all(|w| base.freqs[w[0]] >= base.freqs[w[1]]));
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..12).collect::<Vec<_>>());
    }

    /// SSIM is symmetric and never exceeds 1.
    #[test]
    fn ssim_symmetric_and_bounded(
        (a, b) in ((8usize..=16), (8usize..=16)).prop_flat_map(|(w, h)| {
            let pixels = || proptest::collection::vec(0.0f64..=255.0, w * h);
            (pixels(), pixels()).prop_map(move |(pa, pb)| {
                (
                    Image::new(w, h, pa, 255.0).unwrap(),
                    Image::new(w, h, pb, 255.0).unwrap(),
                )
            })
        }),
    ) {
        let ab = ssim(&a, &b, SsimWindow::Global).unwrap();
        let ba = ssim(&b, &a, SsimWindow::Global).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
    }
}
