//! Overlapping patch extraction into a column-stacked data matrix, and the
//! coverage-weighted aggregation that inverts it.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::Mat;

/// Geometry of an overlapping patch tiling.
///
/// Origins are stride-spaced and always include the final row/column
/// position, so every pixel of the source image is covered without padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub patch_side: usize,
    pub stride: usize,
    pub origin_rows: Vec<usize>,
    pub origin_cols: Vec<usize>,
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, patch_side: usize, stride: usize) -> Result<PatchGrid> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        if patch_side == 0 || patch_side > width.min(height) {
            return Err(Error::InvalidArgument(format!(
                "patch side {patch_side} does not fit a {width}x{height} image"
            )));
        }
        // A stride beyond the patch side would leave uncovered pixels,
        // breaking the grid's coverage invariant.
        if stride > patch_side {
            return Err(Error::InvalidArgument(format!(
                "stride {stride} exceeds patch side {patch_side}; the image would not be covered"
            )));
        }
        Ok(PatchGrid {
            patch_side,
            stride,
            origin_rows: axis_origins(height, patch_side, stride),
            origin_cols: axis_origins(width, patch_side, stride),
        })
    }

    /// Number of patches (`M`).
    pub fn patch_count(&self) -> usize {
        self.origin_rows.len() * self.origin_cols.len()
    }

    /// Patch vector length (`N = patch_side^2`).
    pub fn signal_dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    /// Origin of patch `m` in row-major origin order.
    pub fn origin(&self, m: usize) -> (usize, usize) {
        let ncols = self.origin_cols.len();
        (self.origin_rows[m / ncols], self.origin_cols[m % ncols])
    }
}

fn axis_origins(extent: usize, patch_side: usize, stride: usize) -> Vec<usize> {
    let last = extent - patch_side;
    let mut origins: Vec<usize> = (0..=last).step_by(stride).collect();
    if *origins.last().unwrap() != last {
        origins.push(last);
    }
    origins
}

/// Column-stacked patch vectors `X` (`N x M`). Column `m` is patch `m`
/// vectorized row-major. When DC removal is enabled each column is centered
/// and the removed mean is kept in `dc_offsets`.
#[derive(Debug, Clone)]
pub struct PatchMatrix {
    pub data: Mat,
    pub grid: PatchGrid,
    pub dc_offsets: Vec<f64>,
    pub dc_removed: bool,
}

impl PatchMatrix {
    pub fn patch_count(&self) -> usize {
        self.data.cols()
    }

    pub fn signal_dim(&self) -> usize {
        self.data.rows()
    }
}

/// Extracts every patch of the stride grid into a data matrix, patch index
/// running in row-major origin order.
pub fn extract_patches(
    img: &Image,
    patch_side: usize,
    stride: usize,
    remove_dc: bool,
) -> Result<PatchMatrix> {
    let grid = PatchGrid::new(img.width(), img.height(), patch_side, stride)?;
    let n = grid.signal_dim();
    let m = grid.patch_count();
    let mut data = Mat::zeros(n, m);
    let mut dc_offsets = vec![0.0; m];

    for idx in 0..m {
        let (r0, c0) = grid.origin(idx);
        let col = data.col_mut(idx);
        for pr in 0..patch_side {
            let row = r0 + pr;
            for pc in 0..patch_side {
                col[pr * patch_side + pc] = img.get(row, c0 + pc);
            }
        }
        if remove_dc {
            let mean = col.iter().sum::<f64>() / n as f64;
            for v in col.iter_mut() {
                *v -= mean;
            }
            dc_offsets[idx] = mean;
        }
    }

    Ok(PatchMatrix {
        data,
        grid,
        dc_offsets,
        dc_removed: remove_dc,
    })
}

/// Folds reconstructed patch columns back into an image: each pixel is the
/// mean of all patch contributions covering it (after DC re-addition).
///
/// Accumulation runs in ascending patch-index order so the result is
/// bit-reproducible.
pub fn aggregate_patches(
    recon: &Mat,
    grid: &PatchGrid,
    dc_offsets: &[f64],
    out_shape: (usize, usize),
) -> Result<Image> {
    let (width, height) = out_shape;
    let n = grid.signal_dim();
    let m = grid.patch_count();
    if recon.rows() != n || recon.cols() != m || dc_offsets.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "reconstruction {}x{} with {} offsets does not match a grid of {} patches of dim {}",
            recon.rows(),
            recon.cols(),
            dc_offsets.len(),
            m,
            n
        )));
    }
    let fits =
        |origins: &[usize], extent: usize| origins.iter().all(|&o| o + grid.patch_side <= extent);
    if !fits(&grid.origin_rows, height) || !fits(&grid.origin_cols, width) {
        return Err(Error::DimensionMismatch(
            "patch grid does not fit the output shape".into(),
        ));
    }

    let side = grid.patch_side;
    let mut sums = vec![0.0f64; width * height];
    let mut coverage = vec![0u32; width * height];
    for idx in 0..m {
        let (r0, c0) = grid.origin(idx);
        let col = recon.col(idx);
        let dc = dc_offsets[idx];
        for pr in 0..side {
            let base = (r0 + pr) * width + c0;
            for pc in 0..side {
                sums[base + pc] += col[pr * side + pc] + dc;
                coverage[base + pc] += 1;
            }
        }
    }
    for (s, &c) in sums.iter_mut().zip(coverage.iter()) {
        if c == 0 {
            return Err(Error::DimensionMismatch(
                "patch grid leaves output pixels uncovered".into(),
            ));
        }
        *s /= c as f64;
    }
    Image::new(width, height, sums, 255.0)
}
