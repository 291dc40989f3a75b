//! End-to-end denoising runs: learn a dictionary from the noisy image's own
//! patches, split the subspaces by atom frequency (or keep everything, or
//! use the PCA baseline), reconstruct, aggregate and write the artifacts of
//! the run into an output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coding;
use crate::error::{Error, Result};
use crate::image::{save_image, Image, ImageFormat};
use crate::ksvd::{self, DictInit, LearnConfig, LearnReport};
use crate::linalg::Mat;
use crate::metrics::{self, MetricReport, SsimWindow};
use crate::noise::{self, NoiseSpec};
use crate::patches::{aggregate_patches, extract_patches};
use crate::pca;
use crate::subspace::{self, SubspaceSelection};

/// Decomposition method of a denoising run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "3sd")]
    ThreeSd,
    #[serde(rename = "ksvd")]
    KsvdOnly,
    #[serde(rename = "pca")]
    Pca,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ThreeSd => "3sd",
            Method::KsvdOnly => "ksvd",
            Method::Pca => "pca",
        }
    }
}

/// Full configuration of a denoising run. A run is reproducible from its
/// config alone, so the config is echoed into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub method: Method,
    pub patch_side: usize,
    pub stride: usize,
    pub remove_dc: bool,
    pub atom_count: usize,
    pub iterations: usize,
    /// Coding tolerance gain: `epsilon = gain * sigma * sqrt(N)`.
    pub gain: f64,
    /// Noise standard deviation in the processing domain. Required unless
    /// `estimate_sigma` is set or (homomorphic) `looks` is given.
    pub sigma: Option<f64>,
    /// Estimate sigma with the median-absolute-difference rule when not
    /// given explicitly.
    pub estimate_sigma: bool,
    /// Cap on nonzeros per code; defaults to `N / 2`.
    pub max_sparsity: Option<usize>,
    pub init: DictInit,
    /// Subspace override: keep exactly this many principal atoms.
    pub fixed_p: Option<usize>,
    /// Subspace override: threshold at this frequency value.
    pub fixed_fstar: Option<usize>,
    /// Odd width of the optional histogram smoothing window.
    pub smooth_window: Option<usize>,
    /// PCA baseline: energy fraction for choosing the component count.
    pub energy_fraction: f64,
    /// Despeckle in the log domain (transform, denoise, exponentiate).
    pub homomorphic: bool,
    /// Speckle looks; with `homomorphic` this implies the log-domain sigma
    /// `sqrt(trigamma(looks))` when `sigma` is not given.
    pub looks: Option<u32>,
    /// Degradation to simulate (the `simulate` command).
    pub noise: Option<NoiseSpec>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: Method::ThreeSd,
            patch_side: 8,
            stride: 1,
            remove_dc: true,
            atom_count: 256,
            iterations: 10,
            gain: 1.15,
            sigma: None,
            estimate_sigma: false,
            max_sparsity: None,
            init: DictInit::OvercompleteDct,
            fixed_p: None,
            fixed_fstar: None,
            smooth_window: None,
            energy_fraction: 0.90,
            homomorphic: false,
            looks: None,
            noise: None,
            seed: 0,
            out_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn signal_dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn effective_max_sparsity(&self) -> usize {
        self.max_sparsity.unwrap_or(self.signal_dim() / 2).max(1)
    }
}

/// How the subspace threshold was decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    HistogramMode,
    FixedP,
    FixedFstar,
    /// No atom was ever used; there is no subspace to split and the
    /// reconstruction is the zero signal (plus re-added patch means).
    EmptyCoding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionInfo {
    pub threshold_freq: usize,
    pub principal_count: usize,
    pub atom_count: usize,
    pub source: ThresholdSource,
    pub smoothing_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaInfo {
    pub rank: usize,
    pub principal_count: usize,
    /// None when the component count was fixed explicitly.
    pub energy_fraction: Option<f64>,
}

/// Metrics against the reference, on the real-valued result and on its
/// 8-bit clamped version (what the output file stores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub ssim_window: SsimWindow,
    pub unclamped: MetricReport,
    pub clamped_8bit: MetricReport,
}

/// Everything a denoising run produced. All referenced files exist once the
/// run returns successfully.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub method: Method,
    pub config: PipelineConfig,
    /// `direct` or `log` (homomorphic).
    pub domain: String,
    pub sigma_used: Option<f64>,
    pub epsilon: Option<f64>,
    pub selection: Option<SelectionInfo>,
    pub pca: Option<PcaInfo>,
    pub learn: Option<LearnReport>,
    pub dictionary_file: Option<String>,
    pub histogram_file: Option<String>,
    pub image_png: String,
    pub image_pgm: String,
    pub metrics: Option<MetricsBlock>,
    /// Stage name and wall-clock milliseconds, in execution order. Excluded
    /// from determinism comparisons.
    pub timings_ms: Vec<(String, f64)>,
}

/// Degradation manifest written by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateManifest {
    pub noise: NoiseSpec,
    pub seed: u64,
    pub image_png: String,
    pub image_pgm: String,
}

/// Tracks files created by a run so a failed stage removes its partial
/// outputs.
struct OutputTracker {
    created: Vec<PathBuf>,
}

impl OutputTracker {
    fn new() -> Self {
        OutputTracker {
            created: Vec::new(),
        }
    }

    fn write_image(&mut self, img: &Image, dir: &Path, stem: &str) -> Result<(String, String)> {
        let png = dir.join(format!("{stem}.png"));
        let pgm = dir.join(format!("{stem}.pgm"));
        save_image(img, &png, ImageFormat::Png)?;
        self.created.push(png.clone());
        save_image(img, &pgm, ImageFormat::Pgm)?;
        self.created.push(pgm.clone());
        Ok((file_name(&png), file_name(&pgm)))
    }

    fn write_text(&mut self, dir: &Path, name: &str, contents: &str) -> Result<String> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.created.push(path.clone());
        Ok(file_name(&path))
    }

    fn cleanup(self) {
        for path in self.created {
            let _ = fs::remove_file(path);
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().unwrap().to_string_lossy().into_owned()
}

fn stage<T>(
    timings: &mut Vec<(String, f64)>,
    name: &'static str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(name))?;
    timings.push((name.to_string(), start.elapsed().as_secs_f64() * 1e3));
    Ok(out)
}

/// Runs the 3SD pipeline: learn, rank atoms by frequency, threshold at the
/// histogram mode, reconstruct on the principal subspace.
pub fn denoise_3sd(
    noisy: &Image,
    reference: Option<&Image>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<(Image, RunManifest)> {
    let mut cfg = cfg.clone();
    cfg.method = Method::ThreeSd;
    denoise(noisy, reference, &cfg, out_dir)
}

/// Same pipeline but reconstructing with the full dictionary (no subspace
/// split): the classical sparse-coding denoiser.
pub fn denoise_ksvd_only(
    noisy: &Image,
    reference: Option<&Image>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<(Image, RunManifest)> {
    let mut cfg = cfg.clone();
    cfg.method = Method::KsvdOnly;
    denoise(noisy, reference, &cfg, out_dir)
}

/// PCA/SVD baseline on the same patch matrix.
pub fn denoise_pca(
    noisy: &Image,
    reference: Option<&Image>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<(Image, RunManifest)> {
    let mut cfg = cfg.clone();
    cfg.method = Method::Pca;
    denoise(noisy, reference, &cfg, out_dir)
}

/// Dispatches on `cfg.method`. Any stage failure aborts the run with the
/// stage name attached and removes the partial outputs.
pub fn denoise(
    noisy: &Image,
    reference: Option<&Image>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<(Image, RunManifest)> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut tracker = OutputTracker::new();
    match run_denoise(noisy, reference, cfg, out_dir, &mut tracker) {
        Ok(v) => Ok(v),
        Err(e) => {
            tracker.cleanup();
            Err(e)
        }
    }
}

fn run_denoise(
    noisy: &Image,
    reference: Option<&Image>,
    cfg: &PipelineConfig,
    out_dir: &Path,
    tracker: &mut OutputTracker,
) -> Result<(Image, RunManifest)> {
    validate_config(cfg)?;
    let mut timings: Vec<(String, f64)> = Vec::new();

    // Homomorphic runs denoise ln(x) and exponentiate at the end.
    let (work, domain) = if cfg.homomorphic {
        let logged: Vec<f64> = noisy.pixels().iter().map(|&p| p.max(1.0).ln()).collect();
        (noisy.with_pixels(logged)?, "log")
    } else {
        (noisy.clone(), "direct")
    };

    let patch_matrix = stage(&mut timings, "extract", || {
        extract_patches(&work, cfg.patch_side, cfg.stride, cfg.remove_dc)
    })?;

    let mut manifest = RunManifest {
        method: cfg.method,
        config: cfg.clone(),
        domain: domain.to_string(),
        sigma_used: None,
        epsilon: None,
        selection: None,
        pca: None,
        learn: None,
        dictionary_file: None,
        histogram_file: None,
        image_png: String::new(),
        image_pgm: String::new(),
        metrics: None,
        timings_ms: Vec::new(),
    };

    let recon = match cfg.method {
        Method::Pca => {
            let svd = stage(&mut timings, "svd", || {
                pca::svd_decompose(&patch_matrix.data, 1e-10)
            })?;
            let (p, fraction) = match cfg.fixed_p {
                Some(p) => (p.min(svd.rank()), None),
                None => (
                    pca::pca_select_count(&svd, cfg.energy_fraction)
                        .map_err(|e| e.in_stage("select"))?,
                    Some(cfg.energy_fraction),
                ),
            };
            manifest.pca = Some(PcaInfo {
                rank: svd.rank(),
                principal_count: p,
                energy_fraction: fraction,
            });
            stage(&mut timings, "reconstruct", || {
                pca::pca_reconstruct(&svd, p)
            })?
        }
        Method::ThreeSd | Method::KsvdOnly => {
            let sigma = resolve_sigma(cfg, &work)?;
            let epsilon = cfg.gain * sigma * (cfg.signal_dim() as f64).sqrt();
            manifest.sigma_used = Some(sigma);
            manifest.epsilon = Some(epsilon);

            let learn_cfg = LearnConfig {
                atom_count: cfg.atom_count,
                iterations: cfg.iterations,
                epsilon,
                max_sparsity: cfg.effective_max_sparsity(),
                init: cfg.init,
                seed: cfg.seed,
            };
            let (dict, coeffs, report) = stage(&mut timings, "learn", || {
                ksvd::ksvd_learn(&patch_matrix.data, &learn_cfg)
            })?;
            manifest.learn = Some(report);

            let dict_name = stage(&mut timings, "write-dictionary", || {
                let path = out_dir.join("dictionary.ssd1");
                ksvd::serialize_dictionary(&dict, &path)?;
                tracker.created.push(path.clone());
                Ok(file_name(&path))
            })?;
            manifest.dictionary_file = Some(dict_name);

            let freqs = stage(&mut timings, "frequencies", || {
                Ok(subspace::atom_frequencies(&coeffs))
            })?;
            let hist_name =
                tracker.write_text(out_dir, "histogram.csv", &subspace::histogram_csv(&freqs))?;
            manifest.histogram_file = Some(hist_name);

            match cfg.method {
                Method::KsvdOnly => stage(&mut timings, "reconstruct", || {
                    coding::reconstruct(&dict, &coeffs)
                })?,
                Method::ThreeSd if freqs.freqs.iter().all(|&f| f == 0) => {
                    // Nothing was coded, so there is no histogram to split on
                    // and every subspace reconstruction is the zero matrix.
                    manifest.selection = Some(SelectionInfo {
                        threshold_freq: 0,
                        principal_count: 0,
                        atom_count: cfg.atom_count,
                        source: ThresholdSource::EmptyCoding,
                        smoothing_window: cfg.smooth_window,
                    });
                    Mat::zeros(patch_matrix.signal_dim(), patch_matrix.patch_count())
                }
                Method::ThreeSd => {
                    let selection = stage(&mut timings, "select", || build_selection(cfg, &freqs))?;
                    manifest.selection = Some(SelectionInfo {
                        threshold_freq: selection.threshold_freq,
                        principal_count: selection.principal_count,
                        atom_count: cfg.atom_count,
                        source: threshold_source(cfg),
                        smoothing_window: cfg.smooth_window,
                    });
                    stage(&mut timings, "reconstruct", || {
                        subspace::reconstruct_principal(&dict, &coeffs, &selection)
                    })?
                }
                Method::Pca => unreachable!(),
            }
        }
    };

    let aggregated = stage(&mut timings, "aggregate", || {
        aggregate_patches(
            &recon,
            &patch_matrix.grid,
            &patch_matrix.dc_offsets,
            (work.width(), work.height()),
        )
    })?;
    let denoised = if cfg.homomorphic {
        aggregated.with_pixels(aggregated.pixels().iter().map(|&v| v.exp()).collect())?
    } else {
        aggregated
    };

    if let Some(reference) = reference {
        let block = stage(&mut timings, "metrics", || {
            let window = SsimWindow::Sliding8x8;
            Ok(MetricsBlock {
                ssim_window: window,
                unclamped: metrics::metric_report(reference, &denoised, window)?,
                clamped_8bit: metrics::metric_report(reference, &denoised.quantized()?, window)?,
            })
        })?;
        manifest.metrics = Some(block);
    }

    let (png, pgm) = stage(&mut timings, "write-image", || {
        tracker.write_image(&denoised, out_dir, "denoised")
    })?;
    manifest.image_png = png;
    manifest.image_pgm = pgm;
    manifest.timings_ms = timings;

    let manifest_json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    tracker.write_text(out_dir, "manifest.json", &manifest_json)?;

    Ok((denoised, manifest))
}

fn validate_config(cfg: &PipelineConfig) -> Result<()> {
    if cfg.patch_side == 0 {
        return Err(Error::Config("patch_side must be positive".into()));
    }
    if cfg.stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    if cfg.atom_count < cfg.signal_dim() {
        return Err(Error::Config(format!(
            "atom_count {} below patch dimension {}",
            cfg.atom_count,
            cfg.signal_dim()
        )));
    }
    if cfg.iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    if !(cfg.gain > 0.0) {
        return Err(Error::Config("gain must be positive".into()));
    }
    if !(cfg.energy_fraction > 0.0 && cfg.energy_fraction <= 1.0) {
        return Err(Error::Config("energy_fraction must be in (0, 1]".into()));
    }
    if let Some(p) = cfg.fixed_p {
        if p == 0 || p > cfg.atom_count {
            return Err(Error::Config(format!(
                "fixed_p {} out of range 1..={}",
                p, cfg.atom_count
            )));
        }
    }
    if cfg.fixed_p.is_some() && cfg.fixed_fstar.is_some() {
        return Err(Error::Config(
            "fixed_p and fixed_fstar are mutually exclusive".into(),
        ));
    }
    Ok(())
}

fn threshold_source(cfg: &PipelineConfig) -> ThresholdSource {
    if cfg.fixed_p.is_some() {
        ThresholdSource::FixedP
    } else if cfg.fixed_fstar.is_some() {
        ThresholdSource::FixedFstar
    } else {
        ThresholdSource::HistogramMode
    }
}

fn resolve_sigma(cfg: &PipelineConfig, work: &Image) -> Result<f64> {
    if let Some(sigma) = cfg.sigma {
        if !(sigma > 0.0) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        return Ok(sigma);
    }
    if cfg.homomorphic {
        if let Some(looks) = cfg.looks {
            if looks == 0 {
                return Err(Error::Config("looks must be at least 1".into()));
            }
            // Log-domain noise std of Gamma(L, 1/L) speckle.
            return Ok(noise::trigamma(looks as f64).sqrt());
        }
    }
    if cfg.estimate_sigma {
        let est = noise::estimate_sigma_mad(work);
        if est <= 0.0 {
            return Err(Error::Config(
                "sigma estimate came out non-positive; pass sigma explicitly".into(),
            ));
        }
        return Ok(est);
    }
    Err(Error::Config(
        "sigma is required: set sigma, estimate_sigma, or looks with homomorphic".into(),
    ))
}

fn build_selection(
    cfg: &PipelineConfig,
    freqs: &subspace::AtomFrequencies,
) -> Result<SubspaceSelection> {
    let permutation = subspace::frequency_permutation(freqs);
    let (threshold_freq, principal_count) = match (cfg.fixed_p, cfg.fixed_fstar) {
        (Some(p), None) => {
            let p = p.min(freqs.freqs.len());
            (freqs.freqs[permutation[p - 1]], p)
        }
        (None, Some(fstar)) => {
            let count = freqs.freqs.iter().filter(|&&f| f >= fstar).count();
            if count == 0 {
                return Err(Error::InvalidArgument(format!(
                    "fixed f*={fstar} excludes every atom"
                )));
            }
            (fstar, count)
        }
        (None, None) => subspace::select_threshold(freqs, cfg.smooth_window)?,
        (Some(_), Some(_)) => unreachable!("rejected by validate_config"),
    };
    Ok(SubspaceSelection {
        permutation,
        threshold_freq,
        principal_count,
    })
}

/// Applies a noise model to a clean image and writes the degraded image and
/// its manifest to `out_dir`.
pub fn simulate(
    clean: &Image,
    spec: &NoiseSpec,
    out_dir: &Path,
) -> Result<(Image, SimulateManifest)> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut tracker = OutputTracker::new();
    let result = (|| {
        let noisy = spec.apply(clean)?;
        let (png, pgm) = tracker.write_image(&noisy, out_dir, "noisy")?;
        let manifest = SimulateManifest {
            noise: *spec,
            seed: spec.seed(),
            image_png: png,
            image_pgm: pgm,
        };
        let json =
            serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        tracker.write_text(out_dir, "manifest.json", &json)?;
        Ok((noisy, manifest))
    })();
    if result.is_err() {
        tracker.cleanup();
    }
    result
}

/// One row of the comparison table, read back from a run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub principal_count: Option<usize>,
    pub threshold_freq: Option<usize>,
    pub total_time_ms: f64,
    pub manifest: String,
}

/// Reads run manifests and renders the method comparison, rows sorted by
/// PSNR descending. Returns the aligned text table and its CSV form.
pub fn report(manifest_paths: &[PathBuf]) -> Result<(String, String)> {
    if manifest_paths.is_empty() {
        return Err(Error::InvalidArgument(
            "report needs at least one manifest".into(),
        ));
    }
    let mut rows = Vec::new();
    for path in manifest_paths {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: RunManifest =
            serde_json::from_str(&raw).map_err(|e| Error::Config(format!("{path:?}: {e}")))?;
        rows.push(ReportRow {
            method: manifest.method.as_str().to_string(),
            psnr_db: manifest.metrics.as_ref().map(|m| m.unclamped.psnr_db),
            ssim: manifest.metrics.as_ref().map(|m| m.unclamped.ssim),
            principal_count: manifest
                .selection
                .as_ref()
                .map(|s| s.principal_count)
                .or_else(|| manifest.pca.as_ref().map(|p| p.principal_count)),
            threshold_freq: manifest.selection.as_ref().map(|s| s.threshold_freq),
            total_time_ms: manifest.timings_ms.iter().map(|(_, ms)| ms).sum(),
            manifest: path.to_string_lossy().into_owned(),
        });
    }
    rows.sort_by(|a, b| {
        let pa = a.psnr_db.unwrap_or(f64::NEG_INFINITY);
        let pb = b.psnr_db.unwrap_or(f64::NEG_INFINITY);
        pb.partial_cmp(&pa).unwrap().then(a.method.cmp(&b.method))
    });

    let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let fmt_count = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());

    let mut text = format!(
        "{:<8} {:>10} {:>8} {:>6} {:>6} {:>10}\n",
        "method", "psnr_db", "ssim", "P", "f*", "time_ms"
    );
    let mut csv =
        String::from("method,psnr_db,ssim,principal_count,threshold_freq,total_time_ms,manifest\n");
    for r in &rows {
        text.push_str(&format!(
            "{:<8} {:>10} {:>8} {:>6} {:>6} {:>10.1}\n",
            r.method,
            fmt_opt(r.psnr_db),
            fmt_opt(r.ssim.map(|s| (s * 1e4).round() / 1e4)),
            fmt_count(r.principal_count),
            fmt_count(r.threshold_freq),
            r.total_time_ms
        ));
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method,
            r.psnr_db.map_or(String::from(""), |v| v.to_string()),
            r.ssim.map_or(String::from(""), |v| v.to_string()),
            r.principal_count
                .map_or(String::from(""), |v| v.to_string()),
            r.threshold_freq.map_or(String::from(""), |v| v.to_string()),
            r.total_time_ms,
            r.manifest
        ));
    }
    Ok((text, csv))
}
