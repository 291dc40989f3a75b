//! Command-line front end: simulate degradations, run the denoising
//! pipelines, and tabulate run manifests.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ssd3::image::{load_image, ImageFormat};
use ssd3::ksvd::DictInit;
use ssd3::noise::NoiseSpec;
use ssd3::pipeline::{self, Method, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "ssd3",
    version,
    about = "Sparse signal subspace decomposition for image denoising"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a seeded synthetic degradation to a clean image.
    Simulate(SimulateArgs),
    /// Denoise an image with 3SD, plain K-SVD or the PCA baseline.
    Denoise(DenoiseArgs),
    /// Tabulate one or more run manifests (text table + CSV).
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseKind {
    Awgn,
    Speckle,
}

#[derive(Args)]
struct SimulateArgs {
    /// Clean input image (.pgm or .png).
    #[arg(long)]
    input: PathBuf,
    /// Output directory for noisy.png/noisy.pgm and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    noise: NoiseKind,
    /// AWGN standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Speckle looks (L=1 is one-look SAR).
    #[arg(long)]
    looks: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    #[value(name = "3sd")]
    ThreeSd,
    Ksvd,
    Pca,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Dct,
    Patches,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Noisy input image (.pgm or .png).
    #[arg(long)]
    input: PathBuf,
    /// Clean reference; enables PSNR/SSIM in the manifest.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Output directory for the run artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config whose keys mirror the pipeline config; explicit flags
    /// override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    patch_side: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// Dictionary size K.
    #[arg(long = "atoms")]
    atom_count: Option<usize>,
    /// K-SVD iterations.
    #[arg(long = "iters")]
    iterations: Option<usize>,
    /// Noise standard deviation in the processing domain.
    #[arg(long)]
    sigma: Option<f64>,
    /// Tolerance gain g in epsilon = g * sigma * sqrt(N).
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_sparsity: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Keep exactly P principal atoms instead of the histogram mode.
    #[arg(long)]
    fixed_p: Option<usize>,
    /// Threshold at this frequency value instead of the histogram mode.
    #[arg(long)]
    fixed_fstar: Option<usize>,
    /// Odd width of the histogram smoothing window.
    #[arg(long)]
    smooth_window: Option<usize>,
    /// PCA energy fraction in (0, 1].
    #[arg(long)]
    energy_fraction: Option<f64>,
    /// Despeckle in the log domain.
    #[arg(long)]
    homomorphic: bool,
    /// Speckle looks; with --homomorphic this implies the log-domain sigma.
    #[arg(long)]
    looks: Option<u32>,
    /// Estimate sigma from the image (median absolute difference).
    #[arg(long)]
    estimate_sigma: bool,
    /// Disable per-patch mean removal.
    #[arg(long)]
    no_dc: bool,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run manifests to tabulate.
    #[arg(required = true)]
    manifests: Vec<PathBuf>,
    /// Also write the CSV form here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut cause = std::error::Error::source(&e);
            while let Some(c) = cause {
                eprintln!("  caused by: {c}");
                cause = c.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), ssd3::Error> {
    match cli.command {
        Command::Simulate(args) => {
            let clean = load_image(&args.input, ImageFormat::from_path(&args.input)?)?;
            let spec = match args.noise {
                NoiseKind::Awgn => NoiseSpec::Awgn {
                    sigma: args
                        .sigma
                        .ok_or_else(|| ssd3::Error::InvalidArgument("awgn needs --sigma".into()))?,
                    seed: args.seed,
                },
                NoiseKind::Speckle => NoiseSpec::Speckle {
                    looks: args.looks.ok_or_else(|| {
                        ssd3::Error::InvalidArgument("speckle needs --looks".into())
                    })?,
                    seed: args.seed,
                },
            };
            let (_, manifest) = pipeline::simulate(&clean, &spec, &args.out)?;
            println!(
                "wrote {} and {} under {}",
                manifest.image_png,
                manifest.image_pgm,
                args.out.display()
            );
            Ok(())
        }
        Command::Denoise(args) => {
            if let Some(n) = args.threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| ssd3::Error::InvalidArgument(format!("thread pool: {e}")))?;
            }
            let cfg = merge_config(&args)?;
            let out_dir = args
                .out
                .clone()
                .or_else(|| cfg.out_dir.clone())
                .ok_or_else(|| ssd3::Error::Config("no output directory (--out)".into()))?;
            let noisy = load_image(&args.input, ImageFormat::from_path(&args.input)?)?;
            let reference = match &args.reference {
                Some(p) => Some(load_image(p, ImageFormat::from_path(p)?)?),
                None => None,
            };
            let (_, manifest) = pipeline::denoise(&noisy, reference.as_ref(), &cfg, &out_dir)?;
            println!(
                "method={} domain={} out={}",
                manifest.method.as_str(),
                manifest.domain,
                out_dir.display()
            );
            if let Some(sel) = &manifest.selection {
                println!(
                    "selection: f*={} P={}/{}",
                    sel.threshold_freq, sel.principal_count, sel.atom_count
                );
            }
            if let Some(pca) = &manifest.pca {
                println!("pca: rank={} P={}", pca.rank, pca.principal_count);
            }
            if let Some(m) = &manifest.metrics {
                println!(
                    "psnr={:.4} dB ssim={:.4} (unclamped, sliding 8x8)",
                    m.unclamped.psnr_db, m.unclamped.ssim
                );
            }
            Ok(())
        }
        Command::Report(args) => {
            let (text, csv) = pipeline::report(&args.manifests)?;
            print!("{text}");
            if let Some(path) = args.csv {
                std::fs::write(&path, &csv).map_err(|e| {
                    ssd3::Error::InvalidArgument(format!("writing {}: {e}", path.display()))
                })?;
                println!("csv written to {}", path.display());
            }
            Ok(())
        }
    }
}

/// Starts from the JSON config (or defaults) and overlays every flag the
/// user passed explicitly.
fn merge_config(args: &DenoiseArgs) -> Result<PipelineConfig, ssd3::Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path)
                .map_err(|e| ssd3::Error::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&raw)
                .map_err(|e| ssd3::Error::Config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(m) = args.method {
        cfg.method = match m {
            MethodArg::ThreeSd => Method::ThreeSd,
            MethodArg::Ksvd => Method::KsvdOnly,
            MethodArg::Pca => Method::Pca,
        };
    }
    if let Some(v) = args.patch_side {
        cfg.patch_side = v;
    }
    if let Some(v) = args.stride {
        cfg.stride = v;
    }
    if let Some(v) = args.atom_count {
        cfg.atom_count = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.sigma {
        cfg.sigma = Some(v);
    }
    if let Some(v) = args.gain {
        cfg.gain = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.max_sparsity {
        cfg.max_sparsity = Some(v);
    }
    if let Some(v) = args.init {
        cfg.init = match v {
            InitArg::Dct => DictInit::OvercompleteDct,
            InitArg::Patches => DictInit::RandomPatches,
        };
    }
    if let Some(v) = args.fixed_p {
        cfg.fixed_p = Some(v);
    }
    if let Some(v) = args.fixed_fstar {
        cfg.fixed_fstar = Some(v);
    }
    if let Some(v) = args.smooth_window {
        cfg.smooth_window = Some(v);
    }
    if let Some(v) = args.energy_fraction {
        cfg.energy_fraction = v;
    }
    if args.homomorphic {
        cfg.homomorphic = true;
    }
    if let Some(v) = args.looks {
        cfg.looks = Some(v);
    }
    if args.estimate_sigma {
        cfg.estimate_sigma = true;
    }
    if args.no_dc {
        cfg.remove_dc = false;
    }
    Ok(cfg)
}
