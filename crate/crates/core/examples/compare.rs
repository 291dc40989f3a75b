//! Runs the three decomposition methods on the synthetic corpus under AWGN
//! and prints the comparison, including a sweep of the principal-atom count
//! around the automatic threshold.
//!
//! Usage: cargo run --release --example compare [stride] [iterations]

use ssd3::metrics::{metric_report, SsimWindow};
use ssd3::noise::add_awgn;
use ssd3::pipeline::{denoise, Method, PipelineConfig};
use ssd3::synthetic;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let stride: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let iterations: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let sigma = 35.0;
    let tmp = std::env::temp_dir().join("ssd3-compare");

    for name in synthetic::CORPUS {
        let clean = synthetic::by_name(name, 256).unwrap();
        let noisy = add_awgn(&clean, sigma, 0xC0FFEE).unwrap();
        let base = metric_report(&clean, &noisy, SsimWindow::Sliding8x8).unwrap();
        println!(
            "== {name}: noisy psnr={:.3} ssim={:.4}",
            base.psnr_db, base.ssim
        );

        let cfg = PipelineConfig {
            stride,
            iterations,
            sigma: Some(sigma),
            seed: 7,
            ..PipelineConfig::default()
        };

        let t0 = std::time::Instant::now();
        let mut cfg3 = cfg.clone();
        cfg3.method = Method::ThreeSd;
        let (_, m3) = denoise(&noisy, Some(&clean), &cfg3, &tmp.join(name).join("3sd")).unwrap();
        let sel = m3.selection.clone().unwrap();
        let met3 = m3.metrics.clone().unwrap();
        println!(
            "   3sd : psnr={:.3} ssim={:.4}  f*={} P={}  [{:.1}s]",
            met3.unclamped.psnr_db,
            met3.unclamped.ssim,
            sel.threshold_freq,
            sel.principal_count,
            t0.elapsed().as_secs_f64()
        );
        if let Some(learn) = &m3.learn {
            println!(
                "   residuals: {:?}",
                learn
                    .mean_residuals
                    .iter()
                    .map(|r| (r * 10.0).round() / 10.0)
                    .collect::<Vec<_>>()
            );
            println!("   replacements: {:?}", learn.replacements);
        }

        let mut cfgk = cfg.clone();
        cfgk.method = Method::KsvdOnly;
        let (_, mk) = denoise(&noisy, Some(&clean), &cfgk, &tmp.join(name).join("ksvd")).unwrap();
        let metk = mk.metrics.clone().unwrap();
        println!(
            "   ksvd: psnr={:.3} ssim={:.4}   gain: {:+.3} dB, {:+.4} ssim",
            metk.unclamped.psnr_db,
            metk.unclamped.ssim,
            met3.unclamped.psnr_db - metk.unclamped.psnr_db,
            met3.unclamped.ssim - metk.unclamped.ssim
        );

        let mut cfgp = cfg.clone();
        cfgp.method = Method::Pca;
        let (_, mp) = denoise(&noisy, Some(&clean), &cfgp, &tmp.join(name).join("pca")).unwrap();
        let metp = mp.metrics.clone().unwrap();
        println!(
            "   pca : psnr={:.3} ssim={:.4}  P={}",
            metp.unclamped.psnr_db,
            metp.unclamped.ssim,
            mp.pca.unwrap().principal_count
        );

        // Fixed-P sweep +-20% around the automatic P.
        let p0 = sel.principal_count;
        let mut sweep = Vec::new();
        for factor in [0.8, 0.9, 1.0, 1.1, 1.2] {
            let p = ((p0 as f64 * factor).round() as usize).clamp(1, cfg.atom_count);
            let mut c = cfg.clone();
            c.method = Method::ThreeSd;
            c.fixed_p = Some(p);
            let (_, m) = denoise(
                &noisy,
                Some(&clean),
                &c,
                &tmp.join(name).join(format!("p{p}")),
            )
            .unwrap();
            sweep.push((p, m.metrics.unwrap().unclamped.psnr_db));
        }
        let lo = sweep.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
        let hi = sweep
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "   sweep: {:?}  spread={:.3} dB",
            sweep
                .iter()
                .map(|&(p, v)| format!("{p}:{v:.2}"))
                .collect::<Vec<_>>(),
            hi - lo
        );
    }
}
