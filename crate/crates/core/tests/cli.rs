//! End-to-end tests of the `ssd3` binary: simulate, denoise, report, config
//! file merging and error reporting.

use std::path::Path;
use std::process::Command;

use ssd3::image::{load_image, save_image, ImageFormat};
use ssd3::synthetic;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssd3"))
}

fn write_test_image(path: &Path, size: usize) {
    let img = synthetic::blocks(size);
    save_image(&img, path, ImageFormat::from_path(path).unwrap()).unwrap();
}

#[test]
fn simulate_with_zero_sigma_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("clean.pgm");
    write_test_image(&input, 32);

    let out = bin()
        .args(["simulate", "--input"])
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("sim"))
        .args(["--noise", "awgn", "--sigma", "0", "--seed", "9"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let clean = load_image(&input, ImageFormat::Pgm).unwrap();
    let noisy = load_image(&dir.path().join("sim/noisy.pgm"), ImageFormat::Pgm).unwrap();
    assert_eq!(clean, noisy);
    assert!(dir.path().join("sim/manifest.json").exists());
}

#[test]
fn denoise_writes_artifacts_and_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let clean_path = dir.path().join("clean.png");
    write_test_image(&clean_path, 48);

    let sim = bin()
        .args(["simulate", "--input"])
        .arg(&clean_path)
        .arg("--out")
        .arg(dir.path().join("sim"))
        .args(["--noise", "awgn", "--sigma", "10", "--seed", "1"])
        .output()
        .unwrap();
    assert!(sim.status.success());

    let run_dir = dir.path().join("run");
    let out = bin()
        .args(["denoise", "--input"])
        .arg(dir.path().join("sim/noisy.png"))
        .arg("--reference")
        .arg(&clean_path)
        .arg("--out")
        .arg(&run_dir)
        .args([
            "--method",
            "3sd",
            "--patch-side",
            "4",
            "--stride",
            "2",
            "--atoms",
            "24",
            "--iters",
            "2",
            "--sigma",
            "10",
            "--init",
            "patches",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("method=3sd"));
    assert!(stdout.contains("psnr="));

    for artifact in [
        "denoised.png",
        "denoised.pgm",
        "manifest.json",
        "histogram.csv",
        "dictionary.ssd1",
    ] {
        assert!(run_dir.join(artifact).exists(), "{artifact} missing");
    }
}

#[test]
fn config_file_is_merged_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("noisy.pgm");
    write_test_image(&input, 32);

    let config_path = dir.path().join("cfg.json");
    std::fs::write(
        &config_path,
        r#"{"method":"pca","patch_side":4,"stride":2,"atom_count":16,"iterations":1,
            "sigma":8.0,"init":"random_patches","energy_fraction":0.8,"seed":2}"#,
    )
    .unwrap();

    // Config alone: PCA runs.
    let out = bin()
        .args(["denoise", "--input"])
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("pca-run"))
        .arg("--config")
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("method=pca"));

    // Explicit flag overrides the config file's method.
    let out = bin()
        .args(["denoise", "--input"])
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("ksvd-run"))
        .arg("--config")
        .arg(&config_path)
        .args(["--method", "ksvd"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("method=ksvd"));
}

#[test]
fn report_tabulates_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let clean_path = dir.path().join("clean.pgm");
    write_test_image(&clean_path, 40);
    let noisy_dir = dir.path().join("sim");
    bin()
        .args(["simulate", "--input"])
        .arg(&clean_path)
        .arg("--out")
        .arg(&noisy_dir)
        .args(["--noise", "awgn", "--sigma", "12", "--seed", "4"])
        .output()
        .unwrap();

    let mut manifests = Vec::new();
    for method in ["3sd", "pca"] {
        let run_dir = dir.path().join(method);
        let out = bin()
            .args(["denoise", "--input"])
            .arg(noisy_dir.join("noisy.pgm"))
            .arg("--reference")
            .arg(&clean_path)
            .arg("--out")
            .arg(&run_dir)
            .args([
                "--method",
                method,
                "--patch-side",
                "4",
                "--stride",
                "2",
                "--atoms",
                "20",
                "--iters",
                "1",
                "--sigma",
                "12",
                "--init",
                "patches",
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        manifests.push(run_dir.join("manifest.json"));
    }

    let csv_path = dir.path().join("table.csv");
    let out = bin()
        .arg("report")
        .args(&manifests)
        .arg("--csv")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("method"));
    assert!(table.contains("3sd"));
    assert!(table.contains("pca"));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let mut last = f64::INFINITY;
    for line in csv.lines().skip(1) {
        let psnr: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(psnr <= last, "rows not sorted by psnr");
        last = psnr;
    }
}

#[test]
fn unsupported_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let deep = dir.path().join("deep.pgm");
    std::fs::write(&deep, b"P5\n2 1\n65535\n\0\0\0\0").unwrap();
    let out = bin()
        .args(["denoise", "--input"])
        .arg(&deep)
        .arg("--out")
        .arg(dir.path().join("x"))
        .args(["--sigma", "5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported bit depth"));

    // Missing sigma is a config error naming the missing piece.
    let ok = dir.path().join("ok.pgm");
    write_test_image(&ok, 16);
    let out = bin()
        .args(["denoise", "--input"])
        .arg(&ok)
        .arg("--out")
        .arg(dir.path().join("y"))
        .args(["--patch-side", "4", "--atoms", "16"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
}
