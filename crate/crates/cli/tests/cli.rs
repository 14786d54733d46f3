//! CLI behavior: exit codes, config files, artifact structure.

use std::process::Command;

fn goursat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_goursat"))
}

#[test]
fn missing_seed_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let status = goursat()
        .args(["transform", "--kernel", "constant", "--paths", "10"])
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bad_kernel_spec_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let status = goursat()
        .args(["--seed", "1", "verify-kernel", "--kernel", "frobnicate"])
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unmet_truncation_bound_is_a_numerical_error() {
    // Power tails decay like 1/T_max; a tight tolerance cannot be met.
    let out = tempfile::tempdir().unwrap();
    let status = goursat()
        .args([
            "--seed",
            "1",
            "sde-solve",
            "--kernel",
            "muntz 0,1",
            "--y",
            "1,-2",
            "--t-end",
            "1",
            "--paths",
            "4",
            "--delta",
            "1e-2",
            "--trunc-tol",
            "1e-6",
        ])
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn failed_check_exits_one() {
    // A grid far too coarse for the 5e-3 bridge tolerances.
    let out = tempfile::tempdir().unwrap();
    let status = goursat()
        .args([
            "--seed",
            "1",
            "bridge",
            "--basis",
            "const; power lambda=1",
            "--t1",
            "1",
            "--y",
            "1,-2",
            "--paths",
            "10",
            "--delta",
            "0.1",
            "--eps0",
            "0.01",
        ])
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(
        &config,
        "seed=9\nkernel=constant\npaths=50\nt-end=0.5\ndelta=2e-3\n",
    )
    .unwrap();
    let out_a = dir.path().join("a");
    let status = goursat()
        .args(["--config"])
        .arg(&config)
        .args(["transform"])
        .arg("--out-dir")
        .arg(&out_a)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = std::fs::read_to_string(out_a.join("manifest.txt")).unwrap();
    assert!(manifest.contains("kernel=constant"));
    assert!(manifest.contains("seed=9"));

    // A flag overrides the file: change the seed, outputs must differ.
    let out_b = dir.path().join("b");
    let status = goursat()
        .args(["--config"])
        .arg(&config)
        .args(["--seed", "10", "transform"])
        .arg("--out-dir")
        .arg(&out_b)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest_b = std::fs::read_to_string(out_b.join("manifest.txt")).unwrap();
    assert!(manifest_b.contains("seed=10"));
    assert_ne!(
        std::fs::read(out_a.join("cov_check.csv")).unwrap(),
        std::fs::read(out_b.join("cov_check.csv")).unwrap()
    );
}

#[test]
fn manifest_hashes_every_artifact() {
    let out = tempfile::tempdir().unwrap();
    let status = goursat()
        .args([
            "--seed",
            "3",
            "harmonic",
            "--basis",
            "const",
            "--law",
            "point:0.3",
            "--t",
            "0.5",
            "--paths",
            "500",
            "--delta",
            "2e-3",
        ])
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = std::fs::read_to_string(out.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("sha256:martingale.csv="));
    // The recorded hash matches the file contents.
    let line = manifest
        .lines()
        .find(|l| l.starts_with("sha256:martingale.csv="))
        .unwrap();
    let recorded = line.split('=').nth(1).unwrap();
    use sha2::Digest;
    let digest = sha2::Sha256::digest(std::fs::read(out.path().join("martingale.csv")).unwrap());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(recorded, hex);
}

#[test]
fn harmonic_rejects_finite_norm_basis() {
    // The martingale statement needs alpha_inf = 0.
    let out = tempfile::tempdir().unwrap();
    let status = goursat()
        .args([
            "--seed",
            "2",
            "harmonic",
            "--basis",
            "exp rate=1",
            "--law",
            "point:0.1",
            "--t",
            "0.5",
            "--paths",
            "100",
        ])
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn gaussian_law_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cov = dir.path().join("cov.txt");
    std::fs::write(&cov, "1.0 0.0\n0.0 1.0\n").unwrap();
    let out = dir.path().join("out");
    let status = goursat()
        .args([
            "--seed",
            "4",
            "harmonic",
            "--basis",
            "const; power lambda=1",
        ])
        .arg("--law")
        .arg(format!("gauss:{}", cov.display()))
        .args(["--t", "0.5", "--paths", "4000", "--delta", "2e-3"])
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("martingale.csv").exists());
}

#[test]
fn tabulated_basis_file_flows_through_kernel_commands() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("ramp.txt");
    // f(s) = s tabulated densely on (0, 3]; order-1 kernel 3v/t^2.
    let mut rows = String::new();
    for k in 0..1500 {
        let t = 1e-4 + 3.0 * k as f64 / 1499.0;
        rows.push_str(&format!("{t} {t}\n"));
    }
    std::fs::write(&table, rows).unwrap();
    let out = dir.path().join("out");
    let status = goursat()
        .args(["--seed", "1", "verify-kernel"])
        .arg("--kernel")
        .arg(format!("order1 table file={}", table.display()))
        .args(["--t-max", "2.0"])
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("integrability=finite"), "{manifest}");
}
