//! End-to-end tests of the `phaseret` binary: wiring of every subcommand,
//! byte-level determinism of generated files, and a golden-run regression
//! for the sweep output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phaseret"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn phaseret");
    assert!(
        out.status.success(),
        "phaseret {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_line(out: &Output, tag: &str) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .find(|l| l.starts_with(tag))
        .unwrap_or_else(|| panic!("no {tag} line in output"))
        .to_string()
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    let pattern = format!("{key}=");
    line.split_whitespace()
        .find_map(|part| part.strip_prefix(&pattern))
        .unwrap_or_else(|| panic!("no field {key} in {line}"))
}

fn data_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn generate_is_bit_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    for out in [&a, &b] {
        run_ok(&[
            "generate",
            "--ensemble",
            "rademacher",
            "--n",
            "16",
            "--m",
            "160",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.bin");
    run_ok(&[
        "generate",
        "--ensemble",
        "rademacher",
        "--n",
        "16",
        "--m",
        "160",
        "--seed",
        "8",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn generate_solve_certify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("sample.bin");
    let out = run_ok(&[
        "generate",
        "--ensemble",
        "erasure:0.6666666666666666",
        "--n",
        "12",
        "--m",
        "120",
        "--seed",
        "3",
        "--x0",
        "flat:0.4",
        "--out",
        sample.to_str().unwrap(),
    ]);
    let line = stdout_line(&out, "sampleset");
    assert_eq!(field(&line, "prng"), "chacha8");
    assert_eq!(field(&line, "x0"), "flat:0.4");

    let out = run_ok(&["solve", "--input", sample.to_str().unwrap()]);
    let line = stdout_line(&out, "solution");
    assert_eq!(field(&line, "converged"), "true");
    assert_eq!(field(&line, "program"), "noisy");
    let objective: f64 = field(&line, "objective").parse().unwrap();
    assert!(objective < 1e-3, "objective {objective}");

    let report = dir.path().join("cert.txt");
    let out = run_ok(&[
        "certify",
        "--input",
        sample.to_str().unwrap(),
        "--x0",
        "flat:0.4",
        "--x0-seed",
        "1",
        "--out",
        report.to_str().unwrap(),
    ]);
    let line = stdout_line(&out, "certificate");
    let r_ct: f64 = field(&line, "r_ct").parse().unwrap();
    assert!(r_ct > 1.0 && r_ct < 6.0, "r_ct {r_ct}");
    for key in ["beta0", "norm_yt", "norm_ytperp_plus_2i", "linf_lambda", "passed"] {
        field(&line, key);
    }
    let written = fs::read_to_string(&report).unwrap();
    assert!(written.starts_with("certificate "));
}

#[test]
fn kappa_and_stability_report_records() {
    let out = run_ok(&[
        "kappa",
        "--ensemble",
        "rademacher",
        "--n",
        "16",
        "--mu-list",
        "0.3",
        "--pairs",
        "12",
        "--samples",
        "500",
        "--seed",
        "2",
    ]);
    let line = stdout_line(&out, "kappa_infimum");
    let min_kappa: f64 = field(&line, "min_kappa").parse().unwrap();
    assert!(min_kappa > 0.0);
    let shape: f64 = field(&line, "bound_shape").parse().unwrap();
    assert!((shape - (1.0f64 - 8.0 * 0.09).sqrt()).abs() < 1e-12);

    let out = run_ok(&[
        "stability",
        "--ensemble",
        "rademacher",
        "--n",
        "12",
        "--m",
        "120",
        "--signal",
        "flat:0.4",
        "--trials",
        "20",
        "--seed",
        "5",
        "--delta-pairs",
        "4",
    ]);
    let line = stdout_line(&out, "stability ");
    let min_ratio: f64 = field(&line, "min_ratio").parse().unwrap();
    assert!(min_ratio > 0.0);
    let delta_line = stdout_line(&out, "stability_delta");
    let dev: f64 = field(&delta_line, "max_abs_gamma_minus_kappa").parse().unwrap();
    assert!(dev.is_finite() && dev >= 0.0);
}

#[test]
fn sweep_matches_golden_run() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.txt");
    run_ok(&[
        "sweep",
        "--spec",
        data_path("golden.cfg").to_str().unwrap(),
        "--out",
        results.to_str().unwrap(),
    ]);
    let produced = fs::read_to_string(&results).unwrap();
    let golden = fs::read_to_string(data_path("golden_result.txt")).unwrap();
    let strip = |text: &str| {
        text.lines()
            .filter(|l| !l.starts_with("meta"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&produced), strip(&golden), "sweep diverged from golden run");

    // report: CSV always, SVG on request, aggregates verified against rows
    let csv = dir.path().join("cells.csv");
    let svg = dir.path().join("plot.svg");
    run_ok(&[
        "report",
        "--input",
        results.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
    ]);
    let csv_text = fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("m_over_n,noise_l1_over_m,trials,success_rate,median_rel_err"));
    assert_eq!(csv_text.lines().count(), 3, "two cells plus header");
    let svg_text = fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg") && svg_text.contains("polyline"));

    // tampered aggregates must be rejected
    let tampered = dir.path().join("tampered.txt");
    fs::write(
        &tampered,
        fs::read_to_string(&results)
            .unwrap()
            .replace("success_rate=", "success_rate=0.5"),
    )
    .unwrap();
    let out = bin()
        .args([
            "report",
            "--input",
            tampered.to_str().unwrap(),
            "--csv",
            dir.path().join("bad.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("disagree"));
}

#[test]
fn malformed_inputs_give_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("sample.bin");
    run_ok(&[
        "generate",
        "--ensemble",
        "gaussian",
        "--n",
        "6",
        "--m",
        "24",
        "--seed",
        "1",
        "--x0",
        "flat:0.5",
        "--out",
        sample.to_str().unwrap(),
    ]);

    // truncation: error must carry a byte offset
    let mut bytes = fs::read(&sample).unwrap();
    bytes.truncate(bytes.len() - 5);
    let broken = dir.path().join("broken.bin");
    fs::write(&broken, &bytes).unwrap();
    let out = bin()
        .args(["solve", "--input", broken.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte"));

    // version stamp mismatch is rejected explicitly
    let mut versioned = fs::read(&sample).unwrap();
    versioned[4] = 9;
    let stale = dir.path().join("stale.bin");
    fs::write(&stale, &versioned).unwrap();
    let out = bin()
        .args(["solve", "--input", stale.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));

    // bad ensemble parameter
    let out = bin()
        .args([
            "generate",
            "--ensemble",
            "erasure:1.5",
            "--n",
            "4",
            "--m",
            "8",
            "--seed",
            "0",
            "--out",
            dir.path().join("x.bin").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn out_dir_env_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("PHASERET_OUT_DIR", dir.path())
        .args([
            "generate",
            "--ensemble",
            "rademacher",
            "--n",
            "4",
            "--m",
            "8",
            "--seed",
            "1",
            "--x0",
            "peaky:0",
            "--out",
            "relative.bin",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("relative.bin").exists());
}

#[test]
fn thread_env_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.txt");
    let multi = dir.path().join("multi.txt");
    for (threads, path) in [("1", &single), ("2", &multi)] {
        let out = bin()
            .env("PHASERET_THREADS", threads)
            .args([
                "sweep",
                "--spec",
                data_path("golden.cfg").to_str().unwrap(),
                "--out",
                path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let strip = |text: String| {
        text.lines()
            .filter(|l| !l.starts_with("meta"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        strip(fs::read_to_string(&single).unwrap()),
        strip(fs::read_to_string(&multi).unwrap())
    );
}
