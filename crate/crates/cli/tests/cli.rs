use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use detsft::artifact::Artifact;
use detsft::formats;
use detsft::signal::write_signal;
use detsft_core::oracle::exact_idft;
use detsft_core::Complex64;
use tempfile::TempDir;

fn detsft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detsft"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Derandomized schedule for n=64, k=2, built once per test binary.
fn shared() -> &'static (TempDir, PathBuf) {
    static CELL: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s.txt");
        let out = detsft(&[
            "schedule",
            "build",
            "--n",
            "64",
            "--k",
            "2",
            "--mode",
            "derandomized",
            "-o",
            p(&s),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (dir, s)
    })
}

fn two_sparse_signal(dir: &Path, name: &str) -> PathBuf {
    let n = 64;
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    spec[5] = Complex64::new(1.0, 0.0);
    spec[40] = Complex64::new(-0.7, 0.2);
    for (f, v) in spec.iter_mut().enumerate() {
        *v += Complex64::new(
            1e-3 * ((f * 7 % 11) as f64 / 11.0),
            -1e-3 * ((f % 5) as f64 / 5.0),
        );
    }
    let path = dir.join(name);
    write_signal(&path, &exact_idft(&spec), None).unwrap();
    path
}

#[test]
fn subgroup_rows_for_13_and_6() {
    let out = detsft(&["forge", "subgroup", "--p", "13", "--order", "6"]);
    assert_eq!(code(&out), 0);
    let a = Artifact::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(formats::read_rows(&a).unwrap(), vec![1, 3, 4, 9, 10, 12]);
    assert!(a.get_f64("measured_incoherence").unwrap() <= a.get_f64("certified_bound").unwrap());
}

#[test]
fn built_schedule_verifies() {
    let (_, s) = shared();
    let a = Artifact::read(s).unwrap();
    assert_eq!(a.kind, "schedule");
    assert_eq!(a.get_u64("n").unwrap(), 64);
    assert!(a.get_f64("worst_sum").unwrap() <= a.get_f64("threshold").unwrap());
    let out = detsft(&["schedule", "verify", "--schedule", p(s)]);
    assert_eq!(code(&out), 0);
}

#[test]
fn recovery_meets_the_guarantee() {
    let (_, s) = shared();
    let dir = tempfile::tempdir().unwrap();
    for (name, fmt) in [("x.bin", None), ("x.csv", None), ("x.dat", Some("c128"))] {
        let x = two_sparse_signal(dir.path(), name);
        for pipeline in ["linear", "sublinear"] {
            let z = dir.path().join(format!("z_{pipeline}_{name}.txt"));
            let mut args = vec![
                "recover",
                "--pipeline",
                pipeline,
                "--schedule",
                p(s),
                "--signal",
                p(&x),
                "--k",
                "2",
                "--mu",
                "0.01",
                "--snr-bound",
                "1e4",
                "-o",
                p(&z),
            ];
            if let Some(f) = fmt {
                args.extend(["--format", f]);
            }
            let out = detsft(&args);
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
            let out = detsft(&[
                "verify",
                "guarantee",
                "--signal",
                p(&x),
                "--output",
                p(&z),
                "--k",
                "2",
            ]);
            assert_eq!(code(&out), 0, "{pipeline} {name}");
            let rep = Artifact::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
            assert_eq!(rep.header["pass"], true);
        }
    }
}

#[test]
fn wrong_approximation_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let x = two_sparse_signal(dir.path(), "x.bin");
    let mut a = Artifact::new(formats::APPROXIMATION);
    a.set("n", 64).set("entries", 1);
    a.body = vec!["6 1 0".into()];
    let z = dir.path().join("z.txt");
    a.write(&z).unwrap();
    let out = detsft(&[
        "verify",
        "guarantee",
        "--signal",
        p(&x),
        "--output",
        p(&z),
        "--k",
        "2",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sample_server_refuses_foreign_indices() {
    let (_, s) = shared();
    let dir = tempfile::tempdir().unwrap();
    let x = two_sparse_signal(dir.path(), "x.bin");
    let lin = dir.path().join("lin.txt");
    assert_eq!(
        code(&detsft(&["samples", "--schedule", p(s), "-o", p(&lin)])),
        0
    );

    let recover = |pipeline: &str| {
        detsft(&[
            "recover",
            "--pipeline",
            pipeline,
            "--schedule",
            p(s),
            "--signal",
            p(&x),
            "--k",
            "2",
            "--mu",
            "0.01",
            "--snr-bound",
            "1e4",
            "--samples",
            p(&lin),
        ])
    };
    // The linear pipeline stays inside its own set and matches a full read.
    let restricted = recover("linear");
    assert_eq!(code(&restricted), 0);
    let full = detsft(&[
        "recover",
        "--schedule",
        p(s),
        "--signal",
        p(&x),
        "--k",
        "2",
        "--mu",
        "0.01",
        "--snr-bound",
        "1e4",
    ]);
    let body = |o: &Output| {
        Artifact::parse(&String::from_utf8_lossy(&o.stdout))
            .unwrap()
            .body
    };
    assert_eq!(body(&restricted), body(&full));

    // The sublinear pipeline needs modulated reads the linear set lacks.
    let out = recover("sublinear");
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not in the permitted sample set"));
}

#[test]
fn tampered_artifacts_are_rejected() {
    let (_, s) = shared();
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(s).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let changed = lines[3].replacen(' ', "  ", 1);
    lines[3] = &changed;
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let out = detsft(&["schedule", "verify", "--schedule", p(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum mismatch"));
}

#[test]
fn reruns_are_byte_identical() {
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            detsft(&[
                "schedule",
                "build",
                "--n",
                "32",
                "--k",
                "1",
                "--mode",
                "sample-verify",
                "--seed",
                "4",
            ])
            .stdout
        })
        .collect();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
    for args in [
        &[
            "forge", "weyl", "--p", "101", "--degree", "2", "--rows", "20",
        ][..],
        &["forge", "subsample", "--n", "32", "--k", "1"][..],
        &[
            "filter",
            "export",
            "--n",
            "64",
            "--buckets",
            "8",
            "--domain",
            "time",
        ][..],
    ] {
        let a = detsft(args);
        assert_eq!(code(&a), 0, "{args:?}");
        assert_eq!(a.stdout, detsft(args).stdout, "{args:?}");
    }
}

#[test]
fn infeasible_requests_exit_one() {
    let out = detsft(&[
        "forge",
        "subsample",
        "--n",
        "64",
        "--k",
        "2",
        "--oversampling",
        "1",
    ]);
    assert_eq!(code(&out), 1);
    let out = detsft(&["schedule", "build", "--n", "16", "--k", "1", "--d", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&detsft(&["bogus"])), 2);
    assert_eq!(code(&detsft(&["schedule", "build", "--n", "64"])), 2);
    assert_eq!(
        code(&detsft(&["schedule", "build", "--n", "63", "--k", "1"])),
        2
    );
    assert_eq!(
        code(&detsft(&["forge", "subgroup", "--p", "7", "--order", "2"])),
        2
    );
}
