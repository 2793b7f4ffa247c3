use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use cloud_ksvd::mnist::{encode_idx_images, encode_idx_labels};
use cloud_ksvd::rng::gaussian_vector;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloud-ksvd"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str], out: &Path) {
    let output = run(args, out);
    assert!(
        output.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn records(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .expect("csv exists")
        .records()
        .collect::<Result<_, _>>()
        .expect("well-formed csv")
}

#[test]
fn manifest_row_counts_match_files() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["dpm-floor", "--seed", "3", "--runs", "2"], dir.path());
    let manifest: toml::Table = std::fs::read_to_string(dir.path().join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let name = f["name"].as_str().unwrap();
        let rows = f["rows"].as_integer().unwrap() as usize;
        assert_eq!(records(&dir.path().join(name)).len(), rows, "{name}");
    }
    assert_eq!(manifest["scenario"].as_str(), Some("dpm-floor"));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "online",
        "--seed",
        "9",
        "--periods",
        "3",
        "--batch",
        "40",
        "--buffer",
        "60",
        "--t-d",
        "4",
    ];
    run_ok(&args, a.path());
    run_ok(&args, b.path());
    let read = |d: &Path| std::fs::read(d.join("curves.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn online_buffer_never_exceeds_its_limit() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "online",
            "--seed",
            "2",
            "--periods",
            "4",
            "--batch",
            "50",
            "--buffer",
            "120",
            "--t-d",
            "3",
        ],
        dir.path(),
    );
    let sizes: Vec<f64> = records(&dir.path().join("curves.csv"))
        .iter()
        .filter(|r| &r[4] == "buffer_size")
        .map(|r| r[5].parse().unwrap())
        .collect();
    assert_eq!(sizes, vec![50.0, 100.0, 120.0, 120.0]);
}

#[test]
fn dpm_plateaus_fall_with_consensus_rounds() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["dpm-floor", "--seed", "1", "--runs", "3"], dir.path());
    let mut per_run: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for r in records(&dir.path().join("plateaus.csv")) {
        let tc: usize = r[2].trim_start_matches("tc=").parse().unwrap();
        per_run
            .entry(r[0].to_owned())
            .or_default()
            .push((tc, r[5].parse().unwrap()));
    }
    assert_eq!(per_run.len(), 3);
    for (run, mut plateaus) in per_run {
        plateaus.sort_by_key(|p| p.0);
        assert!(
            plateaus.windows(2).all(|w| w[1].1 < w[0].1),
            "run {run}: {plateaus:?}"
        );
    }
}

#[test]
fn invalid_configuration_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&["synth-compare", "--seed", "1", "--p", "1.5"], dir.path());
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("p = 1.5"));

    let output = run(&["synth-compare"], dir.path());
    assert!(!output.status.success(), "seed is mandatory");
    assert!(!dir.path().join("manifest.toml").exists());
}

#[test]
fn config_file_is_layered_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        "scenario = \"dpm-floor\"\nseed = 4\nruns = 1\ntc_values = [2, 6]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(
        &["run", "--config", config.to_str().unwrap(), "--t-p", "7"],
        &out,
    );
    let rows = records(&out.join("eig_error.csv"));
    assert_eq!(rows.len(), 2 * 7);
    assert!(rows.iter().all(|r| &r[0] == "4"));
}

#[test]
fn single_class_mnist_is_always_detected() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    let images: Vec<Vec<f64>> = (0..30)
        .map(|_| {
            gaussian_vector(&mut rng, 784)
                .into_iter()
                .map(|v| v.abs().min(1.0))
                .collect()
        })
        .collect();
    std::fs::write(
        dir.path().join("images-idx3-ubyte"),
        encode_idx_images(28, 28, &images),
    )
    .unwrap();
    std::fs::write(
        dir.path().join("labels-idx1-ubyte"),
        encode_idx_labels(&[7; 30]),
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(
        &[
            "mnist",
            "--seed",
            "1",
            "--digits",
            "7",
            "--train-per-class",
            "20",
            "--test-per-class",
            "10",
            "-K",
            "8",
            "--t0",
            "2",
            "--t-d",
            "2",
            "--mnist-dir",
            dir.path().to_str().unwrap(),
        ],
        &out,
    );
    let rows = records(&out.join("detection.csv"));
    assert_eq!(rows.len(), 4 + 2 * 2);
    assert!(rows.iter().all(|r| &r[5] == "1"), "{rows:?}");
}

#[test]
fn missing_mnist_data_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(
        &[
            "mnist",
            "--seed",
            "1",
            "--mnist-dir",
            dir.path().join("absent").to_str().unwrap(),
        ],
        &dir.path().join("out"),
    );
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("absent"));
}
