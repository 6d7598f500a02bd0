use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dicke(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dicke"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DICKE_THREADS")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column(path: &Path, column: usize) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(column).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn statistics_peaks_and_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let run = dicke(out, &["statistics", "-N", "20", "-C", "3"]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let text = std::fs::read_to_string(out.join("statistics.csv")).unwrap();
    assert!(text.starts_with("n,P_n\n"));
    assert!(!text.contains('\r'));
    let total: f64 = csv_column(&out.join("statistics.csv"), 1).iter().sum();
    assert!((total - 1.0).abs() < 1e-10);
    let peaks = read_json(&out.join("statistics_peaks.json"));
    let ns: Vec<u64> = peaks["peaks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["n"].as_u64().unwrap())
        .collect();
    assert_eq!(ns, vec![0, 9, 36, 81, 144, 225, 324, 441, 576, 729, 900]);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "statistics");
    assert_eq!(manifest["parameters"]["N_a"], 20);
    assert!(manifest["seed"].is_null());
    assert_eq!(manifest["output_paths"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_strength_statistics_is_a_delta() {
    let dir = tempfile::tempdir().unwrap();
    let run = dicke(
        dir.path(),
        &["statistics", "-N", "20", "-C", "0", "--format", "json"],
    );
    assert!(run.status.success());
    let rows = read_json(&dir.path().join("statistics.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows[0]["n"], 0);
    assert!((rows[0]["P_n"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    assert!(rows[1..].iter().all(|r| r["P_n"].as_f64().unwrap() == 0.0));
}

#[test]
fn collapse_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(dicke(
        &out.join("null"),
        &["collapse", "-N", "20", "-C", "3", "--n-m", "0"]
    )
    .status
    .success());
    let summary = read_json(&out.join("null/collapse_summary.json"));
    assert!(summary["var_Sz"].as_f64().unwrap() < 5.0);

    assert!(dicke(
        &out.join("one"),
        &["collapse", "-N", "20", "-C", "3", "--n-m", "1"]
    )
    .status
    .success());
    let p = csv_column(&out.join("one/collapse.csv"), 1);
    assert_eq!(p[10], 0.0);
    let summary = read_json(&out.join("one/collapse_summary.json"));
    assert_eq!(summary["lattice_peaks"].as_array().unwrap().len(), 2);

    assert!(dicke(
        &out.join("cat"),
        &["collapse", "-N", "20", "-C", "3", "--n-m", "30"]
    )
    .status
    .success());
    let summary = read_json(&out.join("cat/collapse_summary.json"));
    assert_eq!(summary["lattice_peaks"], serde_json::json!([-2.0, 2.0]));

    let lossy = dicke(
        &out.join("lossy"),
        &[
            "collapse", "-N", "20", "-C", "1", "--n-m", "3", "--mu", "0.85",
        ],
    );
    assert!(lossy.status.success());
    let summary = read_json(&out.join("lossy/collapse_summary.json"));
    let coherence = summary["coherence"].as_f64().unwrap();
    assert!(coherence > 0.0 && coherence < 1.0);
}

#[test]
fn impossible_outcome_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let run = dicke(
        dir.path(),
        &["collapse", "-N", "20", "-C", "0", "--n-m", "1"],
    );
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("conditioning"));
}

#[test]
fn trajectory_second_pulse_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let run = dicke(
        out,
        &[
            "trajectory",
            "-N",
            "20",
            "--pulses",
            r#"[{"C":3,"force_n":30},{"C":3}]"#,
            "--emit-dists",
            "--seed",
            "11",
        ],
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let p = csv_column(&out.join("dist_pulse_1.csv"), 1);
    let argmax = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    assert!(argmax == 35 || argmax == 36);
    assert!((p[35] / p[36] - 1.0).abs() < 1e-6);
    let mass: f64 = p[6..=96].iter().sum();
    assert!(mass > 0.99);
    let lines = std::fs::read_to_string(out.join("trajectory.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);
    assert!(lines.starts_with(r#"{"seed":11,"pulse_index":0,"C":3.0,"mu":1.0,"n_m":30,"#));
}

#[test]
fn trajectory_rerun_is_byte_identical_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let pulses = r#"[{"C":1.0},{"C":1.0,"mu":0.8},{"C":0.5}]"#;
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(dicke(
        &a,
        &[
            "trajectory",
            "-N",
            "20",
            "--pulses",
            pulses,
            "--seed",
            "4242"
        ]
    )
    .status
    .success());
    assert!(dicke(
        &b,
        &[
            "trajectory",
            "-N",
            "20",
            "--pulses",
            pulses,
            "--seed",
            "4242"
        ]
    )
    .status
    .success());
    let ja = std::fs::read(a.join("trajectory.jsonl")).unwrap();
    assert_eq!(ja, std::fs::read(b.join("trajectory.jsonl")).unwrap());

    let c = dir.path().join("c");
    let manifest = a.join("manifest.json");
    let replay = dicke(&c, &["replay", manifest.to_str().unwrap(), "--check"]);
    assert!(
        replay.status.success(),
        "{}",
        String::from_utf8_lossy(&replay.stderr)
    );
    assert_eq!(ja, std::fs::read(c.join("trajectory.jsonl")).unwrap());
}

#[test]
fn unseeded_trajectory_records_its_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert!(dicke(
        &a,
        &["trajectory", "-N", "10", "--pulses", r#"[{"C":1},{"C":1}]"#]
    )
    .status
    .success());
    let seed = read_json(&a.join("manifest.json"))["seed"]
        .as_u64()
        .unwrap();
    let b = dir.path().join("b");
    let pulses = r#"[{"C":1},{"C":1}]"#;
    assert!(dicke(
        &b,
        &[
            "trajectory",
            "-N",
            "10",
            "--pulses",
            pulses,
            "--seed",
            &seed.to_string()
        ]
    )
    .status
    .success());
    assert_eq!(
        std::fs::read(a.join("trajectory.jsonl")).unwrap(),
        std::fs::read(b.join("trajectory.jsonl")).unwrap()
    );
}

#[test]
fn empty_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let run = dicke(dir.path(), &["trajectory", "-N", "20", "--pulses", "[]"]);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(
        std::fs::read(dir.path().join("trajectory.jsonl"))
            .unwrap()
            .len(),
        0
    );
}

#[test]
fn squeeze_scans() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let decay = dicke(
        &out.join("decay"),
        &[
            "squeeze-scan",
            "-N",
            "200",
            "--d-res",
            "100",
            "--c-min",
            "0.05",
            "--c-max",
            "2",
            "--c-step",
            "0.05",
        ],
    );
    assert!(decay.status.success());
    let s = read_json(&out.join("decay/squeeze_scan_summary.json"));
    assert!((s["decay"]["argmin_C"].as_f64().unwrap() - 0.5).abs() <= 0.05 + 1e-12);
    assert!((s["decay"]["min_xi"].as_f64().unwrap() / 0.3297 - 1.0).abs() < 0.02);

    let lossy = dicke(
        &out.join("lossy"),
        &[
            "squeeze-scan",
            "-N",
            "20",
            "--mu",
            "0.85",
            "--c-min",
            "0.25",
            "--c-max",
            "5",
            "--c-step",
            "0.25",
            "--gnuplot",
        ],
    );
    assert!(lossy.status.success());
    let s = read_json(&out.join("lossy/squeeze_scan_summary.json"));
    let c = s["inefficient"]["argmin_C"].as_f64().unwrap();
    assert!((1.5..=3.0).contains(&c));
    assert!(out.join("lossy/squeeze_scan.gp").exists());

    let perfect = dicke(
        &out.join("perfect"),
        &[
            "squeeze-scan",
            "-N",
            "20",
            "--mu",
            "1",
            "--c-min",
            "0.25",
            "--c-max",
            "5",
            "--c-step",
            "0.25",
        ],
    );
    assert!(perfect.status.success());
    let xi = csv_column(&out.join("perfect/squeeze_scan.csv"), 1);
    assert!(xi.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));

    let both = dicke(
        &out.join("both"),
        &[
            "squeeze-scan",
            "-N",
            "20",
            "--mu",
            "0.9",
            "--d-res",
            "50",
            "--c-min",
            "0.5",
            "--c-max",
            "1",
            "--c-step",
            "0.5",
        ],
    );
    assert!(both.status.success());
    let header = std::fs::read_to_string(out.join("both/squeeze_scan.csv")).unwrap();
    assert!(header.starts_with("C,xi_decay,xi_inefficient\n"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dicke(
        dir.path(),
        &[
            "squeeze-scan",
            "-N",
            "20",
            "--mu",
            "0.5",
            "--c-min",
            "1",
            "--c-max",
            "0",
            "--c-step",
            "0.1",
        ],
    );
    assert_eq!(empty.status.code(), Some(1));
    let neither = dicke(
        dir.path(),
        &[
            "squeeze-scan",
            "-N",
            "20",
            "--c-min",
            "0.1",
            "--c-max",
            "1",
            "--c-step",
            "0.1",
        ],
    );
    assert_eq!(neither.status.code(), Some(1));
    let unknown = dicke(dir.path(), &["statistics", "--nope"]);
    assert_eq!(unknown.status.code(), Some(1));
    let pulses = dicke(
        dir.path(),
        &["trajectory", "-N", "4", "--pulses", "[{\"C\":1,\"x\":2}]"],
    );
    assert_eq!(pulses.status.code(), Some(1));
}

#[test]
fn physical_warnings_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let base = |n_ph: &str| {
        format!(
            r#"{{"gamma":1,"delta":100,"wavelength":1e-6,"area":1e-9,"length":1e-2,"density":1e16,"N_ph":{n_ph}}}"#
        )
    };
    let zero = dicke(
        &dir.path().join("zero"),
        &["physical", "--config-json", &base("0")],
    );
    assert!(zero.status.success());
    let v = read_json(&dir.path().join("zero/physical.json"));
    assert_eq!(v["derived"]["C"], 0.0);
    assert_eq!(v["derived"]["eta"], 0.0);

    // d_res/N_a = 1e-3, (gamma/Delta)^2 = 1e-4: eta = 1e-7 N_ph
    let safe = dicke(
        &dir.path().join("safe"),
        &["physical", "--config-json", &base("9.9e6")],
    );
    assert!(safe.status.success());
    let v = read_json(&dir.path().join("safe/physical.json"));
    assert!((v["derived"]["eta"].as_f64().unwrap() - 0.99).abs() < 1e-9);
    assert!(v["derived"]["C"].as_f64().unwrap() <= v["derived"]["C_bound"].as_f64().unwrap());
    assert!(!String::from_utf8_lossy(&safe.stderr).contains("photon loss"));

    let lossy = dicke(
        &dir.path().join("lossy"),
        &["physical", "--config-json", &base("2e7")],
    );
    assert!(lossy.status.success());
    assert!(String::from_utf8_lossy(&lossy.stderr).contains("photon loss per atom exceeds 1"));

    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, r#"{"gamma":1,"delta":100,"wavelength":1e-6,"area":1e-9,"length":1e-2,"densty":1e16,"N_ph":1}"#).unwrap();
    let bad = dicke(
        &dir.path().join("bad"),
        &["physical", "--config", config_path.to_str().unwrap()],
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("densty"));
}

#[test]
fn replay_reproduces_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["statistics", "-N", "12", "-C", "1.5"],
        &[
            "collapse", "-N", "12", "-C", "1.5", "--n-m", "4", "--mu", "0.7",
        ],
        &[
            "squeeze-scan",
            "-N",
            "12",
            "--mu",
            "0.8",
            "--d-res",
            "40",
            "--c-min",
            "0.5",
            "--c-max",
            "2",
            "--c-step",
            "0.5",
        ],
        &[
            "physical",
            "--config-json",
            r#"{"gamma":1,"delta":100,"wavelength":1e-6,"area":1e-9,"length":1e-2,"density":1e16,"N_ph":5}"#,
        ],
    ];
    for (k, args) in runs.iter().enumerate() {
        let first = dir.path().join(format!("run{k}"));
        assert!(dicke(&first, args).status.success());
        let again = dir.path().join(format!("replay{k}"));
        let manifest = first.join("manifest.json");
        let replay = dicke(&again, &["replay", manifest.to_str().unwrap(), "--check"]);
        assert!(
            replay.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&replay.stderr)
        );
    }
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let run = dicke(&blocker.join("sub"), &["statistics", "-N", "4", "-C", "1"]);
    assert_ne!(run.status.code(), Some(0));
}
