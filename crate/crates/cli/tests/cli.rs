use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use cmient_core::dpi::CmiMiWitnesses;
use cmient_core::ef::OptReport;
use cmient_core::quantum::DensityMatrix;
use serde_json::Value;

const LN2: f64 = std::f64::consts::LN_2;

fn cmient(args: &[&str], stdin: Option<&str>) -> Output {
    cmient_env(args, stdin, None)
}

fn cmient_env(args: &[&str], stdin: Option<&str>, out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cmient"));
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .env_remove(cmient_cli::OUTPUT_DIR_ENV);
    if let Some(d) = out_dir {
        cmd.env(cmient_cli::OUTPUT_DIR_ENV, d);
    }
    let mut child = cmd.spawn().expect("binary runs");
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(s) = stdin {
            pipe.write_all(s.as_bytes()).unwrap();
        }
    }
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value_of(o: &Output) -> f64 {
    let v: Value = serde_json::from_str(&stdout(o)).unwrap();
    v["value"].as_f64().unwrap()
}

fn generated(args: &[&str]) -> String {
    let o = cmient(args, None);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

#[test]
fn common_cause_net_has_zero_cmi() {
    let net = generated(&["gen", "fig1", "--seed", "4", "--cards", "3,2,4"]);
    let o = cmient(&["info", "--cmi", "a", "b", "alpha"], Some(&net));
    assert_eq!(o.status.code(), Some(0));
    assert!(value_of(&o).abs() <= 1e-12);
}

#[test]
fn product_pmf_has_zero_mi_and_xor_has_ln2_cmi() {
    let product =
        r#"{"axes":[{"name":"a","size":2},{"name":"b","size":2}],"probs":[0.12,0.28,0.18,0.42]}"#;
    let o = cmient(&["info", "--mi", "a", "b"], Some(product));
    assert!(value_of(&o).abs() <= 1e-12);
    let xor = r#"{"axes":[{"name":"a","size":2},{"name":"b","size":2},{"name":"l","size":2}],
                  "probs":[0.25,0,0,0.25,0,0.25,0.25,0]}"#;
    let o = cmient(&["info", "--cmi", "a", "b", "l"], Some(xor));
    assert!((value_of(&o) - LN2).abs() <= 1e-12);
    let o = cmient(&["info", "--entropy", "a,b,l"], Some(xor));
    assert!((value_of(&o) - 2.0 * LN2).abs() <= 1e-12);
}

#[test]
fn quantum_information_of_bell_state() {
    let bell = generated(&["gen", "bell"]);
    let o = cmient(&["info", "--qmi", "a", "b"], Some(&bell));
    assert!((value_of(&o) - 2.0 * LN2).abs() <= 1e-10);
    let o = cmient(&["info", "--vn-entropy", "a"], Some(&bell));
    assert!((value_of(&o) - LN2).abs() <= 1e-10);
    let o = cmient(&["info", "--vn-entropy", "a,b"], Some(&bell));
    assert!(value_of(&o).abs() <= 1e-10);
}

#[test]
fn relative_entropy_reads_second_file() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.json");
    std::fs::write(&q, r#"{"axes":[{"name":"x","size":2}],"probs":[0.5,0.5]}"#).unwrap();
    let p = r#"{"axes":[{"name":"x","size":2}],"probs":[1.0,0.0]}"#;
    let o = cmient(&["info", "--relent", q.to_str().unwrap()], Some(p));
    assert!((value_of(&o) - LN2).abs() <= 1e-12);
}

#[test]
fn exit_codes_follow_the_contract() {
    assert_eq!(
        cmient(&["info", "--mi", "a", "b"], Some("{")).status.code(),
        Some(2)
    );
    assert_eq!(
        cmient(&["info", "--mi", "a", "b"], Some(r#"{"probs":[1]}"#))
            .status
            .code(),
        Some(2)
    );
    let bad = r#"{"axes":[{"name":"a","size":2}],"probs":[0.5,0.6]}"#;
    let o = cmient(&["info", "--entropy", "a"], Some(bad));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("normalization"));
    let not_psd =
        r#"{"subsystems":[{"name":"a","dim":2}],"re":[[1.5,0],[0,-0.5]],"im":[[0,0],[0,0]]}"#;
    assert_eq!(
        cmient(&["info", "--vn-entropy", "a"], Some(not_psd))
            .status
            .code(),
        Some(3)
    );
    assert_eq!(cmient(&["check", "nonsense"], None).status.code(), Some(2));
    assert_eq!(cmient(&["info"], None).status.code(), Some(2));
    assert_eq!(cmient(&["frobnicate"], None).status.code(), Some(2));
    let bell = generated(&["gen", "bell"]);
    assert_eq!(cmient(&["ef"], Some(&bell)).status.code(), Some(4));
    assert_eq!(
        cmient(&["ef", "--family", "k2", "--n-alpha", "0"], Some(&bell))
            .status
            .code(),
        Some(4)
    );
    let net = generated(&["gen", "fig2"]);
    assert_eq!(cmient(&["ed"], Some(&net)).status.code(), Some(4));
    assert_eq!(
        cmient(
            &["check", "fig3-ids", "--slack", "1e-300", "--trials", "50"],
            None
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(cmient(&["--help"], None).status.code(), Some(0));
}

#[test]
fn formation_anchors() {
    let bell = generated(&["gen", "bell"]);
    let o = cmient(&["ef", "--family", "k2"], Some(&bell));
    let r: OptReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((r.best_value - 2.0 * LN2).abs() <= 1e-3);
    assert_eq!(r.seed, 0);

    let product = generated(&["gen", "product", "--seed", "5"]);
    let o = cmient(&["ef", "--family", "k2", "--n-alpha", "4"], Some(&product));
    let r: OptReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r.best_value <= 1e-6);

    let bits = generated(&["gen", "pmf", "--seed", "9", "--cards", "2,2"]);
    let o = cmient(&["ef", "--n-alpha", "4"], Some(&bits));
    let r: OptReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r.best_value <= 1e-6);
}

#[test]
fn distillation_from_net_and_from_source_files_agree() {
    let dir = tempfile::tempdir().unwrap();
    let net = generated(&["gen", "fig2", "--seed", "2"]);
    let net_path = dir.path().join("net.json");
    std::fs::write(&net_path, &net).unwrap();
    let o = cmient(
        &[
            "ed",
            net_path.to_str().unwrap(),
            "--n-lambda",
            "1",
            "--restarts",
            "1",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let from_net: OptReport = serde_json::from_str(&stdout(&o)).unwrap();

    let spec: cmient_core::bayes::Fig2Spec = serde_json::from_str(&net).unwrap();
    let paths: Vec<String> = [spec.x(), spec.x_prime()]
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = dir.path().join(format!("src{i}.json"));
            std::fs::write(&p, serde_json::to_string(s).unwrap()).unwrap();
            p.to_str().unwrap().to_string()
        })
        .collect();
    let o = cmient(
        &[
            "ed",
            &paths[0],
            &paths[1],
            "--n-lambda",
            "1",
            "--restarts",
            "1",
        ],
        None,
    );
    let from_sources: OptReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        from_net.best_value.to_bits(),
        from_sources.best_value.to_bits()
    );
    assert!(from_net.best_value >= 0.0);
}

#[test]
fn sweeps_pass_and_witnesses_are_reported() {
    let o = cmient(
        &["check", "dpi-re", "--trials", "1000", "--seed", "7"],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["evaluated"], 1000);
    assert!(r["violations"].as_array().unwrap().is_empty());

    let o = cmient(&["check", "cmi-vs-mi"], None);
    assert_eq!(o.status.code(), Some(0));
    let w: CmiMiWitnesses = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((w.greater.difference - LN2).abs() <= 1e-12);
    assert!((w.smaller.difference + LN2).abs() <= 1e-12);
}

#[test]
fn reruns_are_byte_identical() {
    for args in [
        &["check", "dpi-cmi", "--trials", "200", "--seed", "11"][..],
        &["check", "ed-le-ef", "--trials", "5", "--seed", "3"][..],
        &["gen", "fig2", "--seed", "8", "--comm-arrow"][..],
        &[
            "ef",
            "--family",
            "k1",
            "--n-alpha",
            "2",
            "--restarts",
            "2",
            "--iterations",
            "100",
        ][..],
    ] {
        let input = generated(&["gen", "density", "--seed", "6", "--rank", "2"]);
        let a = cmient(args, Some(&input));
        let b = cmient(args, Some(&input));
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn documents_round_trip_through_the_formatter() {
    let text = generated(&["gen", "density", "--seed", "12", "--cards", "2,3"]);
    let rho: DensityMatrix = serde_json::from_str(&text).unwrap();
    assert_eq!(cmient_cli::output::to_json(&rho).unwrap(), text);
    let text = generated(&["gen", "fig2", "--seed", "12", "--cards", "3,2,2,3"]);
    let spec: cmient_core::bayes::Fig2Spec = serde_json::from_str(&text).unwrap();
    assert_eq!(cmient_cli::output::to_json(&spec).unwrap(), text);
}

#[test]
fn relative_output_paths_use_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmient_env(
        &["gen", "pmf", "--output", "sub/p.json"],
        None,
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(dir.path().join("sub/p.json")).unwrap();
    assert!(written.contains("\"probs\""));
}

#[test]
fn csv_and_human_formats() {
    let xor = r#"{"axes":[{"name":"a","size":2},{"name":"b","size":2},{"name":"l","size":2}],
                  "probs":[0.25,0,0,0.25,0,0.25,0.25,0]}"#;
    let o = cmient(
        &["--format", "human", "info", "--cmi", "a", "b", "l"],
        Some(xor),
    );
    assert!(stdout(&o).contains("value: 0.693147 nats (1.000000 bits)"));
    let o = cmient(
        &["info", "--cmi", "a", "b", "l", "--format", "csv"],
        Some(xor),
    );
    let s = stdout(&o);
    assert!(s.starts_with("field,value\n"));
    assert!(s.contains("value,6.9314718055994529e-1") || s.contains("value,6.9314718055994518e-1"));
}
