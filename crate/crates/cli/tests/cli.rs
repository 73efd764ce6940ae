use std::io::Write;
use std::process::{Command, Output, Stdio};

use gmac_core::bounds::{sum_rate_upper_bound, BoundInputs};
use gmac_core::regions::{PowerVector, SubsetSpec};
use gmac_core::report::to_json_string;

fn gmac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmac")).args(args).output().unwrap()
}

fn gmac_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gmac"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn result_json(o: &Output) -> serde_json::Value {
    let doc: serde_json::Value = serde_json::from_str(&stdout(o)).unwrap();
    assert!(doc["manifest"]["version"].is_string());
    doc["result"].clone()
}

#[test]
fn region_lists_every_subset() {
    let o = gmac(&["region", "--powers", "1,1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest {"));
    assert_eq!(lines.next(), Some("subset_bitmask,bound_bits"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows, ["1,0.5", "2,0.5", "3,0.792481250360578"]);
}

#[test]
fn region_membership_sets_exit_status() {
    let inside = gmac(&["region", "--powers", "1,1", "--rates", "0.3,0.3"]);
    assert_eq!(inside.status.code(), Some(0));
    assert_eq!(result_json(&inside)["inside"], true);
    let outside = gmac(&["region", "--powers", "1,1", "--rates", "0.6,0.1"]);
    assert_eq!(outside.status.code(), Some(1));
    let r = result_json(&outside);
    assert_eq!(r["inside"], false);
    assert_eq!(r["violated_subset"], serde_json::json!([1]));
}

#[test]
fn bound_output_is_the_library_report() {
    let o = gmac(&["bound", "--n", "1000000", "--epsilon", "0", "--powers", "1,1", "--subset", "1,2"]);
    assert_eq!(o.status.code(), Some(0));
    let powers = PowerVector::new(vec![1.0, 1.0]).unwrap();
    let subset = SubsetSpec::from_labels(&[1, 2], 2).unwrap();
    let report = sum_rate_upper_bound(&BoundInputs::new(1_000_000, 0.0, powers, subset).unwrap()).unwrap();
    let expected = format!("\"result\":{}}}", to_json_string(&report).unwrap());
    assert!(stdout(&o).trim_end().ends_with(&expected), "{}", stdout(&o));
}

#[test]
fn exit_codes() {
    assert_eq!(gmac(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gmac(&["bound", "--n", "10", "--epsilon", "0", "--powers", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(gmac(&[]).status.code(), Some(2));
    let domain = gmac(&["bound", "--n", "10", "--epsilon", "1.5", "--powers", "1,1"]);
    assert_eq!(domain.status.code(), Some(1));
    assert!(!domain.stderr.is_empty());
    assert_eq!(gmac_stdin(&["bht"], "{\"p\": [0.5").status.code(), Some(2));
    assert_eq!(gmac_stdin(&["bht"], "{\"p\":[0.5,0.5],\"q\":[1.0],\"delta\":0.5}").status.code(), Some(1));
    let v = gmac(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).starts_with("gmac "));
}

#[test]
fn bht_document() {
    let o = gmac_stdin(&["bht"], r#"{"p":[0.5,0.5],"q":[0.9,0.1],"delta":0.5}"#);
    assert_eq!(o.status.code(), Some(0));
    let r = result_json(&o);
    assert!((r["beta"].as_f64().unwrap() - 0.1).abs() < 1e-15);
    assert_eq!(r["test"], serde_json::json!([0.0, 1.0]));
}

#[test]
fn expurgate_document_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.json");
    std::fs::write(
        &path,
        r#"{"M":[2,2],"epsilon":0.2,"errors":[0.0,0.1,0.3,0.4],"subset":[1]}"#,
    )
    .unwrap();
    let o = gmac(&["expurgate", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = result_json(&o);
    assert_eq!(r["result"]["subset"], serde_json::json!([1]));
    assert!(r["check"].is_object());
}

#[test]
fn wring_document() {
    let doc = r#"{"n":2,"alphabet":2,"p":[[[0,0],0.5],[[1,1],0.5]],"u":[[[0,0],0.25],[[0,1],0.25],[[1,0],0.25],[[1,1],0.25]],"c":2.0,"delta":0.5,"lambda":0.1}"#;
    let o = gmac_stdin(&["wring"], doc);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = result_json(&o);
    assert!(r["result"]["coordinates"].is_array());
    assert!(r["check"].is_object());
}

#[test]
fn simulate_codebook_round_trip_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let book = dir.path().join("book.bin");
    let book = book.to_str().unwrap();
    let base = ["simulate", "--n", "6", "--powers", "1,1", "--sizes", "4,3", "--trials", "400", "--seed", "5"];
    let mut saving = base.to_vec();
    saving.extend(["--save-codebook", book, "--threads", "1"]);
    let first = result_json(&gmac(&saving));
    let bytes = std::fs::read(book).unwrap();
    assert_eq!(&bytes[..5], b"MACB1");
    let mut loading = base.to_vec();
    loading.extend(["--load-codebook", book, "--threads", "3"]);
    assert_eq!(result_json(&gmac(&loading)), first);
    assert_eq!(first["trials"], 400);

    let csv = gmac(&["simulate", "--n", "4", "--powers", "1", "--rates", "0.5", "--trials", "50", "--out", "csv"]);
    let text = stdout(&csv);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "n,Mi,trials,errors,error,ci_lo,ci_hi,seed");
    assert!(lines[2].starts_with("4,4,50,"));
}

#[test]
fn scan_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let o = gmac(&[
        "scan", "--powers", "1,1", "--multipliers", "0,1", "--n-list", "4,6", "--trials", "100", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# manifest "));
    assert_eq!(lines[1], "multiplier,n,Mi,error,ci_lo,ci_hi");
    assert_eq!(lines.len(), 6);
    assert!(lines[2].starts_with("0,4,1;1,0,"));
    let oversized = gmac(&["scan", "--powers", "1,1", "--multipliers", "2", "--n-list", "60", "--trials", "1"]);
    assert_eq!(oversized.status.code(), Some(1));
}

#[test]
fn ic_simulate_reports_both_codes() {
    let o = gmac(&[
        "ic-simulate", "--n", "3", "--powers", "1,2", "--gains", "1.5,-1.2", "--sizes", "3,3", "--trials", "500",
        "--anchor-trials", "50", "--ks-samples", "2000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = result_json(&o);
    assert_eq!(r["report"]["plain"].as_array().unwrap().len(), 2);
    assert!(r["identity_test"]["p_value"].is_number());
    let weak = gmac(&["ic-simulate", "--n", "3", "--powers", "1,1", "--gains", "0.5,2", "--sizes", "2,2"]);
    assert_eq!(weak.status.code(), Some(1));
}

#[test]
fn bound_scan_grid() {
    let o = gmac(&["bound-scan", "--epsilon", "0.5", "--powers", "1,1", "--n-max", "100000"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "n,per_symbol_bound,second_order_gap");
    let ns: Vec<&str> = lines[2..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ns, ["1000", "10000", "100000"]);
}
