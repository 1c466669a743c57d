use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gplsi_cli::manifest::RunManifest;
use gplsi_cli::{EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK};

fn gplsi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gplsi"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn generate(cwd: &Path, out: &str, n: &str, doc_length: &str, seed: &str) {
    let o = gplsi(
        &["generate", "--n", n, "--p", "15", "--K", "3", "--N", doc_length, "--n-grp", "12", "--seed", seed, "--out", out],
        cwd,
    );
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_and_fit_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "a", "100", "80", "3");
    generate(d, "b", "100", "80", "3");
    for f in ["counts.mtx", "graph.txt", "W.csv", "A.csv", "truth.json"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    for out in ["m1", "m2"] {
        let o = gplsi(
            &["fit", "--method", "gplsi", "--counts", "a/counts.mtx", "--graph", "a/graph.txt", "--K", "3", "--out", out],
            d,
        );
        assert!(matches!(code(&o), EXIT_OK | EXIT_NONCONVERGED));
    }
    for f in ["W.csv", "A.csv", "U.csv", "V.csv", "trace.csv", "meta.json"] {
        assert_eq!(fs::read(d.join("m1").join(f)).unwrap(), fs::read(d.join("m2").join(f)).unwrap(), "{f}");
    }
    let m = RunManifest::read(&d.join("m1/manifest.json")).unwrap();
    assert_eq!(m.command, "fit");
    assert_eq!(m.outputs.len(), 6);
    assert!(m.stage_ms.contains_key("fit"));
    assert_eq!(code(&gplsi(&["verify", "--manifest", "m1/manifest.json"], d)), EXIT_OK);
    fs::write(d.join("m1/W.csv"), "tampered\n").unwrap();
    assert_eq!(code(&gplsi(&["verify", "--manifest", "m1/manifest.json"], d)), EXIT_INPUT);
}

#[test]
fn plsi_eval_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "data", "120", "500", "1");
    let o = gplsi(&["fit", "--method", "plsi", "--counts", "data/counts.mtx", "--K", "3", "--out", "model"], d);
    assert_eq!(code(&o), EXIT_OK);
    let o = gplsi(
        &["eval", "--model", "model", "--truth", "data", "--graph", "data/graph.txt", "--out", "out/report.json"],
        d,
    );
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("out/report.json")).unwrap()).unwrap();
    for key in ["w_l1", "w_l2", "a_l1", "a_l2", "sintheta_U", "sintheta_V", "morans_I", "pas"] {
        assert!(report[key].is_f64(), "{key}");
    }
    assert!(report["w_l2"].as_f64().unwrap() < 0.05);
    assert!(d.join("out/report.json.manifest.json").exists());
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "data", "40", "30", "0");
    // missing file
    let o = gplsi(&["fit", "--method", "plsi", "--counts", "nope.mtx", "--K", "2", "--out", "m"], d);
    assert_eq!(code(&o), EXIT_INPUT);
    // graph-based method without a graph
    let o = gplsi(&["fit", "--method", "gplsi", "--counts", "data/counts.mtx", "--K", "2", "--out", "m"], d);
    assert_eq!(code(&o), EXIT_INPUT);
    // K above the rank bound
    let o = gplsi(&["fit", "--method", "plsi", "--counts", "data/counts.mtx", "--K", "99", "--out", "m"], d);
    assert_eq!(code(&o), EXIT_INPUT);
    // descending penalty grid
    let o = gplsi(
        &["fit", "--method", "gplsi", "--counts", "data/counts.mtx", "--graph", "data/graph.txt", "--K", "2", "--rho-grid", "1,0.1", "--out", "m"],
        d,
    );
    assert_eq!(code(&o), EXIT_INPUT);
    // a document with no words
    fs::write(d.join("zero.csv"), "1,2\n0,0\n").unwrap();
    let o = gplsi(&["fit", "--method", "plsi", "--counts", "zero.csv", "--K", "1", "--out", "m"], d);
    assert_eq!(code(&o), EXIT_INPUT);
    // unknown grid field
    fs::write(d.join("grid.json"), r#"{"n":[40],"N":[30],"p":[10],"K":[2],"seeds":[0],"typo":1}"#).unwrap();
    let o = gplsi(&["benchmark", "--grid", "grid.json", "--out", "b.csv"], d);
    assert_eq!(code(&o), EXIT_INPUT);
}

#[test]
fn iteration_cap_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "data", "100", "10", "2");
    let o = gplsi(
        &["fit", "--method", "gplsi", "--counts", "data/counts.mtx", "--graph", "data/graph.txt", "--K", "3", "--t-max", "1", "--eps", "1e-300", "--out", "m"],
        d,
    );
    assert_eq!(code(&o), EXIT_NONCONVERGED);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("m/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["converged"], false);
    assert!(RunManifest::read(&d.join("m/manifest.json")).unwrap().nonconverged);
}

#[test]
fn benchmark_csv_has_contract_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("grid.json"),
        r#"{"n":[50],"N":[40],"p":[10],"K":[2],"methods":["plsi","onestep"],"seeds":[0,1],"n_grp":8}"#,
    )
    .unwrap();
    let o = gplsi(&["benchmark", "--grid", "grid.json", "--out", "b.csv"], d);
    assert!(matches!(code(&o), EXIT_OK | EXIT_NONCONVERGED));
    let csv = fs::read_to_string(d.join("b.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,seed,n,N,p,K,metric,value"));
    let rows: Vec<&str> = lines.collect();
    let w_rows = rows.iter().filter(|l| l.split(',').nth(6) == Some("w_l2")).count();
    assert_eq!(w_rows, 2 * 2);
    let m = RunManifest::read(&d.join("b.csv.manifest.json")).unwrap();
    assert_eq!(m.seeds, vec![0, 1]);
    assert!(m.stage_ms.keys().any(|k| k.starts_with("plsi/")));
}
