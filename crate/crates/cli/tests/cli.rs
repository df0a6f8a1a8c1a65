use std::path::Path;
use std::process::{Command, Output};

fn custmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_custmix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, months: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let log = dir.join("log.csv");
    let flags = dir.join("flags.csv");
    let out = custmix(&[
        "generate",
        "--out",
        path(&log),
        "--flags-out",
        path(&flags),
        "--months",
        months,
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (log, flags)
}

#[test]
fn simulate_scenario_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = custmix(&["simulate", "--scenario", "ii", "--nu", "200", "--seed", "7", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("scenarios.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("ii,Benchmark scenario,40.0000,0.0000,40.0000,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary[0]["M"], 40.0);
    assert_eq!(summary[0]["nu"], 200);
    assert_eq!(summary[0]["seed"], 7);
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = custmix(&["simulate", "--scenario", "vii", "--nu", "50", "--out", path(d.path())]);
        assert!(out.status.success());
    }
    for f in ["scenarios.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sweep_table_has_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = custmix(&[
        "simulate",
        "--sweep",
        "a0",
        "--grid",
        "100,1000,10000",
        "--nu",
        "20",
        "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep_a0.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains(",mle,")).count(), 3);
    assert_eq!(text.lines().filter(|l| l.contains(",naive,")).count(), 3);
}

#[test]
fn estimate_and_cluster_only_on_synthetic_log() {
    let dir = tempfile::tempdir().unwrap();
    let (log, _) = generate(dir.path(), "1");
    let run = |out: &Path| {
        custmix(&[
            "estimate",
            "--input",
            path(&log),
            "--n-baskets",
            "4",
            "--m-segments",
            "3",
            "--out",
            path(out),
        ])
    };
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    for d in [&first, &second] {
        let out = run(d);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        std::fs::read(first.join("segments.csv")).unwrap(),
        std::fs::read(second.join("segments.csv")).unwrap()
    );
    let report = |d: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap()
    };
    assert_eq!(report(&first)["reports"], report(&second)["reports"]);
    let segments = std::fs::read_to_string(first.join("segments.csv")).unwrap();
    assert_eq!(segments.lines().count(), 4);

    let clusters = dir.path().join("clusters");
    let out = custmix(&[
        "cluster-only",
        "--input",
        path(&log),
        "--n-baskets",
        "4",
        "--m-segments",
        "3",
        "--out",
        path(&clusters),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(clusters.join("clusters.json")).unwrap()).unwrap();
    assert_eq!(summary[0]["n_baskets"], 4);
    assert_eq!(summary[0]["m_segments"], 3);
}

#[test]
fn validate_writes_period_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (log, flags) = generate(dir.path(), "3");
    let out_dir = dir.path().join("val");
    let out = custmix(&[
        "validate",
        "--input",
        path(&log),
        "--flags",
        path(&flags),
        "--periods",
        "month,quarter",
        "--n-baskets",
        "4",
        "--m-segments",
        "3",
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("validation_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "period,obs,naive_M,naive_SD,naive_WC,proposed_M,proposed_SD,proposed_WC");
    assert!(lines[1].starts_with("month,3,"));
    assert!(lines[2].starts_with("quarter,1,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = custmix(&["estimate", "--input", "/nonexistent/log.csv", "--out", path(dir.path())]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/log.csv"));

    let unknown = custmix(&["simulate", "--scenario", "x", "--out", path(dir.path())]);
    assert_eq!(unknown.status.code(), Some(2));

    let scenario = dir.path().join("custom.toml");
    std::fs::write(
        &scenario,
        "label = \"custom\"\ndescription = \"two segments\"\na0 = 1000\na = 1000\nq0 = [0.5, 0.5]\nq = [0.3, 0.7]\n\
         r0 = [[0.7, 0.2], [0.2, 0.3], [0.1, 0.5]]\nf0 = [2.0, 1.0]\ndependent_last_column = false\nreplications = 5\nmaster_seed = 1\n",
    )
    .unwrap();
    let custom = custmix(&["simulate", "--scenario-file", path(&scenario), "--out", path(dir.path())]);
    assert!(custom.status.success(), "{}", String::from_utf8_lossy(&custom.stderr));
    let table = std::fs::read_to_string(dir.path().join("scenarios.csv")).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("custom,two segments,"));

    // more segments than basket types leaves the conditional matrix rank deficient
    let log = dir.path().join("dup.csv");
    let mut text = String::from("basket_id,customer_id,product_id,unit_price,quantity,price_level,children_flag,timestamp\n");
    for b in 0..40 {
        let cust = if b < 24 { format!("c{}", b % 6) } else { String::new() };
        let price = ["2.0", "9.0", "4.0"][b % 3];
        text.push_str(&format!("b{b},{cust},p{b},{price},1,standard,0,2018-01-{:02}\n", 1 + b % 28));
    }
    std::fs::write(&log, text).unwrap();
    let out = custmix(&[
        "estimate",
        "--input",
        path(&log),
        "--n-baskets",
        "2",
        "--m-segments",
        "3",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
