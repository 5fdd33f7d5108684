use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn maxlin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxlin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, n: &str, seed: &str) {
    let out = maxlin(&["simulate", "--dag", "ten-node", "-n", n, "--seed", seed, "-o", p(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    simulate(&a, "500", "7");
    simulate(&b, "500", "7");
    for f in ["samples.csv", "a.json", "a.csv", "dag.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let header = fs::read_to_string(a.join("samples.csv")).unwrap();
    assert!(header.starts_with("X1,X2,X3,X4,X5,X6,X7,X8,X9,X10\n"));
    assert_eq!(header.lines().count(), 501);
}

#[test]
fn learn_writes_reproducible_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, "5000", "3");
    let input = data.join("samples.csv");
    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    for r in [&r1, &r2] {
        let out = maxlin(&["learn", "-i", p(&input), "-o", p(r), "--covariance"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["report.json", "a_hat.csv", "graph.dot"] {
        assert_eq!(fs::read(r1.join(f)).unwrap(), fs::read(r2.join(f)).unwrap(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(r1.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 5000);
    assert_eq!(report["k"], 71);
    assert_eq!(report["learn"]["discovery"].as_array().unwrap().len(), 10);
    assert_eq!(report["scalings"].as_array().unwrap().len(), 55);
    assert!(fs::read_to_string(r1.join("graph.dot")).unwrap().starts_with("digraph"));
}

#[test]
fn exact_learn_recovers_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "10", "1");
    let out_dir = tmp.path().join("exact");
    let a = tmp.path().join("a.json");
    let out = maxlin(&["learn", "--exact", p(&a), "-o", p(&out_dir), "--algorithm", "threshold"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parse = |f: &Path| -> Vec<f64> {
        fs::read_to_string(f)
            .unwrap()
            .split([',', '\n'])
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().unwrap())
            .collect()
    };
    let truth = parse(&tmp.path().join("a.csv"));
    let est = parse(&out_dir.join("a_hat.csv"));
    let worst = truth
        .iter()
        .zip(&est)
        .map(|(x, y)| (x * x - y * y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = maxlin(&["learn", "-i", "/nonexistent/x.csv", "-o", p(tmp.path())]);
    assert_eq!(missing.status.code(), Some(4));

    let cyc = tmp.path().join("cyc.txt");
    fs::write(&cyc, "nodes: 2\n1 -> 2\n2 -> 1\n").unwrap();
    let out = maxlin(&["simulate", "--dag", p(&cyc), "-n", "5", "-o", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    let no_out = maxlin(&["simulate", "--dag", "ten-node", "-n", "5"]);
    assert_eq!(no_out.status.code(), Some(2));

    let data = tmp.path().join("data");
    simulate(&data, "2000", "2");
    let out = maxlin(&[
        "learn",
        "-i",
        p(&data.join("samples.csv")),
        "-o",
        p(&tmp.path().join("r")),
        "--algorithm",
        "threshold",
        "--eps1",
        "0",
        "--eps2",
        "0",
        "--eps3",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    fs::write(
        &cfg,
        "dag = \"ten-node\"\nseed = 4\n[study]\nsizes = [100]\nruns = 3\nmode = \"exact\"\nweights = \"fixed\"\n",
    )
    .unwrap();
    let out = maxlin(&["--config", p(&cfg), "study", "--runs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,runs,valid,correct,success_ratio"));
    assert!(lines.next().unwrap().starts_with("100,2,2,"));

    fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = maxlin(&["--config", p(&cfg), "study"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn transform_and_extremes() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("r.csv");
    fs::write(&input, "a,b\n-1.0,2.0\n0.5,-3.0\n-2.0,-1.0\n").unwrap();
    let out_csv = tmp.path().join("t.csv");
    let out = maxlin(&["transform", "-i", p(&input), "--negate", "-o", p(&out_csv)]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&out_csv).unwrap(), "a,b\n1,0\n0,3\n2,1\n");

    let out = maxlin(&["extremes", "-i", p(&out_csv), "--count", "10", "--pairs", "1-2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("real,1,2,1,0.0,3.0,3.0"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("only 3 rows"));

    let out = maxlin(&["extremes", "-i", p(&input)]);
    assert_eq!(out.status.code(), Some(2));
}
