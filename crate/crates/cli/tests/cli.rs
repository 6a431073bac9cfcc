use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn cse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cse")).args(args).output().expect("spawn cse")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let meas = dir.path().join("m.jsonl");
    let kkt = dir.path().join("kkt.txt");
    let (net, placement) = (fixture("net118.json"), fixture("118_A.json"));
    let o = cse(&["simulate", "--network", s(&net), "--placement", s(&placement), "--seed", "4", "--out", s(&meas)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&meas).unwrap().lines().count() > 100);

    let o = cse(&[
        "estimate",
        "--network",
        s(&net),
        "--placement",
        s(&placement),
        "--measurements",
        s(&meas),
        "--estimator",
        "cec",
        "--dump-kkt",
        s(&kkt),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["estimator"], "cec");
    assert_eq!(v["converged"], true);
    assert_eq!(v["state"].as_array().unwrap().len(), 118);
    assert_eq!(v["state"][0]["node"], "1");
    assert!(v["zero_injection_mismatch"].as_f64().unwrap() < 1e-8);

    let size = v["matrix_size"].as_u64().unwrap();
    let dump = std::fs::read_to_string(&kkt).unwrap();
    let header: Vec<u64> = dump.lines().next().unwrap()[1..].split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(&header[..2], &[size, size]);
    assert_eq!(dump.lines().count() as u64, header[2] + 1);
}

#[test]
fn simulation_is_reproducible_from_the_seed() {
    let args = |seed| {
        cse(&["simulate", "--network", s(&fixture("net118.json")), "--placement", s(&fixture("118_C.json")), "--seed", seed])
    };
    let (a, b, c) = (args("9"), args("9"), args("10"));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn iteration_cap_exits_with_non_convergence_code() {
    let o = cse(&[
        "estimate",
        "--network",
        s(&fixture("net118.json")),
        "--placement",
        s(&fixture("118_A.json")),
        "--max-iterations",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["converged"], false);
}

#[test]
fn bad_inputs_exit_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"nodes\": [").unwrap();
    let net = fixture("net118.json");
    let (a118, a1888) = (fixture("118_A.json"), fixture("1888_A.json"));
    let cases: Vec<Vec<&str>> = vec![
        vec!["estimate", "--network", "/definitely/missing.json", "--placement", "x"],
        vec!["estimate", "--network", s(&broken), "--placement", s(&a118)],
        vec!["estimate", "--network", s(&net)],
        vec!["estimate", "--network", s(&net), "--placement", s(&a118), "--estimator", "wls"],
        vec!["estimate", "--network", s(&net), "--placement", s(&a118), "--tolerance", "-1"],
        vec!["estimate", "--network", s(&net), "--placement", s(&a1888)],
        vec!["bench", "--network", s(&net), "--placement", s(&a118), "--trials", "0"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = cse(&args);
        assert_eq!(o.status.code(), Some(3), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn bench_prints_one_row_per_estimator() {
    let o = cse(&[
        "bench",
        "--network",
        s(&fixture("net118.json")),
        "--placement",
        s(&fixture("118_D.json")),
        "--trials",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("instance,estimator,trials"));
    let width = lines[0].split(',').count();
    for (line, est) in lines[1..].iter().zip(["cne", "cec", "rec"]) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), width);
        assert_eq!(&cols[..3], &["118_D", est, "3"]);
    }
}

#[test]
fn stress_writes_table_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = cse(&[
        "stress",
        "--network",
        s(&fixture("net118.json")),
        "--placement",
        s(&fixture("118_A.json")),
        "--load-mult",
        "1,1.1",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(&out).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("multiplier,feasible,min_voltage_node,min_voltage,cec_iterations"));
    let trace = std::fs::read_to_string(dir.path().join("sweep_trace.csv")).unwrap();
    assert!(trace.lines().skip(1).any(|l| l.contains(",rec,1,")));
}

#[test]
fn synth_reproduces_the_shipped_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let o = cse(&["synth", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let written = stdout(&o);
    assert_eq!(written.lines().count(), 9);
    for path in written.lines() {
        let path = Path::new(path);
        let name = path.file_name().unwrap().to_str().unwrap();
        assert_eq!(std::fs::read(path).unwrap(), std::fs::read(fixture(name)).unwrap(), "{name}");
    }
}

#[test]
fn kernel_bench_reports_both_backends() {
    let o = cse(&["kernel-bench", "--len", "256", "--passes", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().filter(|l| l.starts_with("scalar,")).count() == 3);
    for line in text.lines().skip(1) {
        assert!(line.rsplit(',').next().unwrap().parse::<f64>().unwrap() > 0.0);
    }
}
