use std::path::PathBuf;
use std::process::{Command, Output};

fn tasknet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tasknet"))
        .args(args)
        .env_remove("TASKNET_WORKERS")
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no '{key}' in\n{text}"))
}

#[test]
fn contract_prints_amplitude_and_flop() {
    let o = tasknet(&[
        "contract",
        &fixture("example_d2_sliced_e.tn"),
        "--workers",
        "2",
    ]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    let amp: f64 = field(&s, "amplitude")
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((amp - 0.5).abs() < 1e-12);
    assert_eq!(field(&s, "slices"), "2");
    assert_eq!(field(&s, "flop"), "320");

    let o = tasknet(&[
        "contract",
        &fixture("example_d2_sliced_e.tn"),
        "--share",
        "off",
        "--workers",
        "1",
    ]);
    assert_eq!(field(&stdout(&o), "flop"), "352");
}

#[test]
fn workers_env_is_honoured() {
    let o = Command::new(env!("CARGO_BIN_EXE_tasknet"))
        .args(["contract", &fixture("example_d2.tn")])
        .env("TASKNET_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_divides_flop_by_rate() {
    let o = tasknet(&["estimate", "--flop", "884000000000000000"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "seconds"), "2e0");

    let o = tasknet(&[
        "estimate",
        &fixture("example_d2_sliced_e.tn"),
        "--rate",
        "1",
    ]);
    let s = stdout(&o);
    assert_eq!(field(&s, "shared_fraction"), "2/11 (0.181818)");
    assert_eq!(field(&s, "flop_amp_unshared"), "352");
    assert_eq!(field(&s, "flop_amp"), "320");
    assert_eq!(field(&s, "seconds"), "3.2e2");
}

#[test]
fn slice_writes_network_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sliced.tn");
    let o = tasknet(&[
        "slice",
        &fixture("example_d2.tn"),
        "--labels",
        "e",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(field(&stdout(&o), "flop_amp"), "320");
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        std::fs::read_to_string(fixture("example_d2_sliced_e.tn")).unwrap()
    );

    let o = tasknet(&["slice", &fixture("example_d2.tn"), "--max-rank", "2"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("tasknet-network v1\n"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("slices "));
}

#[test]
fn generate_writes_circuit_and_network() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("g.tn");
    let o = tasknet(&[
        "generate",
        "gbs",
        "--dim",
        "1",
        "--width",
        "4",
        "--cutoff",
        "2",
        "--seed",
        "3",
        "--emit-network",
        net.to_str().unwrap(),
        "--basis",
        "zeros",
    ]);
    assert!(o.status.success(), "{o:?}");
    let circuit = stdout(&o);
    assert_eq!(circuit.matches("gate S ").count(), 4);
    assert_eq!(circuit.matches("gate BS ").count(), 3);
    let o = tasknet(&["contract", net.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(field(&stdout(&o), "precision"), "single");

    let o = tasknet(&["generate", "example", "--dim", "3", "--basis", "1,2"]);
    assert_eq!(
        stdout(&o),
        std::fs::read_to_string(fixture("example_d3.tn")).unwrap()
    );
}

#[test]
fn export_dot_draws_every_task() {
    let o = tasknet(&["export-dot", &fixture("example_d2_sliced_e.tn")]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.starts_with("digraph"));
    assert_eq!(s.matches("shape=").count(), 13);
    assert!(s.contains("lightblue"));
}

#[test]
fn exit_codes() {
    assert_eq!(tasknet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        tasknet(&["contract", "/nonexistent/net.tn"]).status.code(),
        Some(2)
    );
    assert_eq!(
        tasknet(&[
            "slice",
            &fixture("example_d2.tn"),
            "--max-rank",
            "0",
            "--max-labels",
            "1"
        ])
        .status
        .code(),
        Some(3)
    );
    let o = tasknet(&[
        "contract",
        &fixture("example_d2.tn"),
        "--memory-limit",
        "300",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0:b,e,f"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tn");
    std::fs::write(&bad, "tasknet-network v1\nname x\n").unwrap();
    assert_eq!(
        tasknet(&["contract", bad.to_str().unwrap()]).status.code(),
        Some(3)
    );
}
