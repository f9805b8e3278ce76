mod common;

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use vinevi::nn::{save_model, zoo, Dense, Layer, Model, Normalization};
use vinevi::pcap::synth::Transport;
use vinevi::TrafficClass;

fn vinevi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vinevi"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn dns30(dir: &Path) -> std::path::PathBuf {
    common::write_port_pcap(dir, "dns30.pcap", Transport::Udp, 53, 30, Duration::from_millis(10))
}

#[test]
fn help_everywhere() {
    for args in [
        &["--help"][..],
        &["monitor", "--help"],
        &["classify", "--help"],
        &["dataset", "--help"],
        &["bench", "--help"],
        &["model-info", "--help"],
    ] {
        let o = vinevi(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        assert!(stdout(&o).contains("Usage"), "{args:?}");
    }
    assert_eq!(vinevi(&["bogus"]).status.code(), Some(2));
    assert_eq!(vinevi(&[]).status.code(), Some(2));
}

#[test]
fn classify_dns_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = dns30(dir.path());
    let o = vinevi(&["classify", "--pcap", p(&pcap), "--heuristic"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 31);
    for (i, line) in lines[..30].iter().enumerate() {
        let f: Vec<&str> = line.split(' ').collect();
        assert_eq!(f.len(), 4, "{line}");
        assert_eq!(f[0], i.to_string());
        assert_eq!((f[1], f[2]), ("dns", "1.00"));
        assert!(f[3].parse::<f64>().unwrap() >= 0.0);
    }
    assert!(lines[30].starts_with("summary "));
    assert!(lines[30].contains(" dns=30"));
    assert!(lines[30].contains(" ssh=0"));
}

#[test]
fn classify_limit_and_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = dns30(dir.path());
    let o = vinevi(&["classify", "--pcap", p(&pcap), "--heuristic", "--limit", "5"]);
    assert_eq!(stdout(&o).lines().filter(|l| !l.starts_with("summary")).count(), 5);

    let o = vinevi(&["classify", "--pcap", p(&pcap), "--heuristic", "--sample", "1/3"]);
    let out = stdout(&o);
    let idx: Vec<&str> = out
        .lines()
        .filter(|l| !l.starts_with("summary"))
        .map(|l| &l[..l.find(' ').unwrap()])
        .collect();
    assert_eq!(idx, ["0", "3", "6", "9", "12", "15", "18", "21", "24", "27"]);
    assert!(out.contains("sampled=10"));
}

#[test]
fn classify_empty_pcap() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = common::write_packets(dir.path(), "empty.pcap", &[]);
    let o = vinevi(&["classify", "--pcap", p(&pcap), "--heuristic"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    let zeros = TrafficClass::ALL.iter().all(|c| out.contains(&format!(" {c}=0")));
    assert!(out.starts_with("summary packets=0 sampled=0") && zeros, "{out}");
}

#[test]
fn classify_with_model() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = dns30(dir.path());
    let model = zoo::fixture_path(zoo::TINY_SQUEEZE);
    let o = vinevi(&["classify", "--pcap", p(&pcap), "--model", p(&model), "--limit", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn truncated_pcap_is_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = dns30(dir.path());
    let bytes = std::fs::read(&pcap).unwrap();
    std::fs::write(&pcap, &bytes[..bytes.len() - 5]).unwrap();
    let o = vinevi(&["classify", "--pcap", p(&pcap), "--heuristic"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stdout(&o).contains("dns=29"),
        "partial summary expected: {}",
        stdout(&o)
    );
    assert!(stderr(&o).contains("Truncated"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = dns30(dir.path());
    let bad = dir.path().join("bad.vnn");
    std::fs::write(&bad, b"PK\x03\x04 not a model").unwrap();

    let o = vinevi(&["monitor", "--heuristic"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--pcap"));

    let o = vinevi(&["monitor", "--pcap", p(&pcap), "--model", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("BadMagic"));

    let o = vinevi(&["classify", "--pcap", p(&pcap), "--heuristic", "--sample", "pool:0s:1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = vinevi(&["classify", "--pcap", "/no/such.pcap", "--heuristic"]);
    assert_eq!(o.status.code(), Some(2));

    let o = vinevi(&["monitor", "--pcap", p(&pcap), "--heuristic", "--model", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn monitor_exits_on_eof() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = common::write_mixed_pcap(dir.path(), "mix.pcap", 70);
    let o = vinevi(&[
        "monitor",
        "--pcap",
        p(&pcap),
        "--heuristic",
        "--exit-on-eof",
        "--no-host",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["packets_seen"], 70);
    assert_eq!(summary["per_class"]["dns"], 10);
}

#[test]
fn monitor_serves_until_terminated() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = common::write_mixed_pcap(dir.path(), "mix.pcap", 140);
    let config = dir.path().join("agent.toml");
    std::fs::write(
        &config,
        format!(
            "pcap = {:?}\nheuristic = true\nwindow = \"100ms\"\nlisten = \"127.0.0.1:0\"\n",
            p(&pcap)
        ),
    )
    .unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_vinevi"))
        .args(["monitor", "--config", p(&config)])
        .env("RUST_LOG", "info")
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut err = BufReader::new(child.stderr.take().unwrap());
    let mut url = None;
    let mut line = String::new();
    while err.read_line(&mut line).unwrap() > 0 {
        if let Some(i) = line.find("http://") {
            url = Some(line[i..].trim().to_owned());
            break;
        }
        line.clear();
    }
    let url = url.expect("startup log names the endpoint");
    std::thread::sleep(Duration::from_millis(300));
    let body = ureq::get(&url).call().unwrap().into_string().unwrap();
    let samples = common::parse_exposition(&body).unwrap();
    let total: f64 = samples
        .iter()
        .filter(|s| s.name == "vinevi_traffic_class_packets")
        .map(|s| s.value)
        .sum();
    // everything was read well over a window ago, so the last closed window is empty
    assert_eq!(total, 0.0);

    unsafe { libc::kill(child.id() as i32, libc::SIGTERM) };
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["classified"], 140);
}

#[test]
fn dataset_two_pcaps() {
    let dir = tempfile::tempdir().unwrap();
    let dns = common::write_port_pcap(dir.path(), "dns.pcap", Transport::Udp, 53, 3, Duration::from_millis(1));
    let ssh = common::write_port_pcap(dir.path(), "ssh.pcap", Transport::Tcp, 22, 2, Duration::from_millis(1));
    let out = dir.path().join("ds");
    let o = vinevi(&[
        "dataset",
        "--pcap",
        &format!("dns={}", p(&dns)),
        "--pcap",
        &format!("ssh={}", p(&ssh)),
        "--split",
        "1/0/0",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let count = |d: &str| std::fs::read_dir(out.join(d)).map(|r| r.count()).unwrap_or(0);
    assert_eq!(count("train/dns"), 3);
    assert_eq!(count("train/ssh"), 2);
    assert!(out.join("train/dns/dns_0.ppm").exists());
    assert!(!out.join("val").exists() && !out.join("test").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["counts"], serde_json::json!({"dns": 3, "ssh": 2}));

    let o = vinevi(&["dataset", "--pcap", &format!("http={}", p(&dns)), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = vinevi(&[
        "dataset",
        "--pcap",
        &format!("dns={}", p(&dns)),
        "--split",
        "0.5/0.4",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dataset_missing_input_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let dns = common::write_port_pcap(dir.path(), "dns.pcap", Transport::Udp, 53, 3, Duration::from_millis(1));
    let out = dir.path().join("ds");
    let o = vinevi(&[
        "dataset",
        "--pcap",
        "ssh=/no/such.pcap",
        "--pcap",
        &format!("dns={}", p(&dns)),
        "--split",
        "1/0/0",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["counts"]["dns"], 3);
    assert_eq!(manifest["errors"].as_array().unwrap().len(), 1);
}

#[test]
fn model_info_reports() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.vnn");
    let labels = TrafficClass::ALL.iter().map(|c| c.to_string()).collect();
    let head = Layer::Dense(Dense {
        in_features: 150_528,
        out_features: 7,
        weights: vec![0.0; 150_528 * 7],
        bias: Some(vec![0.0; 7]),
    });
    save_model(
        &Model::new("flat", labels, Normalization::default(), vec![head, Layer::Softmax]).unwrap(),
        &flat,
    )
    .unwrap();
    let o = vinevi(&["model-info", p(&flat)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("total params           1,053,703"), "{out}");
    assert!(out.contains("last layer complexity  100.0000%"), "{out}");

    let o = vinevi(&["model-info", p(&zoo::fixture_path(zoo::TINY_RES))]);
    assert!(stdout(&o).lines().any(|l| l.starts_with("residual_block")));

    let o = vinevi(&["model-info", "--format", "json", p(&zoo::fixture_path(zoo::TINY_RES))]);
    let info: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(info["total_params"], info["blob_floats"]);

    let corrupt = dir.path().join("corrupt.vnn");
    let mut bytes = std::fs::read(zoo::fixture_path(zoo::TINY_RES)).unwrap();
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&corrupt, bytes).unwrap();
    assert_eq!(vinevi(&["model-info", p(&corrupt)]).status.code(), Some(2));
}

#[test]
fn bench_json_matches_table_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let squeeze = zoo::fixture_path(zoo::TINY_SQUEEZE);
    let o = vinevi(&[
        "bench",
        "--model",
        p(&squeeze),
        "--model",
        "/no/such.vnn",
        "--iterations",
        "3",
        "--warmup",
        "1",
        "--limit",
        "4",
        "--format",
        "json",
        "--out",
        p(&out),
    ]);
    // a model that fails to load is reported, not fatal
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
    assert_eq!(report["errors"].as_array().unwrap().len(), 1);

    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../../../docs/bench_report.schema.json")).unwrap();
    common::check_schema(&schema, &schema, &report).unwrap();

    let row = &report["rows"][0];
    let table = std::fs::read_to_string(out.join("report.txt")).unwrap();
    let line = table.lines().find(|l| l.starts_with("tiny-squeeze")).unwrap();
    let cells: Vec<&str> = line.split_whitespace().collect();
    let want = [
        row["params"].to_string(),
        row["flops"].to_string(),
        row["last_layer_complexity_percent"].to_string(),
        row["latency"]["mean_ms"].to_string(),
        row["latency"]["std_ms"].to_string(),
        row["latency"]["ci95_half_width_ms"].to_string(),
        row["latency"]["min_ms"].to_string(),
        row["latency"]["max_ms"].to_string(),
        row["latency_with_transform"]["mean_ms"].to_string(),
    ];
    for (cell, want) in cells[1..10].iter().zip(&want) {
        assert_eq!(cell.parse::<f64>().unwrap(), want.parse::<f64>().unwrap());
    }

    let csv = std::fs::read_to_string(out.join("timings.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("model,variant,iteration,ms"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}
