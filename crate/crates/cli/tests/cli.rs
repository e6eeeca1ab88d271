mod common;

use std::fs;
use std::net::UdpSocket;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use common::*;
use flowcap::analyzer::synthetic::TwoSegmentCurve;
use flowcap::netflow::write_capture_file;
use flowcap::samples::{read_samples_csv, write_samples_csv};
use flowcap::LinkSample;

fn write_conf(dir: &std::path::Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path_str(&path).to_string()
}

#[test]
fn simulate_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "sim.conf", UNCONSTRAINED_CONF);
    let out = dir.path().join("out");
    let run = flowcap(&["simulate", "--config", &conf, "--out", path_str(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    for f in ["samples.csv", "metadata.txt", "moments.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let moments: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("moments.json")).unwrap()).unwrap();
    assert_eq!(moments["moments"]["mean_rate"]["theoretical"], 1e6);
    assert_eq!(
        moments["moments"]["mean_active_flows"]["theoretical"],
        100.0
    );
    assert!(
        moments["moments"]["mean_rate"]["relative_error"]
            .as_f64()
            .unwrap()
            .abs()
            < 0.02
    );

    // The sidecar is itself a config that reproduces the run.
    let again = dir.path().join("again");
    let meta = out.join("metadata.txt");
    let rerun = flowcap(&[
        "simulate",
        "--config",
        path_str(&meta),
        "--out",
        path_str(&again),
    ]);
    assert_eq!(code(&rerun), 0, "{}", stderr(&rerun));
    assert_eq!(
        fs::read(out.join("samples.csv")).unwrap(),
        fs::read(again.join("samples.csv")).unwrap()
    );
}

#[test]
fn simulate_config_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "sim.conf", UNCONSTRAINED_CONF);
    let out = dir.path().join("out");
    let run = flowcap(&[
        "simulate",
        "--config",
        &conf,
        "--set",
        "model.lambda=-1",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("lambda"), "{}", stderr(&run));

    let run = flowcap(&[
        "simulate",
        "--config",
        &conf,
        "--set",
        "sim.horizonn=5",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("sim.horizonn"));

    let run = flowcap(&[
        "simulate",
        "--config",
        &conf,
        "--set",
        "sim.sample_interval=0.5",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("sim.sample_interval"));

    let missing = dir.path().join("nope.conf");
    let run = flowcap(&[
        "simulate",
        "--config",
        path_str(&missing),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 2);
}

#[test]
fn divergent_variance_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "sim.conf", UNCONSTRAINED_CONF);
    let out = dir.path().join("out");
    let exp = "model.duration.family=exponential";
    let run = flowcap(&[
        "simulate",
        "--config",
        &conf,
        "--set",
        exp,
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 3);
    assert!(stderr(&run).contains("E[1/X]"), "{}", stderr(&run));

    let run = flowcap(&[
        "simulate",
        "--config",
        &conf,
        "--set",
        exp,
        "--moments",
        "mean_rate,mean_active_flows",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let moments: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("moments.json")).unwrap()).unwrap();
    assert!(moments["moments"]["rate_variance"]["theoretical"].is_null());
}

#[test]
fn sweep_rows_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "ps.conf", PS_CONF);
    let out = dir.path().join("sweep");
    let run = flowcap(&[
        "sweep",
        "--config",
        &conf,
        "--lambdas",
        "1,3,5,7,9,11,13,15",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let samples = read_samples_csv(out.join("sweep.csv")).unwrap();
    assert_eq!(samples.len(), 8);
    for pair in samples.windows(2) {
        assert!(pair[1].utilization >= pair[0].utilization, "{pair:?}");
    }
    let detail = fs::read_to_string(out.join("sweep_points.csv")).unwrap();
    assert_eq!(detail.lines().count(), 9);

    let one = dir.path().join("one");
    let run = flowcap(&[
        "sweep",
        "--config",
        &conf,
        "--lambdas",
        "2",
        "--out",
        path_str(&one),
    ]);
    assert_eq!(code(&run), 0);
    assert_eq!(read_samples_csv(one.join("sweep.csv")).unwrap().len(), 1);

    let no_cap = write_conf(
        dir.path(),
        "nocap.conf",
        &PS_CONF
            .lines()
            .filter(|l| !l.starts_with("sim.capacity"))
            .collect::<Vec<_>>()
            .join("\n"),
    );
    let run = flowcap(&[
        "sweep",
        "--config",
        &no_cap,
        "--lambdas",
        "2",
        "--out",
        path_str(&one),
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("sim.capacity"));
}

#[test]
fn ingest_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.bin");
    write_capture_file(&good, &corpus(100, 5)).unwrap();
    let out = dir.path().join("ingest");
    let run = flowcap(&[
        "ingest",
        "--from",
        path_str(&good),
        "--capacity",
        "1000000",
        "--interval",
        "30",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let report = stdout(&run);
    assert!(
        report.contains("datagrams 100 records 500 parse_errors 0"),
        "{report}"
    );
    let samples = read_samples_csv(out.join("samples.csv")).unwrap();
    assert!(!samples.is_empty());
    assert!(samples.iter().all(|s| s.timestamp as i64 % 30 == 0));
    // Every byte lands somewhere: 100 datagrams of 5 records, 1500..=1504 octets.
    // The CSV keeps six decimals of utilization, hence the loose tolerance.
    let octets: f64 = samples
        .iter()
        .map(|s| s.utilization / 100.0 * 30.0 * 1e6 / 8.0)
        .sum();
    assert!((octets / (100.0 * 7510.0) - 1.0).abs() < 1e-6, "{octets}");

    let mut mixed = corpus(10, 2);
    mixed[4].truncate(60);
    let mixed_path = dir.path().join("mixed.bin");
    write_capture_file(&mixed_path, &mixed).unwrap();
    let run = flowcap(&[
        "ingest",
        "--from",
        path_str(&mixed_path),
        "--capacity",
        "1000000",
        "--interval",
        "30",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert!(
        stdout(&run).contains("datagrams 10 records 18 parse_errors 1"),
        "{}",
        stdout(&run)
    );

    let missing = dir.path().join("missing.bin");
    let run = flowcap(&[
        "ingest",
        "--from",
        path_str(&missing),
        "--capacity",
        "1000000",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 2);

    let run = flowcap(&[
        "ingest",
        "--from",
        path_str(&good),
        "--capacity",
        "0",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("capacity"));
}

#[test]
fn ingest_live_udp() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("live");
    let port = UdpSocket::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_flowcap"))
        .args([
            "ingest",
            "--listen",
            &addr,
            "--capacity",
            "1000000",
            "--interval",
            "30",
            "--max-datagrams",
            "20",
            "--duration",
            "20",
            "--out",
            path_str(&out),
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let sender = UdpSocket::bind("127.0.0.1:0").unwrap();
    let datagrams = corpus(20, 3);
    let start = Instant::now();
    // Repeat until the receiver has seen enough; early packets may precede its bind.
    let status = loop {
        if let Some(status) = child.try_wait().unwrap() {
            break status;
        }
        assert!(
            start.elapsed() < Duration::from_secs(30),
            "receiver did not stop"
        );
        for d in &datagrams {
            let _ = sender.send_to(d, &addr);
        }
        std::thread::sleep(Duration::from_millis(100));
    };
    assert!(status.success());
    let mut report = String::new();
    std::io::Read::read_to_string(child.stdout.as_mut().unwrap(), &mut report).unwrap();
    assert!(
        report.contains("datagrams 20 records 60 parse_errors 0"),
        "{report}"
    );
    assert!(!read_samples_csv(out.join("samples.csv"))
        .unwrap()
        .is_empty());
}

#[test]
fn analyze_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let curve = TwoSegmentCurve::reference();
    let samples_path = dir.path().join("two_segment.csv");
    write_samples_csv(&curve.generate(200, 1), &samples_path).unwrap();
    let out = dir.path().join("a");
    let run = flowcap(&[
        "analyze",
        "--samples",
        path_str(&samples_path),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let verdict = stdout(&run);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let knee_n = report["knee_flows"].as_f64().unwrap();
    let knee_u = report["knee_utilization_percent"].as_f64().unwrap();
    assert!((knee_n / 2500.0 - 1.0).abs() < 0.05, "{verdict}");
    assert!((knee_u / 45.0 - 1.0).abs() < 0.05, "{verdict}");
    assert!(
        verdict.starts_with(&format!(
            "knee at {knee_n:.1} flows, {knee_u:.2}% utilization"
        )),
        "{verdict}"
    );
    for f in ["labeled_samples.csv", "fitted_lines.csv"] {
        assert!(out.join(f).is_file());
    }

    let under: Vec<LinkSample> = (1..=30)
        .map(|i| LinkSample::new(i as f64, 0.02 * (i * 50) as f64, i * 50))
        .collect();
    let under_path = dir.path().join("under.csv");
    write_samples_csv(&under, &under_path).unwrap();
    let run = flowcap(&[
        "analyze",
        "--samples",
        path_str(&under_path),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 0);
    assert!(stdout(&run).starts_with("working area not exceeded"));

    let tiny_path = dir.path().join("tiny.csv");
    fs::write(
        &tiny_path,
        "timestamp,utilization_percent,active_flows\n1,10,100\n2,20,200\n",
    )
    .unwrap();
    let run = flowcap(&[
        "analyze",
        "--samples",
        path_str(&tiny_path),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 4);
    assert!(stderr(&run).contains("InsufficientWorkingData"));

    let run = flowcap(&[
        "analyze",
        "--samples",
        path_str(&under_path),
        "--set",
        "analyzer.saturation_quantile=2",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("analyzer.saturation_quantile"));

    let bad_path = dir.path().join("bad.csv");
    fs::write(
        &bad_path,
        "timestamp,utilization_percent,active_flows\n1,-3,100\n",
    )
    .unwrap();
    let run = flowcap(&[
        "analyze",
        "--samples",
        path_str(&bad_path),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 2);
}

/// Every CSV the tool writes is read back by `analyze` without conversion.
#[test]
fn pipeline_closure() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "sim.conf", UNCONSTRAINED_CONF);
    let ps = write_conf(dir.path(), "ps.conf", PS_CONF);
    let sim_out = dir.path().join("sim");
    let sweep_out = dir.path().join("sweep");
    let ingest_out = dir.path().join("ingest");
    let cap = dir.path().join("cap.bin");
    write_capture_file(&cap, &corpus(50, 4)).unwrap();

    assert_eq!(
        code(&flowcap(&[
            "simulate",
            "--config",
            &conf,
            "--out",
            path_str(&sim_out)
        ])),
        0
    );
    assert_eq!(
        code(&flowcap(&[
            "sweep",
            "--config",
            &ps,
            "--lambdas",
            "1,2,3,4,5,6,12,15",
            "--out",
            path_str(&sweep_out)
        ])),
        0
    );
    assert_eq!(
        code(&flowcap(&[
            "ingest",
            "--from",
            path_str(&cap),
            "--capacity",
            "1e5",
            "--interval",
            "10",
            "--out",
            path_str(&ingest_out)
        ])),
        0
    );
    for csv in [
        sim_out.join("samples.csv"),
        sweep_out.join("sweep.csv"),
        ingest_out.join("samples.csv"),
    ] {
        let run = flowcap(&[
            "analyze",
            "--samples",
            path_str(&csv),
            "--out",
            path_str(&dir.path().join("a")),
        ]);
        // A fit may legitimately fail on small inputs, but the file must parse.
        assert!(
            matches!(code(&run), 0 | 4),
            "{}: {}",
            csv.display(),
            stderr(&run)
        );
    }
}
