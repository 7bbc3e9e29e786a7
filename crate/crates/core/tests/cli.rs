use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::thread;
use std::time::Duration;

use watchtower::model::Decision;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_watchtower"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn parse_jsonl(text: &str) -> Vec<Decision> {
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("bad line {l:?}: {e}")))
        .collect()
}

/// Copies the fixture directory so a test can edit the config freely.
fn scratch_fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for name in ["config.toml", "stream300.json", "vocab.txt", "references.json"] {
        fs::copy(fixtures().join(name), dir.path().join(name)).unwrap();
    }
    dir
}

#[test]
fn missing_vocab_exits_2_naming_the_field() {
    let dir = scratch_fixtures();
    let cfg = dir.path().join("config.toml");
    let text = fs::read_to_string(&cfg).unwrap().replace("vocab = \"vocab.txt\"\n", "");
    fs::write(&cfg, text).unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("filter.vocab"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2_with_its_path() {
    let dir = scratch_fixtures();
    let cfg = dir.path().join("config.toml");
    let text = fs::read_to_string(&cfg).unwrap().replace("tau = 3", "tau = 3\ntua = 4");
    fs::write(&cfg, text).unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("filter"), "{}", stderr(&o));
    assert!(stderr(&o).contains("tua"), "{}", stderr(&o));
}

#[test]
fn bad_flag_is_usage_error() {
    assert_eq!(run(&["run", "--nope"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unreachable_backend_exits_3() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let o = bin()
        .args(["run", "--config"])
        .arg(fixtures().join("config.toml"))
        .env("WATCHTOWER_REASONER_ENDPOINT", format!("http://{addr}"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("reasoner"));
}

#[test]
fn run_writes_decisions_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let cfg = fixtures().join("config.toml");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("frames=300 windows=3"));
    let ds = parse_jsonl(&fs::read_to_string(&out).unwrap());
    assert_eq!(ds.len(), 3);
    assert_eq!(ds[0].emitted_ts.as_secs_f64(), 5.3);
    assert!(ds.iter().all(|d| d.is_anomalous && d.frame_ids.len() == 8));
}

#[test]
fn decisions_go_to_stdout_without_out() {
    let cfg = fixtures().join("config.toml");
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(parse_jsonl(&String::from_utf8(o.stdout).unwrap()).len(), 3);
}

#[test]
fn simulate_reports_latency_and_accepts_overrides() {
    let cfg = fixtures().join("config.toml");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("detection latency 3.300 s"));

    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--latency", "reasoner=1.5", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["detection"]["latency"].as_f64(), Some(4.0));

    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--latency", "gpu=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_rejects_remote_backends() {
    let o = bin()
        .args(["simulate", "--config"])
        .arg(fixtures().join("config.toml"))
        .env("WATCHTOWER_CAPTIONER_ENDPOINT", "http://127.0.0.1:9")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("backends.captioner"));
}

#[test]
fn eval_prints_metric_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let json = dir.path().join("report.json");
    let f = fixtures();
    let cfg = f.join("config.toml");
    assert!(run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status
        .success());
    let o = bin()
        .args(["eval", "--decisions"])
        .arg(&out)
        .arg("--manifest")
        .arg(f.join("stream300.json"))
        .arg("--references")
        .arg(f.join("references.json"))
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("BLEU") && table.contains("fixture300"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["mean_latency"].as_f64(), Some(3.3));
}

#[test]
fn corpus_synth_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    let o = run(&["corpus", "synth", "--frames", "200", "--fps", "25", "--out", m.to_str().unwrap()]);
    assert!(o.status.success());
    let parts = dir.path().join("parts");
    let o = run(&[
        "corpus", "split", "--manifest", m.to_str().unwrap(), "--ratio", "7:3", "--out-dir", parts.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let clips: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(clips.as_array().unwrap().len(), 2);
    assert_eq!(clips[1]["historical"][0], 100);
    assert_eq!(clips[1]["adjacent"].as_array().unwrap().len(), 30);
    assert_eq!(clips[0]["adjacent_sample"].as_array().unwrap().len(), 8);
    assert_eq!(fs::read_dir(&parts).unwrap().count(), 4);

    let o = run(&["corpus", "split", "--manifest", m.to_str().unwrap(), "--ratio", "2:8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sigint_flushes_complete_lines_and_exits_130() {
    let dir = scratch_fixtures();
    let long = dir.path().join("long.json");
    assert!(run(&["corpus", "synth", "--frames", "9000", "--fps", "30", "--out", long.to_str().unwrap()])
        .status
        .success());
    let cfg = dir.path().join("config.toml");
    let text = fs::read_to_string(&cfg).unwrap().replace("stream300.json", "long.json");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("d.jsonl");

    let child = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--speed", "10", "--out", out.to_str().unwrap()])
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    thread::sleep(Duration::from_millis(1500));
    // SAFETY: plain signal delivery to our own child process.
    let rc = unsafe { libc::kill(child.id() as libc::pid_t, libc::SIGINT) };
    assert_eq!(rc, 0);
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(130), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.is_empty() || text.ends_with('\n'));
    let ds = parse_jsonl(&text);
    assert!(!ds.is_empty());
    assert!(ds.len() < 128);
    assert!(ds.windows(2).all(|w| w[0].decision_id < w[1].decision_id));
}

#[test]
fn closed_stdout_ends_run_quietly() {
    let config = fixtures().join("config.toml");
    for speed in ["inf", "50"] {
        let mut child = bin()
            .args(["run", "--config", config.to_str().unwrap(), "--speed", speed])
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        drop(child.stdout.take());
        let out = child.wait_with_output().unwrap();
        assert_eq!(out.status.code(), Some(0), "speed {speed}: {}", stderr(&out));
        assert!(!stderr(&out).contains("Broken pipe"), "speed {speed}: {}", stderr(&out));
    }
}
