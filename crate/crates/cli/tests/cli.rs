use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, UdpSocket};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use fallwatch::dataset::synth::{write_dataset, SceneKind};
use fallwatch::dataset::{evaluate, load_manifest, load_samples};
use fallwatch::fallnet::load_checkpoint;
use fallwatch_cli::commands::eval::format_metrics;

const BIN: &str = env!("CARGO_BIN_EXE_fallwatch");

fn fw(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn tiny_dataset(dir: &Path) {
    write_dataset(dir.join("data"), SceneKind::BrightDark, 6, 16, 3).unwrap();
}

fn train(dir: &Path, out: &str) -> Output {
    fw(
        dir,
        &[
            "train", "--data", "data", "--epochs", "2", "--size", "16", "--out", out, "--curves", "c.csv",
        ],
    )
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fw(dir.path(), &["--help"])), 0);
    assert_eq!(code(&fw(dir.path(), &["--version"])), 0);
    assert_eq!(code(&fw(dir.path(), &["monitor", "--help"])), 0);
}

#[test]
fn bad_usage_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fw(dir.path(), &["train", "--no-such-flag"])), 2);
    assert_eq!(code(&fw(dir.path(), &["train", "--data", "x", "--epochs", "0"])), 2);
    assert_eq!(code(&fw(dir.path(), &["frobnicate"])), 2);
}

#[test]
fn missing_or_empty_dataset_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fw(dir.path(), &["train", "--data", "nowhere"])), 3);
    fs::create_dir_all(dir.path().join("empty/fall")).unwrap();
    fs::create_dir_all(dir.path().join("empty/not_fall")).unwrap();
    assert_eq!(code(&fw(dir.path(), &["train", "--data", "empty"])), 3);
}

#[test]
fn training_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    let a = train(dir.path(), "a.ckpt");
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&train(dir.path(), "b.ckpt")), 0);
    let a = fs::read(dir.path().join("a.ckpt")).unwrap();
    let b = fs::read(dir.path().join("b.ckpt")).unwrap();
    assert_eq!(a, b);
    let out = stdout(&fw(
        dir.path(),
        &[
            "train", "--data", "data", "--epochs", "1", "--size", "16", "--out", "x.ckpt",
        ],
    ));
    assert!(out.contains("epoch"), "{out}");
    let curves = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 3, "{curves}");
}

#[test]
fn eval_from_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = fw(dir.path(), &["eval", "--counts", "390,0,1,0"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("recall = 0.99744"), "{out}");
    assert!(out.contains("precision = 1.00000"), "{out}");
    assert!(out.contains("mean_loss = n/a"), "{out}");
    assert_eq!(code(&fw(dir.path(), &["eval", "--counts", "1,2,3"])), 2);
}

#[test]
fn eval_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    assert_eq!(code(&train(dir.path(), "m.ckpt")), 0);
    let o = fw(dir.path(), &["eval", "--model", "m.ckpt", "--data", "data"]);
    assert_eq!(code(&o), 0);
    let model = load_checkpoint(dir.path().join("m.ckpt")).unwrap();
    let manifest = load_manifest(dir.path().join("data")).unwrap();
    let samples = load_samples(&manifest, model.input_size()).unwrap();
    let want = format_metrics(&evaluate(&model, &samples, 0.5).unwrap());
    assert!(stdout(&o).ends_with(&want), "{}\nwanted\n{want}", stdout(&o));
}

#[test]
fn predict_prints_one_row_per_image() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    assert_eq!(code(&train(dir.path(), "m.ckpt")), 0);
    let images: Vec<String> = fs::read_dir(dir.path().join("data/fall"))
        .unwrap()
        .take(2)
        .map(|e| e.unwrap().path().display().to_string())
        .collect();
    let mut args = vec!["predict", "--model", "m.ckpt"];
    args.extend(images.iter().map(String::as_str));
    let o = fw(dir.path(), &args);
    assert_eq!(code(&o), 0);
    let rows: Vec<_> = stdout(&o)
        .lines()
        .filter(|l| l.contains('\t'))
        .map(String::from)
        .collect();
    assert_eq!(rows.len(), 2, "{rows:?}");
    for row in rows {
        let p: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    assert_eq!(
        code(&fw(dir.path(), &["predict", "--model", "missing.ckpt", "x.ppm"])),
        3
    );
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.conf"), "# training\nepochs = 9\nlr = 0.5\n").unwrap();
    // An unreadable dataset stops the run after the config is printed.
    let o = fw(
        dir.path(),
        &["train", "--config", "t.conf", "--epochs", "3", "--data", "nowhere"],
    );
    let out = stdout(&o);
    assert!(out.contains("epochs = 3"), "{out}");
    assert!(out.contains("lr = 0.5"), "{out}");
    assert!(out.contains("seed = 42"), "{out}");
    fs::write(dir.path().join("bad.conf"), "epoch = 3\n").unwrap();
    assert_eq!(
        code(&fw(dir.path(), &["train", "--config", "bad.conf", "--data", "x"])),
        2
    );
    assert_eq!(
        code(&fw(dir.path(), &["train", "--config", "absent.conf", "--data", "x"])),
        3
    );
}

#[test]
fn gradcheck_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = fw(dir.path(), &["gradcheck"]);
    assert_eq!(code(&a), 0, "{}", stdout(&a));
    assert!(stdout(&a).trim_end().ends_with("PASS"));
    let b = fw(dir.path(), &["gradcheck"]);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn gradcheck_catches_a_one_percent_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = fw(dir.path(), &["gradcheck", "--corrupt-dense"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dense seed"), "{err}");
}

#[test]
fn convert_resizes_into_p6() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("raw/fall");
    fs::create_dir_all(&src).unwrap();
    let mut pgm = b"P5\n4 2\n255\n".to_vec();
    pgm.extend([0u8, 50, 100, 150, 200, 250, 255, 10]);
    fs::write(src.join("a.pgm"), pgm).unwrap();
    let o = fw(
        dir.path(),
        &["convert", "--input", "raw", "--output", "out", "--size", "8"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let img = fallwatch::dataset::load_image(dir.path().join("out/fall/a.ppm")).unwrap();
    assert_eq!(img.shape(), &[8, 8, 3]);
    fs::create_dir_all(dir.path().join("nothing")).unwrap();
    assert_eq!(
        code(&fw(dir.path(), &["convert", "--input", "nothing", "--output", "o2"])),
        3
    );
}

fn scenario(dir: &Path, name: &str) {
    let o = fw(
        dir,
        &[
            "synth",
            "--kind",
            "scenario",
            "--scenario",
            name,
            "--out",
            "replay",
            "--size",
            "16",
        ],
    );
    assert_eq!(code(&o), 0);
}

fn monitor_args<'a>(source: &'a str, timeout: &'a str) -> Vec<&'a str> {
    vec![
        "monitor",
        "--model",
        "brightness-stub",
        "--source",
        source,
        "--replay",
        "replay",
        "--fps",
        "60",
        "--prompt-timeout",
        timeout,
        "--alert-log",
        "alerts.jsonl",
    ]
}

#[test]
fn monitor_mock_fall_raises_one_alarm() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "fall");
    let mut args = monitor_args("mock", "0.4");
    args.extend(["--stdin", "false"]);
    let o = fw(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("summary: frames=50 alarms=1 drops=0"), "{out}");
    let log = fs::read_to_string(dir.path().join("alerts.jsonl")).unwrap();
    let line: serde_json::Value = serde_json::from_str(log.trim()).unwrap();
    assert_eq!(line["trigger"], "no-answer");
}

#[test]
fn monitor_quiet_scene_raises_nothing() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "quiet");
    let mut args = monitor_args("replay", "0.4");
    args.extend(["--stdin", "false"]);
    let out = stdout(&fw(dir.path(), &args));
    assert!(out.contains("alarms=0"), "{out}");
    assert!(!dir.path().join("alerts.jsonl").exists());
}

#[test]
fn monitor_empty_replay_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("replay")).unwrap();
    assert_eq!(code(&fw(dir.path(), &monitor_args("replay", "1"))), 3);
    assert_eq!(code(&fw(dir.path(), &monitor_args("mock", "1"))), 3);
}

#[test]
fn monitor_rejects_bad_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "quiet");
    let mut args = monitor_args("replay", "1");
    args.extend(["--fall-threshold-low", "0.9"]);
    assert_eq!(code(&fw(dir.path(), &args)), 2);
}

#[test]
fn answering_no_on_stdin_cancels_the_alarm() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "fall");
    let mut child = Command::new(BIN)
        .current_dir(dir.path())
        .args(monitor_args("replay", "20"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let mut seen = Vec::new();
    for line in lines.by_ref() {
        let line = line.unwrap();
        let prompt = line.starts_with("prompt:");
        seen.push(line);
        if prompt {
            stdin.write_all(b"no\n").unwrap();
            stdin.flush().unwrap();
            break;
        }
    }
    seen.extend(lines.map(Result::unwrap));
    assert!(child.wait().unwrap().success());
    let summary = seen.iter().find(|l| l.starts_with("summary:")).expect("summary line");
    assert!(
        summary.contains("alarms=0 ") && summary.contains("prompts=1"),
        "{seen:?}"
    );
    assert!(!dir.path().join("alerts.jsonl").exists());
}

/// Starts `simulate` and returns the child plus its command address.
/// Callers wait on the child.
#[allow(clippy::zombie_processes)]
fn simulate(dir: &Path, extra: &[&str]) -> (std::process::Child, SocketAddr) {
    let mut child = Command::new(BIN)
        .current_dir(dir)
        .args(["simulate", "--command-port", "0"])
        .args(extra)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let out = child.stdout.as_mut().unwrap();
    let mut reader = BufReader::new(out);
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap() == 0 {
            let status = child.wait();
            panic!("simulate exited early: {status:?}");
        }
        if let Some(addr) = line.trim().strip_prefix("mock drone listening on ") {
            return (child, addr.parse().unwrap());
        }
    }
}

fn ask(sock: &UdpSocket, to: SocketAddr, cmd: &str) -> String {
    sock.send_to(cmd.as_bytes(), to).unwrap();
    let mut buf = [0u8; 256];
    let n = sock.recv(&mut buf).unwrap();
    String::from_utf8_lossy(&buf[..n]).into_owned()
}

fn client() -> UdpSocket {
    let s = UdpSocket::bind("127.0.0.1:0").unwrap();
    s.set_read_timeout(Some(Duration::from_secs(3))).unwrap();
    s
}

#[test]
fn simulate_answers_and_logs_commands() {
    let dir = tempfile::tempdir().unwrap();
    let (child, addr) = simulate(dir.path(), &["--duration", "1.5", "--battery", "0@0s"]);
    let sock = client();
    assert_eq!(ask(&sock, addr, "command"), "ok");
    assert_eq!(ask(&sock, addr, "takeoff"), "error");
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(
        out.contains("command log (2 commands):\n  command\n  takeoff\n"),
        "{out}"
    );
}

#[test]
fn simulate_total_loss_delivers_no_video() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "fall");
    let video = UdpSocket::bind("127.0.0.1:0").unwrap();
    video.set_read_timeout(Some(Duration::from_millis(1500))).unwrap();
    let port = video.local_addr().unwrap().port().to_string();
    let (child, addr) = simulate(
        dir.path(),
        &[
            "--duration",
            "2",
            "--loss",
            "1.0",
            "--replay",
            "replay",
            "--video-port",
            &port,
            "--state-port",
            "0",
        ],
    );
    let sock = client();
    assert_eq!(ask(&sock, addr, "command"), "ok");
    assert_eq!(ask(&sock, addr, "streamon"), "ok");
    let mut buf = [0u8; 2048];
    assert!(video.recv(&mut buf).is_err(), "a datagram got through");
    assert!(child.wait_with_output().unwrap().status.success());
}

#[test]
fn simulate_port_conflict_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let taken = UdpSocket::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = fw(dir.path(), &["simulate", "--command-port", &port, "--duration", "0.1"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
