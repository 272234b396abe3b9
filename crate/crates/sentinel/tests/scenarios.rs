use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::Ordering;
use std::thread;
use std::time::{Duration, Instant};

use fallwatch::Tensor;
use fallwatch_link::{MockConfig, MockDrone, MockWire, TelloClient, VideoReceiver};
use fallwatch_sentinel::scenario::{fall_script, quiet_script, uncertain_script, write_script, Script, ScriptedSource};
use fallwatch_sentinel::{
    BrightnessStub, FrameScorer, Monitor, MonitorOptions, MonitorSummary, Notice, Response, SentinelConfig,
    SentinelError, StateKind, Trigger,
};

const PERIOD: Duration = Duration::from_millis(5);

fn config(dir: &Path) -> SentinelConfig {
    SentinelConfig {
        prompt_timeout: Duration::from_millis(400),
        alert_log_path: dir.join("alerts.jsonl"),
        ..Default::default()
    }
}

fn options() -> MonitorOptions {
    MonitorOptions {
        frame_queue: 128,
        ..Default::default()
    }
}

fn run_script(script: &Script, dir: &Path, answer: Option<Response>) -> MonitorSummary {
    let monitor = Monitor::new(config(dir), options()).unwrap();
    let injector = monitor.injector();
    let mut source = ScriptedSource::from_script(script, 8, PERIOD);
    monitor
        .run(&mut source, &mut BrightnessStub, None, |n| {
            if let (Notice::Prompt { .. }, Some(r)) = (n, answer) {
                let inj = injector.clone();
                thread::spawn(move || inj.respond(r));
            }
        })
        .unwrap()
}

fn log_lines(dir: &Path) -> Vec<serde_json::Value> {
    match fs::read_to_string(dir.join("alerts.jsonl")) {
        Ok(text) => text
            .lines()
            .map(|l| serde_json::from_str(l).expect("valid JSON line"))
            .collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn unanswered_fall_raises_one_no_answer_alarm() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_script(&fall_script(), dir.path(), None);
    assert_eq!(s.frames, 50);
    assert_eq!((s.alarms, s.prompts), (1, 1));
    assert_eq!(s.alerts[0].trigger, Trigger::NoAnswer);
    assert_eq!(s.final_state, StateKind::Scanning);
    let lines = log_lines(dir.path());
    assert_eq!(lines.len(), 1);
    let mut keys: Vec<_> = lines[0].as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["frameRef", "probability", "stateTrace", "timestamp", "trigger"]);
    assert_eq!(lines[0]["trigger"], "no-answer");
    assert!(lines[0]["probability"].as_f64().unwrap() >= 0.65);
}

#[test]
fn prompt_deadline_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_script(&fall_script(), dir.path(), None);
    let prompt = s.transitions.iter().find(|t| t.to == StateKind::PromptingHelp).unwrap();
    let alarm = s.transitions.iter().find(|t| t.to == StateKind::Alarming).unwrap();
    assert!(alarm.at_ms - prompt.at_ms >= 400, "{prompt:?} {alarm:?}");
    // One event-loop tick of slack.
    assert!(alarm.at_ms - prompt.at_ms < 400 + 250, "{prompt:?} {alarm:?}");
}

#[test]
fn quiet_scene_raises_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_script(&quiet_script(), dir.path(), None);
    assert_eq!((s.frames, s.alarms, s.prompts, s.repositions), (50, 0, 0, 0));
    assert_eq!(s.final_state, StateKind::Scanning);
    assert!(s.transitions.is_empty());
    assert!(log_lines(dir.path()).is_empty());
}

#[test]
fn answering_no_cancels_the_alarm() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_script(&fall_script(), dir.path(), Some(Response::No));
    assert_eq!((s.prompts, s.alarms), (1, 0));
    assert!(log_lines(dir.path()).is_empty());
}

#[test]
fn answering_yes_confirms_the_alarm() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_script(&fall_script(), dir.path(), Some(Response::Yes));
    assert_eq!(s.alarms, 1);
    assert_eq!(log_lines(dir.path())[0]["trigger"], "user-confirmed");
}

#[test]
fn uncertain_window_without_a_drone_completes_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_script(&uncertain_script(), dir.path(), None);
    assert_eq!((s.repositions, s.alarms), (1, 0));
    assert!(s
        .transitions
        .iter()
        .any(|t| t.from == StateKind::Repositioning && t.to == StateKind::Assessing));
}

#[test]
fn alert_log_count_matches_alarming_entries() {
    let dir = tempfile::tempdir().unwrap();
    // The gap outlasts the first prompt so the second fall is a new episode.
    let script = vec![(0.2, 10), (0.9, 10), (0.2, 150), (0.9, 10), (0.2, 10)];
    let s = run_script(&script, dir.path(), None);
    let entries = s.transitions.iter().filter(|t| t.to == StateKind::Alarming).count();
    assert_eq!(s.alarms as usize, entries);
    assert_eq!(log_lines(dir.path()).len(), entries);
    assert_eq!(entries, 2);
}

#[test]
fn evidence_frame_is_saved() {
    let dir = tempfile::tempdir().unwrap();
    let opts = MonitorOptions {
        evidence_dir: Some(dir.path().to_path_buf()),
        ..options()
    };
    let monitor = Monitor::new(config(dir.path()), opts).unwrap();
    let mut source = ScriptedSource::from_script(&fall_script(), 8, PERIOD);
    let s = monitor.run(&mut source, &mut BrightnessStub, None, |_| {}).unwrap();
    let path = s.alerts[0].frame_ref.clone().unwrap();
    let image = fallwatch::dataset::load_image(&path).unwrap();
    assert!(image.mean() > 0.85);
}

#[test]
fn interrupt_stops_a_long_run() {
    let dir = tempfile::tempdir().unwrap();
    let monitor = Monitor::new(config(dir.path()), options()).unwrap();
    let flag = monitor.interrupt_flag();
    let mut source = ScriptedSource::from_script(&[(0.2, 10_000)], 4, Duration::from_millis(10));
    let started = Instant::now();
    thread::spawn(move || {
        thread::sleep(Duration::from_millis(200));
        flag.store(true, Ordering::Relaxed);
    });
    let s = monitor.run(&mut source, &mut BrightnessStub, None, |_| {}).unwrap();
    assert!(s.interrupted);
    assert!(started.elapsed() < Duration::from_secs(3));
    assert!(s.frames > 0 && s.frames < 10_000);
}

struct Broken;

impl FrameScorer for Broken {
    fn score(&mut self, _: &Tensor<f32>) -> Result<f64, SentinelError> {
        Err(SentinelError::Model("boom".into()))
    }
}

#[test]
fn scorer_failure_ends_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let monitor = Monitor::new(config(dir.path()), options()).unwrap();
    let mut source = ScriptedSource::from_script(&quiet_script(), 4, PERIOD);
    let err = monitor.run(&mut source, &mut Broken, None, |_| {}).unwrap_err();
    assert!(matches!(err, SentinelError::Model(_)));
}

#[test]
fn unwritable_alert_log_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SentinelConfig {
        alert_log_path: dir.path().join("no/such/dir/alerts.jsonl"),
        ..config(dir.path())
    };
    let monitor = Monitor::new(cfg, options()).unwrap();
    let mut source = ScriptedSource::from_script(&fall_script(), 4, PERIOD);
    let err = monitor.run(&mut source, &mut BrightnessStub, None, |_| {}).unwrap_err();
    assert!(matches!(err, SentinelError::AlertLog { .. }));
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = SentinelConfig {
        debounce_frames: 0,
        ..Default::default()
    };
    assert!(matches!(Monitor::new(cfg, options()), Err(SentinelError::Config(_))));
}

fn any_port() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

/// Streams `script` from the mock drone into the monitor; returns the
/// summary and the mock's command log.
fn over_the_wire(script: &Script, dir: &Path) -> (MonitorSummary, Vec<String>) {
    let replay = dir.join("replay");
    write_script(&replay, script, 16).unwrap();
    let rx = VideoReceiver::bind(any_port(), 128).unwrap();
    let mut drone = MockDrone::start(MockConfig {
        command_port: 0,
        state_port: 0,
        video_port: rx.local_addr().port(),
        replay_dir: Some(replay),
        fps: 60.0,
        ..Default::default()
    })
    .unwrap();
    let mut client = TelloClient::connect(drone.command_addr(), Duration::from_secs(2)).unwrap();
    assert!(client.send("command").unwrap().is_ok());
    assert!(client.send("streamon").unwrap().is_ok());
    let mut source = MockWire::new(rx);
    let monitor = Monitor::new(config(dir), options()).unwrap();
    let summary = monitor
        .run(&mut source, &mut BrightnessStub, Some(&mut client), |_| {})
        .unwrap();
    let log = drone.stop();
    (summary, log)
}

#[test]
fn mock_drone_fall_replay_raises_one_alarm() {
    let dir = tempfile::tempdir().unwrap();
    let (s, log) = over_the_wire(&fall_script(), dir.path());
    assert_eq!(s.frames, 50);
    assert_eq!(s.drops, 0);
    assert_eq!(s.alarms, 1);
    assert_eq!(s.alerts[0].trigger, Trigger::NoAnswer);
    assert_eq!(log_lines(dir.path()).len(), 1);
    assert_eq!(log, ["command", "streamon"]);
}

#[test]
fn mock_drone_quiet_replay_raises_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (s, _) = over_the_wire(&quiet_script(), dir.path());
    assert_eq!((s.alarms, s.final_state), (0, StateKind::Scanning));
    assert!(log_lines(dir.path()).is_empty());
}

#[test]
fn mock_drone_sees_exactly_one_reposition() {
    let dir = tempfile::tempdir().unwrap();
    let (s, log) = over_the_wire(&uncertain_script(), dir.path());
    assert_eq!(s.repositions, 1);
    assert_eq!(log.iter().filter(|c| *c == "right 30").count(), 1, "{log:?}");
    assert_eq!(s.alarms, 0);
}
