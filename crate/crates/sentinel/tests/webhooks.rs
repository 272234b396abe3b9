use std::fs;
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use chrono::Utc;
use fallwatch_sentinel::scenario::{fall_script, ScriptedSource};
use fallwatch_sentinel::{
    dispatch_alert, AlertRecord, AlertSinks, BrightnessStub, Monitor, MonitorOptions, Notice, ResponseListener,
    SentinelConfig, StateKind, Transition, Trigger,
};

fn record() -> AlertRecord {
    AlertRecord {
        timestamp: Utc::now(),
        trigger: Trigger::UserConfirmed,
        probability: Some(0.97),
        state_trace: vec![Transition {
            from: StateKind::PromptingHelp,
            to: StateKind::Alarming,
            at_ms: 12,
        }],
        frame_ref: Some("frames/0001.ppm".into()),
    }
}

/// A local webhook answering every request with `status`; returns its URL
/// and the bodies it received.
fn webhook(status: u16) -> (String, Arc<Mutex<Vec<String>>>) {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/alert", server.server_addr().to_ip().unwrap());
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&bodies);
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            seen.lock().unwrap().push(body);
            let _ = req.respond(tiny_http::Response::empty(status));
        }
    });
    (url, bodies)
}

fn dead_url() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}/alert")
}

fn sinks(dir: &std::path::Path, hooks: Vec<String>) -> AlertSinks {
    let mut s = AlertSinks::new(dir.join("alerts.jsonl"), hooks);
    s.timeout = Duration::from_secs(2);
    s
}

#[test]
fn accepted_webhook_is_delivered_once() {
    let dir = tempfile::tempdir().unwrap();
    let (url, bodies) = webhook(200);
    let r = record();
    let report = dispatch_alert(&r, &sinks(dir.path(), vec![url])).unwrap();
    assert!(report.webhooks[0].delivered);
    assert_eq!(report.webhooks[0].attempts, 1);
    assert!(!report.total_failure());
    let got = bodies.lock().unwrap().clone();
    assert_eq!(got.len(), 1);
    let back: AlertRecord = serde_json::from_str(&got[0]).unwrap();
    assert_eq!(back, r);
}

#[test]
fn unreachable_webhook_retries_once_and_still_logs() {
    let dir = tempfile::tempdir().unwrap();
    let report = dispatch_alert(&record(), &sinks(dir.path(), vec![dead_url()])).unwrap();
    let w = &report.webhooks[0];
    assert!(!w.delivered);
    assert_eq!(w.attempts, 2);
    assert!(w.error.is_some());
    assert!(report.total_failure());
    let log = fs::read_to_string(dir.path().join("alerts.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

#[test]
fn server_error_counts_as_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (url, bodies) = webhook(500);
    let report = dispatch_alert(&record(), &sinks(dir.path(), vec![url])).unwrap();
    assert!(!report.webhooks[0].delivered);
    assert_eq!(bodies.lock().unwrap().len(), 2);
}

#[test]
fn one_good_sink_avoids_total_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (good, _) = webhook(200);
    let report = dispatch_alert(&record(), &sinks(dir.path(), vec![dead_url(), good])).unwrap();
    let delivered: Vec<bool> = report.webhooks.iter().map(|w| w.delivered).collect();
    assert_eq!(delivered, [false, true]);
    assert!(!report.total_failure());
}

#[test]
fn log_is_append_only() {
    let dir = tempfile::tempdir().unwrap();
    let s = sinks(dir.path(), vec![]);
    for _ in 0..3 {
        dispatch_alert(&record(), &s).unwrap();
    }
    let log = fs::read_to_string(&s.log_path).unwrap();
    assert_eq!(log.lines().count(), 3);
}

fn post(addr: SocketAddr, body: &str) -> u16 {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    agent
        .post(format!("http://{addr}/respond"))
        .header("Content-Type", "application/json")
        .send(body)
        .unwrap()
        .status()
        .as_u16()
}

#[test]
fn http_answer_reaches_the_monitor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SentinelConfig {
        prompt_timeout: Duration::from_secs(20),
        alert_log_path: dir.path().join("alerts.jsonl"),
        ..Default::default()
    };
    let monitor = Monitor::new(
        cfg,
        MonitorOptions {
            frame_queue: 128,
            ..Default::default()
        },
    )
    .unwrap();
    let listener = ResponseListener::start("127.0.0.1:0".parse().unwrap(), monitor.injector()).unwrap();
    let addr = listener.local_addr();
    assert_eq!(post(addr, "{\"response\":\"maybe\"}"), 400);
    let mut source = ScriptedSource::from_script(&fall_script(), 8, Duration::from_millis(5));
    let s = monitor
        .run(&mut source, &mut BrightnessStub, None, |n| {
            if let Notice::Prompt { .. } = n {
                thread::spawn(move || assert_eq!(post(addr, "{\"response\":\"yes\"}"), 200));
            }
        })
        .unwrap();
    assert_eq!(s.alarms, 1);
    assert_eq!(s.alerts[0].trigger, Trigger::UserConfirmed);
}
