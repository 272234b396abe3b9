//! The running monitor: ingestion, inference and the state-machine loop.
//!
//! Frames flow source → drop-oldest frame queue → inference worker → event
//! queue → event loop. The event queue is bounded and blocking, so scored
//! frames, responses and timer events are never lost. Only the loop touches
//! the [`Machine`] and only the loop dispatches alerts.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use chrono::Utc;
use fallwatch::dataset::encode_ppm;
use fallwatch_link::{CommandChannel, CommandResult, DropOldestQueue, FrameSource, Pop, TimedFrame};

use crate::alert::{dispatch_alert, AlertRecord, AlertSinks, DeliveryReport};
use crate::config::SentinelConfig;
use crate::fsm::{
    complete_alarm, is_legal, step, Action, AlarmDraft, FrameRef, Machine, MonitorEvent, Response, StateKind,
    Transition,
};
use crate::presence::{FrameScorer, PresenceGate};
use crate::SentinelError;

pub const REPOSITION_COMMAND: &str = "right 30";
pub const REPOSITION_FALLBACK: Duration = Duration::from_secs(3);
const TICK: Duration = Duration::from_millis(50);

#[derive(Debug, Clone)]
pub struct MonitorOptions {
    pub frame_queue: usize,
    pub event_queue: usize,
    pub reposition_command: String,
    /// Repositioning counts as complete this long after the command when
    /// no ACK arrives.
    pub reposition_fallback: Duration,
    /// Evidence frames are written here as PPM when set.
    pub evidence_dir: Option<PathBuf>,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        MonitorOptions {
            frame_queue: 8,
            event_queue: 64,
            reposition_command: REPOSITION_COMMAND.to_string(),
            reposition_fallback: REPOSITION_FALLBACK,
            evidence_dir: None,
        }
    }
}

enum Envelope {
    Scored(MonitorEvent),
    Response(Response),
    TimerFired { deadline: Duration },
    RepositionDone { seq: u64, ack: Option<CommandResult> },
    SourceEnded,
    Failed(SentinelError),
}

/// Feeds user answers into a running monitor.
#[derive(Clone)]
pub struct Injector {
    tx: SyncSender<Envelope>,
}

impl Injector {
    /// False once the monitor has stopped.
    pub fn respond(&self, response: Response) -> bool {
        self.tx.send(Envelope::Response(response)).is_ok()
    }
}

/// Things a front end may want to show as they happen.
#[derive(Debug, Clone)]
pub enum Notice {
    Transition(Transition),
    Prompt {
        deadline: Duration,
    },
    Reposition {
        ack: Option<CommandResult>,
    },
    Alert {
        record: AlertRecord,
        report: DeliveryReport,
    },
    Ignored {
        state: StateKind,
        event: &'static str,
    },
}

#[derive(Debug, Clone)]
pub struct MonitorSummary {
    pub frames: u64,
    pub alarms: u64,
    pub drops: u64,
    pub repositions: u64,
    pub prompts: u64,
    pub final_state: StateKind,
    pub alerts: Vec<AlertRecord>,
    pub transitions: Vec<Transition>,
    pub interrupted: bool,
}

impl std::fmt::Display for MonitorSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "frames={} alarms={} drops={} repositions={} prompts={} final_state={}",
            self.frames, self.alarms, self.drops, self.repositions, self.prompts, self.final_state
        )
    }
}

pub struct Monitor {
    config: SentinelConfig,
    options: MonitorOptions,
    sinks: AlertSinks,
    interrupt: Arc<AtomicBool>,
    tx: SyncSender<Envelope>,
    rx: Receiver<Envelope>,
}

fn event_name(e: &MonitorEvent) -> &'static str {
    match e {
        MonitorEvent::FrameScored { .. } => "FrameScored",
        MonitorEvent::UserResponse(_) => "UserResponse",
        MonitorEvent::Timeout => "Timeout",
        MonitorEvent::RepositionComplete => "RepositionComplete",
    }
}

/// Sleeps until `at` in monitor time, then sends `msg` unless stopped first.
fn spawn_timer(tx: SyncSender<Envelope>, start: Instant, at: Duration, stop: Arc<AtomicBool>, msg: Envelope) {
    thread::spawn(move || {
        while !stop.load(Ordering::Relaxed) {
            let now = start.elapsed();
            if now >= at {
                let _ = tx.send(msg);
                return;
            }
            thread::sleep((at - now).min(TICK));
        }
    });
}

impl Monitor {
    pub fn new(config: SentinelConfig, options: MonitorOptions) -> Result<Self, SentinelError> {
        config.validate()?;
        if options.frame_queue < 1 || options.event_queue < 1 {
            return Err(SentinelError::Config("queue capacities must be at least 1".into()));
        }
        let sinks = AlertSinks::new(config.alert_log_path.clone(), config.contacts.clone());
        let (tx, rx) = mpsc::sync_channel(options.event_queue);
        Ok(Monitor {
            config,
            options,
            sinks,
            interrupt: Arc::new(AtomicBool::new(false)),
            tx,
            rx,
        })
    }

    pub fn injector(&self) -> Injector {
        Injector { tx: self.tx.clone() }
    }

    /// Setting the flag ends [`Monitor::run`] with a summary.
    pub fn interrupt_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.interrupt)
    }

    pub fn sinks_mut(&mut self) -> &mut AlertSinks {
        &mut self.sinks
    }

    /// Runs until the source ends and no prompt or reposition is pending,
    /// or until interrupted.
    pub fn run(
        self,
        source: &mut dyn FrameSource,
        scorer: &mut dyn FrameScorer,
        channel: Option<&mut dyn CommandChannel>,
        mut notice: impl FnMut(&Notice),
    ) -> Result<MonitorSummary, SentinelError> {
        let Monitor {
            config,
            options,
            sinks,
            interrupt,
            tx,
            rx,
        } = self;
        let start = Instant::now();
        let frames_in = DropOldestQueue::<TimedFrame>::new(options.frame_queue);
        let source_stop = source.stop_flag();
        let timers_stop = Arc::new(AtomicBool::new(false));
        let (move_tx, move_rx) = mpsc::channel::<u64>();
        let has_channel = channel.is_some();

        thread::scope(|s| {
            let ingest = s.spawn(|| {
                let mut seen = 0u64;
                while let Some(frame) = source.next_frame() {
                    seen += 1;
                    frames_in.push(frame);
                }
                frames_in.close();
                (seen, source.dropped())
            });

            let infer_tx = tx.clone();
            let frames_ref = &frames_in;
            s.spawn(move || {
                let mut gate = PresenceGate::new();
                loop {
                    let frame = match frames_ref.pop_timeout(TICK) {
                        Pop::Item(f) => f,
                        Pop::TimedOut => continue,
                        Pop::Closed => break,
                    };
                    let presence = gate.observe(&frame.image);
                    let msg = match scorer.score(&frame.image) {
                        Ok(probability) => Envelope::Scored(MonitorEvent::FrameScored {
                            probability,
                            presence,
                            timestamp: frame.timestamp,
                            frame: FrameRef {
                                origin: frame.origin,
                                image: Some(Arc::new(frame.image)),
                            },
                        }),
                        Err(e) => Envelope::Failed(e),
                    };
                    if infer_tx.send(msg).is_err() {
                        return;
                    }
                }
                let _ = infer_tx.send(Envelope::SourceEnded);
            });

            if let Some(channel) = channel {
                let act_tx = tx.clone();
                let command = options.reposition_command.clone();
                s.spawn(move || {
                    for seq in move_rx {
                        let ack = match channel.send_command(&command) {
                            Ok(r) => Some(r),
                            Err(e) => {
                                log::warn!("reposition command failed: {e}");
                                None
                            }
                        };
                        if ack.as_ref().is_some_and(|r| r.is_ok()) {
                            let _ = act_tx.send(Envelope::RepositionDone { seq, ack });
                        } else {
                            log::warn!("no ACK for {command:?}; waiting for the fallback");
                        }
                    }
                });
            } else {
                drop(move_rx);
            }

            let mut machine = Machine::new(Duration::ZERO);
            let mut summary = MonitorSummary {
                frames: 0,
                alarms: 0,
                drops: 0,
                repositions: 0,
                prompts: 0,
                final_state: StateKind::Scanning,
                alerts: Vec::new(),
                transitions: Vec::new(),
                interrupted: false,
            };
            let mut move_seq = 0u64;
            let mut source_done = false;

            let outcome: Result<(), SentinelError> = 'events: loop {
                if interrupt.load(Ordering::Relaxed) {
                    summary.interrupted = true;
                    break Ok(());
                }
                if source_done && !matches!(machine.state, StateKind::PromptingHelp | StateKind::Repositioning) {
                    break Ok(());
                }
                let envelope = match rx.recv_timeout(TICK) {
                    Ok(e) => e,
                    Err(RecvTimeoutError::Timeout) => continue,
                    Err(RecvTimeoutError::Disconnected) => break Ok(()),
                };
                let event = match envelope {
                    Envelope::Scored(e) => {
                        summary.frames += 1;
                        e
                    }
                    Envelope::Response(r) => MonitorEvent::UserResponse(r),
                    Envelope::TimerFired { deadline } => {
                        if machine.deadline != Some(deadline) {
                            log::debug!("stale prompt timer for {deadline:?}");
                            continue;
                        }
                        MonitorEvent::Timeout
                    }
                    Envelope::RepositionDone { seq, ack } => {
                        if machine.state != StateKind::Repositioning || seq != move_seq {
                            log::debug!("stale reposition completion {seq}");
                            continue;
                        }
                        notice(&Notice::Reposition { ack });
                        MonitorEvent::RepositionComplete
                    }
                    Envelope::SourceEnded => {
                        source_done = true;
                        continue;
                    }
                    Envelope::Failed(e) => break Err(e),
                };

                let now = start.elapsed();
                if !is_legal(machine.state, event.kind()) {
                    log::debug!("{} ignored in {}", event_name(&event), machine.state);
                    if !matches!(event, MonitorEvent::FrameScored { .. }) {
                        notice(&Notice::Ignored {
                            state: machine.state,
                            event: event_name(&event),
                        });
                    }
                    continue;
                }
                let (next, actions) = step(&machine, &event, &config, now);
                for t in next.transitions_since(&machine) {
                    log_transition(&t, &mut notice, &mut summary);
                }
                machine = next;

                for action in actions {
                    match action {
                        Action::EmitPrompt { deadline } => {
                            summary.prompts += 1;
                            notice(&Notice::Prompt { deadline });
                        }
                        Action::ArmTimer { deadline } => spawn_timer(
                            tx.clone(),
                            start,
                            deadline,
                            Arc::clone(&timers_stop),
                            Envelope::TimerFired { deadline },
                        ),
                        Action::Reposition => {
                            summary.repositions += 1;
                            move_seq += 1;
                            let fallback = start.elapsed() + options.reposition_fallback;
                            if has_channel {
                                let _ = move_tx.send(move_seq);
                                spawn_timer(
                                    tx.clone(),
                                    start,
                                    fallback,
                                    Arc::clone(&timers_stop),
                                    Envelope::RepositionDone {
                                        seq: move_seq,
                                        ack: None,
                                    },
                                );
                            } else if tx
                                .try_send(Envelope::RepositionDone {
                                    seq: move_seq,
                                    ack: None,
                                })
                                .is_err()
                            {
                                spawn_timer(
                                    tx.clone(),
                                    start,
                                    Duration::ZERO,
                                    Arc::clone(&timers_stop),
                                    Envelope::RepositionDone {
                                        seq: move_seq,
                                        ack: None,
                                    },
                                );
                            }
                        }
                        Action::DispatchAlert(draft) => {
                            match emit_alert(&draft, &sinks, options.evidence_dir.as_deref()) {
                                Ok((record, report)) => {
                                    summary.alarms += 1;
                                    notice(&Notice::Alert {
                                        record: record.clone(),
                                        report,
                                    });
                                    summary.alerts.push(record);
                                }
                                Err(e) => break 'events Err(e),
                            }
                            let next = complete_alarm(&machine, start.elapsed());
                            for t in next.transitions_since(&machine) {
                                log_transition(&t, &mut notice, &mut summary);
                            }
                            machine = next;
                        }
                    }
                }
            };

            // Unblock and retire the workers.
            source_stop.store(true, Ordering::Relaxed);
            timers_stop.store(true, Ordering::Relaxed);
            frames_in.close();
            drop(move_tx);
            drop(rx);
            let (_seen, source_drops) = ingest.join().unwrap_or((0, 0));
            summary.drops = source_drops + frames_in.evicted();
            summary.final_state = machine.state;
            outcome.map(|()| summary)
        })
    }
}

fn log_transition(t: &Transition, notice: &mut impl FnMut(&Notice), summary: &mut MonitorSummary) {
    log::info!("[{:>8.3}s] {} -> {}", t.at_ms as f64 / 1000.0, t.from, t.to);
    notice(&Notice::Transition(*t));
    summary.transitions.push(*t);
}

fn emit_alert(
    draft: &AlarmDraft,
    sinks: &AlertSinks,
    evidence_dir: Option<&std::path::Path>,
) -> Result<(AlertRecord, DeliveryReport), SentinelError> {
    let now = Utc::now();
    let mut saved = None;
    if let (Some(dir), Some(image)) = (evidence_dir, draft.evidence.as_ref().and_then(|f| f.image.as_ref())) {
        let path = dir.join(format!("evidence-{}.ppm", now.format("%Y%m%dT%H%M%S%.3f")));
        match encode_ppm(image)
            .map_err(|e| e.to_string())
            .and_then(|b| std::fs::write(&path, b).map_err(|e| e.to_string()))
        {
            Ok(()) => saved = Some(path),
            Err(e) => log::warn!("cannot save evidence frame: {e}"),
        }
    }
    let record = AlertRecord::from_draft(draft, now, saved.as_deref());
    let report = dispatch_alert(&record, sinks)?;
    Ok((record, report))
}

/// [`Monitor::run`] with default options and no notices.
pub fn run_monitor(
    source: &mut dyn FrameSource,
    scorer: &mut dyn FrameScorer,
    config: &SentinelConfig,
    channel: Option<&mut dyn CommandChannel>,
) -> Result<MonitorSummary, SentinelError> {
    Monitor::new(config.clone(), MonitorOptions::default())?.run(source, scorer, channel, |_| {})
}
