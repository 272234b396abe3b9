use std::time::Duration;

use fallwatch_sentinel::{
    classify_window, complete_alarm, is_legal, step, Action, Decision, EventKind, FrameRef, Machine, MonitorEvent,
    Response, SentinelConfig, StateKind, Trigger,
};
use proptest::prelude::*;

const T0: Duration = Duration::from_secs(10);

fn frame(p: f64, presence: f64) -> MonitorEvent {
    MonitorEvent::FrameScored {
        probability: p,
        presence,
        timestamp: Duration::ZERO,
        frame: FrameRef::named("t"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Act {
    Prompt,
    Timer,
    Move,
    Dispatch(Trigger),
}

fn acts(actions: &[Action]) -> Vec<Act> {
    actions
        .iter()
        .map(|a| match a {
            Action::EmitPrompt { .. } => Act::Prompt,
            Action::ArmTimer { .. } => Act::Timer,
            Action::Reposition => Act::Move,
            Action::DispatchAlert(d) => Act::Dispatch(d.trigger),
        })
        .collect()
}

/// Expected outcome for one representative event of every kind, written out
/// by hand for each of the 24 pairs. `None` means the pair is a no-op.
fn expected(state: StateKind, kind: EventKind) -> Option<(StateKind, Vec<Act>)> {
    use EventKind as E;
    use StateKind as S;
    match (state, kind) {
        // Representative frame: p = 0.9, presence 1.0, empty window.
        (S::Scanning, E::FrameScored) => Some((S::FallSuspected, vec![])),
        (S::Assessing, E::FrameScored) => Some((S::FallSuspected, vec![])),
        (S::FallSuspected, E::FrameScored) => Some((S::FallSuspected, vec![])),
        (S::PromptingHelp, E::FrameScored) => None,
        (S::Alarming, E::FrameScored) => None,
        (S::Repositioning, E::FrameScored) => None,
        // Representative response: yes.
        (S::Scanning, E::UserResponse) => None,
        (S::Assessing, E::UserResponse) => None,
        (S::FallSuspected, E::UserResponse) => None,
        (S::PromptingHelp, E::UserResponse) => Some((S::Alarming, vec![Act::Dispatch(Trigger::UserConfirmed)])),
        (S::Alarming, E::UserResponse) => None,
        (S::Repositioning, E::UserResponse) => None,
        // Representative timeout: at the prompt deadline.
        (S::Scanning, E::Timeout) => None,
        (S::Assessing, E::Timeout) => None,
        (S::FallSuspected, E::Timeout) => None,
        (S::PromptingHelp, E::Timeout) => Some((S::Alarming, vec![Act::Dispatch(Trigger::NoAnswer)])),
        (S::Alarming, E::Timeout) => None,
        (S::Repositioning, E::Timeout) => None,
        (S::Scanning, E::RepositionComplete) => None,
        (S::Assessing, E::RepositionComplete) => None,
        (S::FallSuspected, E::RepositionComplete) => None,
        (S::PromptingHelp, E::RepositionComplete) => None,
        (S::Alarming, E::RepositionComplete) => None,
        (S::Repositioning, E::RepositionComplete) => Some((S::Assessing, vec![])),
    }
}

fn representative(kind: EventKind) -> MonitorEvent {
    match kind {
        EventKind::FrameScored => frame(0.9, 1.0),
        EventKind::UserResponse => MonitorEvent::UserResponse(Response::Yes),
        EventKind::Timeout => MonitorEvent::Timeout,
        EventKind::RepositionComplete => MonitorEvent::RepositionComplete,
    }
}

#[test]
fn all_twenty_four_pairs_follow_the_table() {
    let cfg = SentinelConfig::default();
    let mut checked = 0;
    for state in StateKind::ALL {
        for kind in EventKind::ALL {
            let m = Machine::in_state(state, T0);
            // Timeouts are delivered exactly at the deadline.
            let now = m.deadline.unwrap_or(T0 + Duration::from_secs(1));
            let (next, actions) = step(&m, &representative(kind), &cfg, now);
            match expected(state, kind) {
                None => {
                    assert_eq!(next, m, "{state:?} + {kind:?} must be a no-op");
                    assert!(actions.is_empty(), "{state:?} + {kind:?}");
                    assert!(!is_legal(state, kind), "{state:?} + {kind:?}");
                }
                Some((to, want)) => {
                    assert_eq!(next.state, to, "{state:?} + {kind:?}");
                    assert_eq!(acts(&actions), want, "{state:?} + {kind:?}");
                    assert!(is_legal(state, kind), "{state:?} + {kind:?}");
                    if to != state {
                        assert_eq!(next.entered_at, now);
                    }
                }
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 24);
}

#[test]
fn scanning_ignores_frames_without_presence() {
    let cfg = SentinelConfig::default();
    let m = Machine::default();
    let (next, actions) = step(&m, &frame(0.9, 0.019), &cfg, T0);
    assert_eq!((next, actions), (m, vec![]));
    let (next, _) = step(&Machine::default(), &frame(0.5, 0.02), &cfg, T0);
    assert_eq!(next.state, StateKind::Assessing);
}

fn feed(mut m: Machine, ps: &[f64], cfg: &SentinelConfig) -> (Machine, Vec<Act>) {
    let mut all = Vec::new();
    for &p in ps {
        let (n, a) = step(&m, &frame(p, 1.0), cfg, T0);
        all.extend(acts(&a));
        m = n;
    }
    (m, all)
}

#[test]
fn full_windows_decide() {
    let cfg = SentinelConfig::default();
    let start = Machine::in_state(StateKind::Assessing, T0);
    let (m, a) = feed(start.clone(), &[0.9; 5], &cfg);
    assert_eq!((m.state, a), (StateKind::PromptingHelp, vec![Act::Prompt, Act::Timer]));
    assert_eq!(m.deadline, Some(T0 + cfg.prompt_timeout));
    let (m, a) = feed(start.clone(), &[0.1; 5], &cfg);
    assert_eq!((m.state, a), (StateKind::Scanning, vec![]));
    let (m, a) = feed(start, &[0.5, 0.5, 0.5, 0.5, 0.5], &cfg);
    assert_eq!((m.state, a), (StateKind::Repositioning, vec![Act::Move]));
}

#[test]
fn prompt_answers() {
    let cfg = SentinelConfig::default();
    let m = Machine::in_state(StateKind::PromptingHelp, T0);
    let (n, a) = step(&m, &MonitorEvent::UserResponse(Response::No), &cfg, T0);
    assert_eq!((n.state, a.len()), (StateKind::Scanning, 0));
    assert_eq!(n.deadline, None);
    // Early timeouts change nothing.
    let early = m.deadline.unwrap() - Duration::from_millis(1);
    let (n, a) = step(&m, &MonitorEvent::Timeout, &cfg, early);
    assert_eq!((n, a), (m, vec![]));
}

#[test]
fn prompting_always_has_a_deadline() {
    let cfg = SentinelConfig::default();
    let (m, _) = feed(Machine::in_state(StateKind::Assessing, T0), &[0.9; 5], &cfg);
    assert!(m.deadline.is_some());
    let (m, _) = feed(Machine::in_state(StateKind::Assessing, T0), &[0.5; 5], &cfg);
    assert!(m.deadline.is_none());
}

#[test]
fn alarm_completion_returns_to_scanning() {
    let m = Machine::in_state(StateKind::Alarming, T0);
    let n = complete_alarm(&m, T0);
    assert_eq!(n.state, StateKind::Scanning);
    // Outside Alarming it is a no-op.
    let s = Machine::in_state(StateKind::Assessing, T0);
    assert_eq!(complete_alarm(&s, T0), s);
}

#[derive(Debug, Clone)]
enum Ev {
    Frame(f64, f64),
    Answer(bool),
    Timeout(u64),
    Moved,
}

fn ev() -> impl Strategy<Value = Ev> {
    prop_oneof![
        6 => (prop_oneof![0.0..0.35f64, 0.35..0.65f64, 0.65..=1.0f64], prop_oneof![Just(0.0), 0.0..0.5f64])
            .prop_map(|(p, s)| Ev::Frame(p, s)),
        1 => any::<bool>().prop_map(Ev::Answer),
        1 => (0u64..60_000).prop_map(Ev::Timeout),
        1 => Just(Ev::Moved),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn at_most_one_alarm_per_episode(events in prop::collection::vec(ev(), 1..120), debounce in 1usize..6) {
        let cfg = SentinelConfig { debounce_frames: debounce, ..Default::default() };
        let mut m = Machine::default();
        let mut now = Duration::ZERO;
        let mut alarms = 0;
        let mut alarming_entries = 0;
        // Frames that reached a debounce window since the last alarm.
        let mut assessed_since_alarm = usize::MAX;
        for e in &events {
            now += Duration::from_millis(33);
            let event = match *e {
                Ev::Frame(p, s) => frame(p, s),
                Ev::Answer(yes) => MonitorEvent::UserResponse(if yes { Response::Yes } else { Response::No }),
                Ev::Timeout(ms) => {
                    now += Duration::from_millis(ms);
                    MonitorEvent::Timeout
                }
                Ev::Moved => MonitorEvent::RepositionComplete,
            };
            let before = m.clone();
            let (next, actions) = step(&m, &event, &cfg, now);
            prop_assert_eq!(step(&m, &event, &cfg, now), (next.clone(), actions.clone()), "step is pure");
            // A frame joins a debounce window exactly when it changes the machine.
            if matches!(event, MonitorEvent::FrameScored { .. }) && next != before {
                assessed_since_alarm = assessed_since_alarm.saturating_add(1);
            }
            let dispatches = actions.iter().filter(|a| matches!(a, Action::DispatchAlert(_))).count();
            prop_assert!(dispatches <= 1);
            if next.state == StateKind::Alarming && before.state != StateKind::Alarming {
                alarming_entries += 1;
            }
            m = next;
            if dispatches == 1 {
                prop_assert_eq!(m.state, StateKind::Alarming);
                prop_assert!(assessed_since_alarm >= debounce, "re-alarmed after {} frames", assessed_since_alarm);
                alarms += 1;
                assessed_since_alarm = 0;
                m = complete_alarm(&m, now);
                prop_assert!(m.window().is_empty());
            }
            if m.state == StateKind::PromptingHelp {
                prop_assert!(m.deadline.is_some());
            }
        }
        prop_assert_eq!(alarms, alarming_entries);
    }

    #[test]
    fn timeouts_never_fire_early(offset_ms in 0u64..30_000, early in any::<bool>()) {
        let cfg = SentinelConfig::default();
        let m = Machine::in_state(StateKind::PromptingHelp, T0);
        let deadline = m.deadline.unwrap();
        let now = if early { deadline - Duration::from_millis(offset_ms.min(999) + 1) } else { deadline + Duration::from_millis(offset_ms) };
        let (n, _) = step(&m, &MonitorEvent::Timeout, &cfg, now);
        prop_assert_eq!(n.state == StateKind::Alarming, now >= deadline);
    }

    #[test]
    fn window_votes_match_the_band_rule(ps in prop::collection::vec(0.0..=1.0f64, 5)) {
        let cfg = SentinelConfig::default();
        let d = classify_window(&ps, &cfg);
        let high = ps.iter().filter(|&&p| p >= 0.65).count();
        let low = ps.iter().filter(|&&p| p <= 0.35).count();
        let want = if high == 5 { Decision::Fall } else if low == 5 { Decision::NoFall } else { Decision::Uncertain };
        prop_assert!(!d.pending);
        prop_assert_eq!(d.decision, want);
    }
}
