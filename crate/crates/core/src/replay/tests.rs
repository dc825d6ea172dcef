use super::*;
use crate::protocol::{ControlEventMessage, Data, MediaEventMessage, Value};

fn entry(seq: u64, at: u64, message: EventMessage) -> SessionLogEntry {
    SessionLogEntry {
        global_seq: seq,
        sender_id: "alice".into(),
        received_at: at,
        message,
        error: None,
    }
}

fn add_image(seq: u64, at: u64) -> SessionLogEntry {
    let msg = ControlEventMessage {
        control_type: ControlType::AddMaterial,
        seq_id: seq,
        timestamp: at,
        description: "add image".into(),
        data: Some(Data::from([
            ("media-id".into(), Value::from("img")),
            ("media-type".into(), Value::from("image")),
            ("source".into(), Value::from("x.png")),
        ])),
    };
    entry(seq, at, msg.into())
}

fn scroll(seq: u64, at: u64, delta: f64) -> SessionLogEntry {
    let msg = MediaEventMessage {
        media_type: MediaType::Image,
        media_id: "img".into(),
        event_type: "mouse-scroll".into(),
        seq_id: seq,
        timestamp: at,
        description: "zoom".into(),
        data: Some(Data::from([("delta".into(), Value::num(delta))])),
    };
    entry(seq, at, msg.into())
}

fn log() -> Vec<SessionLogEntry> {
    vec![add_image(0, 5000), scroll(1, 6000, 2.0), scroll(2, 6000, -3.0), scroll(3, 9500, 1.0)]
}

fn zoom(states: &StateMap) -> f64 {
    match &states["img"].body {
        crate::media::MediaBody::Image(i) => i.zoom,
        _ => panic!("expected image"),
    }
}

#[test]
fn nothing_before_the_first_entry() {
    let tree = HandlerTree::standard();
    let mut replay = Replayer::new(log(), &tree);
    assert!(replay.replay_to(0).unwrap().is_empty());
    assert!(replay.states().is_empty());
    assert!(replay.replay_to(0).unwrap().is_empty());
}

#[test]
fn replay_to_pops_in_order_and_is_idempotent() {
    let tree = HandlerTree::standard();
    let mut replay = Replayer::new(log(), &tree);
    let emitted = replay.replay_to(6000).unwrap();
    assert_eq!(emitted.iter().map(|e| e.global_seq).collect::<Vec<_>>(), [0, 1, 2]);
    assert!(replay.replay_to(6000).unwrap().is_empty());
    assert!((zoom(replay.states()) - 2f64.powf(-0.1)).abs() < 1e-12);
    assert!(matches!(replay.replay_to(10), Err(ReplayError::Backwards { .. })));
    replay.replay_to_end();
    assert!(replay.is_finished());
}

#[test]
fn ties_order_by_global_seq() {
    let tree = HandlerTree::standard();
    let mut shuffled = log();
    shuffled.swap(1, 2);
    let replay = Replayer::new(shuffled, &tree);
    assert_eq!(replay.entries().iter().map(|e| e.global_seq).collect::<Vec<_>>(), [0, 1, 2, 3]);
}

#[test]
fn seek_equals_fresh_replay() {
    let tree = HandlerTree::standard();
    let mut full = Replayer::new(log(), &tree);
    full.replay_to_end();
    let mut seeker = Replayer::new(log(), &tree);
    for t in [9500, 6000, 0, 9500, 5999, 20_000] {
        let mut fresh = Replayer::new(log(), &tree);
        fresh.replay_to(t).unwrap();
        assert_eq!(seeker.seek(t), fresh.states(), "t = {t}");
    }
    assert_eq!(seeker.states(), full.states());
}

#[test]
fn error_entries_are_skipped() {
    let tree = HandlerTree::standard();
    let mut entries = log();
    entries[3].error = Some("rejected live".into());
    let mut replay = Replayer::new(entries, &tree);
    replay.replay_to_end();
    assert_eq!(replay.faults(), [ReplayFault { global_seq: 3, reason: "rejected live".into() }]);
    assert!((zoom(replay.states()) - 2f64.powf(-0.1)).abs() < 1e-12);
}

#[test]
fn timed_run_follows_the_pace() {
    let tree = HandlerTree::standard();
    for pace in [1.0, 2.0, 4.0] {
        let clock = VirtualClock::new();
        let mut replay = Replayer::new(log(), &tree);
        let mut seen = Vec::new();
        let mut sink = |e: &SessionLogEntry, at: Duration| {
            seen.push((e.global_seq, at));
            Ok(())
        };
        let run = replay.run_timed(pace, &clock, &mut sink).unwrap();
        assert_eq!(run.emitted, 4);
        assert_eq!(run.max_deviation, Duration::ZERO);
        assert_eq!(seen[0].1, Duration::from_secs_f64(5.0 / pace));
        assert_eq!(run.wall(), Duration::from_secs_f64(9.5 / pace));
    }
    assert!(matches!(
        Replayer::new(log(), &tree).run_timed(0.0, &VirtualClock::new(), &mut |_: &SessionLogEntry, _| Ok(())),
        Err(ReplayError::InvalidPace(_))
    ));
}

#[test]
fn sink_failure_preserves_position_for_resume() {
    let tree = HandlerTree::standard();
    let mut once = Replayer::new(log(), &tree);
    once.replay_to_end();

    let clock = VirtualClock::new();
    let mut replay = Replayer::new(log(), &tree);
    let mut calls = 0;
    let mut flaky = |_: &SessionLogEntry, _| {
        calls += 1;
        if calls == 3 {
            Err("socket closed".to_string())
        } else {
            Ok(())
        }
    };
    let err = replay.run_timed(1.0, &clock, &mut flaky).unwrap_err();
    assert_eq!(err, ReplayError::Sink { position: 2, reason: "socket closed".into() });
    assert_eq!(replay.position(), 2);
    let run = replay.run_timed(1.0, &clock, &mut |_: &SessionLogEntry, _| Ok(())).unwrap();
    assert_eq!(run.emitted, 2);
    assert_eq!(replay.states(), once.states());
}

#[test]
fn empty_log_completes_immediately() {
    let tree = HandlerTree::standard();
    let mut replay = Replayer::new(Vec::new(), &tree);
    let run = replay.run_timed(1.0, &RealClock::new(), &mut |_: &SessionLogEntry, _| Ok(())).unwrap();
    assert_eq!(run.emitted, 0);
    assert!(run.wall() < TIMING_TOLERANCE);
}

#[test]
fn real_clock_emission_within_tolerance() {
    let tree = HandlerTree::standard();
    let entries = vec![add_image(0, 0), scroll(1, 120, 1.0), scroll(2, 240, 1.0), scroll(3, 400, -1.0)];
    for pace in [1.0, 2.0] {
        let mut replay = Replayer::new(entries.clone(), &tree);
        let run = replay.run_timed(pace, &RealClock::new(), &mut |_: &SessionLogEntry, _| Ok(())).unwrap();
        assert!(run.max_deviation <= TIMING_TOLERANCE, "{:?}", run.max_deviation);
        let ideal = Duration::from_secs_f64(0.4 / pace);
        assert!(run.wall().abs_diff(ideal) <= TIMING_TOLERANCE * 4);
    }
}
