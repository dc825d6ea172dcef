use mediasync_core::bandwidth::{BandwidthReport, Direction, Traffic};
use mediasync_core::handler::HandlerTree;
use mediasync_core::media::{
    apply_event, decode_points, deserialize_state, encode_points, initial_state, serialize_state, taxonomy,
    DataKey, EventTaxonomyEntry, MediaState, StateMap,
};
use mediasync_core::protocol::{
    deserialize, serialize, ControlEventMessage, ControlType, Data, DataKind, EventMessage, MediaEventMessage,
    MediaType, Num, Value,
};
use mediasync_core::session::{decode_log, encode_log, SessionLogEntry};
use proptest::prelude::*;
use proptest::sample::select;

fn media_id(media_type: MediaType) -> String {
    format!("{media_type}-block")
}

fn number_for(key: &str) -> BoxedStrategy<f64> {
    match key {
        "delta" => (-60.0..60.0).boxed(),
        "current_time" => (-5.0..7200.0).boxed(),
        "volume" => (-0.5..1.5).boxed(),
        "rate" => (0.0..20.0).boxed(),
        "width" => (0.0..0.3).boxed(),
        "page" => (1u32..60).prop_map(f64::from).boxed(),
        _ => (-0.25..1.25).boxed(),
    }
}

fn text_for(key: &str) -> BoxedStrategy<String> {
    match key {
        "url" => "https://a\\.example/[a-z]{1,6}".boxed(),
        "selector" => "#[a-z]{1,8}".boxed(),
        "color" => "#[0-9a-f]{6}".boxed(),
        "stroke_id" => "s[0-4]".boxed(),
        "target" => "[a-z][a-z-]{0,14}".boxed(),
        _ => "\\PC{0,24}".boxed(),
    }
}

fn points() -> impl Strategy<Value = Vec<Num>> {
    ((0i32..=1000, 0i32..=1000), prop::collection::vec((-40i32..=40, -40i32..=40), 0..24)).prop_map(|(first, rest)| {
        let mut out = vec![Num::from(first.0), Num::from(first.1)];
        for (dx, dy) in rest {
            out.push(Num::from(dx));
            out.push(Num::from(dy));
        }
        out
    })
}

fn value_for(key: &DataKey) -> BoxedStrategy<Value> {
    match key.kind {
        DataKind::Number | DataKind::Integer => number_for(&key.name).prop_map(Value::num).boxed(),
        DataKind::String => text_for(&key.name).prop_map(Value::from).boxed(),
        DataKind::Bool => any::<bool>().prop_map(Value::from).boxed(),
        DataKind::NumberArray => points().prop_map(Value::from).boxed(),
    }
}

fn data_for(entry: &EventTaxonomyEntry) -> BoxedStrategy<Option<Data>> {
    let required: Vec<_> = entry
        .required_data_keys
        .iter()
        .map(|k| {
            let name = k.name.clone();
            value_for(k).prop_map(move |v| Some((name.clone(), v))).boxed()
        })
        .collect();
    let optional: Vec<_> = entry
        .optional_data_keys
        .iter()
        .map(|k| {
            let name = k.name.clone();
            prop::option::of(value_for(k).prop_map(move |v| (name.clone(), v))).boxed()
        })
        .collect();
    (required, optional)
        .prop_map(|(req, opt)| {
            let data: Data = req.into_iter().chain(opt).flatten().collect();
            (!data.is_empty()).then_some(data)
        })
        .boxed()
}

fn media_event() -> impl Strategy<Value = MediaEventMessage> {
    select(taxonomy()).prop_flat_map(|entry| {
        (data_for(&entry), any::<u32>(), any::<u32>(), "\\PC{0,30}").prop_map(move |(data, seq, ts, description)| {
            MediaEventMessage {
                media_type: entry.media_type,
                media_id: media_id(entry.media_type),
                event_type: entry.event_type.clone(),
                seq_id: u64::from(seq),
                timestamp: u64::from(ts),
                description,
                data,
            }
        })
    })
}

fn control_event() -> impl Strategy<Value = ControlEventMessage> {
    (select(ControlType::ALL.to_vec()), select(MediaType::ALL.to_vec()), "[a-z0-9-]{1,12}", "\\PC{0,40}", any::<bool>(), any::<u32>())
        .prop_map(|(control_type, media_type, id, text, flag, seq)| {
            let s = |v: &str| Value::from(v);
            let data: Data = match control_type {
                ControlType::Resync => [("media-id", s(&id)), ("media-state", s(&text))].into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                ControlType::Join => [("session_id", s(&id)), ("client_id", s(&text)), ("role", s(if flag { "presenter" } else { "audience" }))]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
                ControlType::AddMaterial => [("media-id", s(&id)), ("media-type", s(media_type.as_str())), ("source", s(&text))]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
                _ => Data::new(),
            };
            ControlEventMessage {
                control_type,
                seq_id: u64::from(seq),
                timestamp: u64::from(seq) * 7,
                description: text,
                data: (!data.is_empty()).then_some(data),
            }
        })
}

fn any_message() -> impl Strategy<Value = EventMessage> {
    prop_oneof![3 => media_event().prop_map(EventMessage::from), 1 => control_event().prop_map(EventMessage::from)]
}

/// Events for one block of each media type, in session order.
fn session_events() -> impl Strategy<Value = Vec<MediaEventMessage>> {
    prop::collection::vec(media_event(), 0..120)
}

fn initial_states() -> StateMap {
    MediaType::ALL
        .into_iter()
        .map(|t| (media_id(t), initial_state(&media_id(t), t, &format!("https://a.example/{t}"))))
        .collect()
}

/// Sequential apply over the events, skipping rejected ones.
fn fold(events: &[MediaEventMessage]) -> StateMap {
    let mut states = initial_states();
    for event in events {
        let current = &states[&event.media_id];
        if let Ok(next) = apply_event(current, event) {
            states.insert(event.media_id.clone(), next);
        }
    }
    states
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn messages_round_trip(msg in any_message()) {
        let bytes = serialize(&msg).unwrap();
        prop_assert_eq!(deserialize(&bytes).unwrap(), msg.clone());
        prop_assert_eq!(serialize(&deserialize(&bytes).unwrap()).unwrap(), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn transitions_keep_states_valid_and_serializable(events in session_events()) {
        let mut states = initial_states();
        for event in &events {
            let current = states[&event.media_id].clone();
            if let Ok(next) = apply_event(&current, event) {
                prop_assert!(next.validate().is_ok(), "{:?}", next);
                let text = serialize_state(&next);
                prop_assert_eq!(deserialize_state(&text).unwrap(), next.clone());
                prop_assert_eq!(serialize_state(&deserialize_state(&text).unwrap()), text);
                states.insert(event.media_id.clone(), next);
            }
        }
    }

    #[test]
    fn apply_event_is_pure(events in session_events()) {
        let states = fold(&events);
        for event in events.iter().take(10) {
            let before: MediaState = states[&event.media_id].clone();
            let once = apply_event(&before, event);
            let twice = apply_event(&before, event);
            prop_assert_eq!(&states[&event.media_id], &before);
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn dispatch_matches_sequential_apply(events in session_events()) {
        let tree = HandlerTree::standard();
        let mut states = initial_states();
        for event in &events {
            let before = states.clone();
            if tree.dispatch(&mut states, event).is_err() {
                prop_assert_eq!(&states, &before);
            }
        }
        prop_assert_eq!(states, fold(&events));
        prop_assert_eq!(tree.total_invocations(), events.len() as u64);
    }

    #[test]
    fn state_text_commutes_with_transitions(events in session_events()) {
        // applying to a state rebuilt from its text gives the same result
        let mut states = initial_states();
        for event in &events {
            let current = states[&event.media_id].clone();
            let rebuilt = deserialize_state(&serialize_state(&current)).unwrap();
            let a = apply_event(&current, event);
            let b = apply_event(&rebuilt, event);
            prop_assert_eq!(&a, &b);
            if let Ok(next) = a {
                states.insert(event.media_id.clone(), next);
            }
        }
    }

    #[test]
    fn points_round_trip_on_the_grid(raw in prop::collection::vec((0u16..=1000, 0u16..=1000), 1..40)) {
        let pts: Vec<[f64; 2]> = raw.iter().map(|(x, y)| [f64::from(*x) / 1000.0, f64::from(*y) / 1000.0]).collect();
        let wire: Vec<f64> = encode_points(&pts).into_iter().map(Num::get).collect();
        prop_assert_eq!(decode_points(&wire).unwrap(), pts);
    }

    #[test]
    fn logs_round_trip(msgs in prop::collection::vec(any_message(), 0..40), gaps in prop::collection::vec(0u64..3000, 40), marks in prop::collection::vec(any::<bool>(), 40)) {
        let mut at = 0;
        let entries: Vec<SessionLogEntry> = msgs
            .into_iter()
            .enumerate()
            .map(|(i, message)| {
                at += gaps[i];
                SessionLogEntry {
                    global_seq: i as u64,
                    sender_id: format!("c{}", i % 3),
                    received_at: at,
                    message,
                    error: marks[i].then(|| "rejected".to_string()),
                }
            })
            .collect();
        let text = encode_log(&entries);
        prop_assert_eq!(decode_log(&text).unwrap(), entries);
    }

    #[test]
    fn meter_totals_stay_consistent(records in prop::collection::vec((any::<bool>(), 0u64..5000, 0u8..4, 0u64..120_000), 0..200)) {
        let mut report = BandwidthReport::new("p", 0);
        for (up, bytes, class, at) in &records {
            let traffic = match class {
                0 => Traffic::Overhead,
                1 => Traffic::Bootstrap,
                2 => Traffic::event("draw"),
                _ => Traffic::event("seek"),
            };
            report.record(if *up { Direction::Up } else { Direction::Down }, *bytes, &traffic, *at);
        }
        prop_assert!(report.is_consistent());
        let total: u64 = records.iter().map(|r| r.1).sum();
        prop_assert_eq!(report.total_bytes_up + report.total_bytes_down, total);
    }
}

#[test]
fn every_taxonomy_entry_is_generated() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..2000 {
        let msg = media_event().new_tree(&mut runner).unwrap().current();
        seen.insert((msg.media_type, msg.event_type));
    }
    assert_eq!(seen.len(), taxonomy().len());
}
