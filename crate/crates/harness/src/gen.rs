//! Seeded generators for messages and fuzz scenarios.

use std::collections::BTreeMap;

use mediasync_core::media::{taxonomy, DataKey, EventTaxonomyEntry};
use mediasync_core::protocol::{
    keys, ControlEventMessage, ControlType, Data, DataKind, EventMessage, MediaEventMessage, MediaType, Num, Value,
};
use mediasync_core::session::Role;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::{ClientSpec, MaterialSpec, Scenario, ScriptedEvent};

const WORDS: &[&str] = &["slide", "chart", "intro", "détail", "quote \"here\"", "back\\slash", "✓ done", "tab\there", "ok"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn block_id(media_type: MediaType) -> String {
    format!("{media_type}-block")
}

fn number(rng: &mut impl Rng, key: &str) -> Value {
    let v = match key {
        "delta" => rng.random_range(-60.0..60.0),
        "current_time" => rng.random_range(-5.0..7200.0),
        "volume" => rng.random_range(-0.5..1.5),
        "rate" => rng.random_range(0.0..20.0),
        "width" => rng.random_range(0.0..0.3),
        "page" => f64::from(rng.random_range(1u32..60)),
        _ => rng.random_range(-0.25..1.25),
    };
    Value::num(v)
}

fn text(rng: &mut impl Rng, key: &str) -> String {
    match key {
        "url" => format!("https://a.example/p{}", rng.random_range(0..20)),
        "selector" => format!("#sec-{}", rng.random_range(0..8)),
        "color" => format!("#{:06x}", rng.random_range(0..0x100_0000)),
        "stroke_id" => format!("s{}", rng.random_range(0..6)),
        "target" => format!("btn-{}", rng.random_range(0..4)),
        _ => {
            let n = rng.random_range(0..4);
            (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
        }
    }
}

/// Integer thousandths: an absolute first pair, then small deltas.
pub fn stroke_points(rng: &mut impl Rng, pairs: usize) -> Value {
    let mut out = vec![Num::from(rng.random_range(0..=1000)), Num::from(rng.random_range(0..=1000))];
    for _ in 1..pairs.max(1) {
        out.push(Num::from(rng.random_range(-30..=30)));
        out.push(Num::from(rng.random_range(-30..=30)));
    }
    Value::from(out)
}

fn value(rng: &mut impl Rng, key: &DataKey) -> Value {
    match key.kind {
        DataKind::Number | DataKind::Integer => number(rng, &key.name),
        DataKind::String => Value::from(text(rng, &key.name)),
        DataKind::Bool => Value::from(rng.random_bool(0.5)),
        DataKind::NumberArray => {
            let pairs = rng.random_range(1..=24);
            stroke_points(rng, pairs)
        }
    }
}

pub fn random_data(rng: &mut impl Rng, entry: &EventTaxonomyEntry) -> Option<Data> {
    let mut data = Data::new();
    for key in &entry.required_data_keys {
        data.insert(key.name.clone(), value(rng, key));
    }
    for key in &entry.optional_data_keys {
        if rng.random_bool(0.5) {
            data.insert(key.name.clone(), value(rng, key));
        }
    }
    (!data.is_empty()).then_some(data)
}

pub fn random_media_event(rng: &mut impl Rng, entry: &EventTaxonomyEntry) -> MediaEventMessage {
    MediaEventMessage {
        media_type: entry.media_type,
        media_id: block_id(entry.media_type),
        event_type: entry.event_type.clone(),
        seq_id: rng.random_range(0..1_000_000),
        timestamp: rng.random_range(0..10_000_000),
        description: text(rng, "description"),
        data: random_data(rng, entry),
    }
}

pub fn random_control_event(rng: &mut impl Rng, control_type: ControlType) -> ControlEventMessage {
    let word = |rng: &mut ChaCha8Rng| text(rng, "description");
    let mut inner = ChaCha8Rng::seed_from_u64(rng.random());
    let data: Data = match control_type {
        ControlType::Resync => Data::from([
            (keys::MEDIA_ID.into(), Value::from(block_id(*MediaType::ALL.choose(rng).unwrap()))),
            (keys::MEDIA_STATE.into(), Value::from(word(&mut inner))),
        ]),
        ControlType::Join => Data::from([
            (keys::SESSION_ID.into(), Value::from(format!("s{}", rng.random_range(1..100)))),
            (keys::CLIENT_ID.into(), Value::from(format!("c{}", rng.random_range(0..100)))),
            (keys::ROLE.into(), Value::from(if rng.random_bool(0.5) { "presenter" } else { "audience" })),
        ]),
        ControlType::AddMaterial => {
            let media_type = *MediaType::ALL.choose(rng).unwrap();
            Data::from([
                (keys::MEDIA_ID.into(), Value::from(block_id(media_type))),
                (keys::MEDIA_TYPE.into(), Value::from(media_type.as_str())),
                (keys::SOURCE.into(), Value::from(format!("/assets/{}", word(&mut inner).replace(' ', "-")))),
            ])
        }
        ControlType::Leave | ControlType::StartReplay | ControlType::EndReplay => Data::new(),
    };
    ControlEventMessage {
        control_type,
        seq_id: rng.random_range(0..1_000_000),
        timestamp: rng.random_range(0..10_000_000),
        description: word(&mut inner),
        data: (!data.is_empty()).then_some(data),
    }
}

/// `n` valid messages. The first ones cover every taxonomy entry and every
/// control type; the rest are drawn at random, three media events to one
/// control event.
pub fn message_corpus(seed: u64, n: usize) -> Vec<EventMessage> {
    let mut rng = rng(seed);
    let entries = taxonomy();
    let mut out: Vec<EventMessage> = entries.iter().map(|e| random_media_event(&mut rng, e).into()).collect();
    out.extend(ControlType::ALL.iter().map(|t| EventMessage::from(random_control_event(&mut rng, *t))));
    while out.len() < n {
        if rng.random_ratio(3, 4) {
            let entry = entries.choose(&mut rng).unwrap();
            out.push(random_media_event(&mut rng, entry).into());
        } else {
            let t = *ControlType::ALL.choose(&mut rng).unwrap();
            out.push(random_control_event(&mut rng, t).into());
        }
    }
    out.truncate(n);
    out
}

/// A random session over one block of each media type. Most events are
/// valid in context; a few erase unknown strokes or leave the page origin
/// and are rejected by the server.
pub fn fuzz_scenario(seed: u64, event_count: usize, client_count: usize) -> Scenario {
    let mut rng = rng(seed);
    let clients: Vec<ClientSpec> = (0..client_count.max(1))
        .map(|i| ClientSpec {
            id: format!("c{i}"),
            role: if i == 0 { Role::Presenter } else { Role::Audience },
            join_at: 0,
        })
        .collect();
    let materials = MediaType::ALL
        .iter()
        .map(|t| MaterialSpec {
            media_id: block_id(*t),
            media_type: *t,
            source: match t {
                MediaType::Webpage => "https://a.example/index.html".to_string(),
                other => format!("/assets/sample.{other}"),
            },
        })
        .collect();
    let entries = taxonomy();
    let mut strokes: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut at = 0u64;
    let mut script = Vec::with_capacity(event_count);
    for i in 0..event_count {
        if !rng.random_ratio(3, 10) {
            at += rng.random_range(1..400);
        }
        let client = &clients[rng.random_range(0..clients.len())];
        let message: EventMessage = if rng.random_ratio(1, 25) {
            let media_id = block_id(*MediaType::ALL.choose(&mut rng).unwrap());
            ControlEventMessage {
                control_type: ControlType::Resync,
                seq_id: 0,
                timestamp: at,
                description: "resync".into(),
                data: Some(Data::from([
                    (keys::MEDIA_ID.into(), Value::from(media_id)),
                    (keys::MEDIA_STATE.into(), Value::from("")),
                ])),
            }
            .into()
        } else {
            let entry = entries.choose(&mut rng).unwrap();
            let mut msg = random_media_event(&mut rng, entry);
            msg.seq_id = 0;
            msg.timestamp = at;
            let data = msg.data.get_or_insert_with(Data::new);
            match entry.event_type.as_str() {
                "draw" => {
                    let known = strokes.entry(msg.media_id.clone()).or_default();
                    let id = match known.choose(&mut rng) {
                        Some(existing) if rng.random_ratio(1, 3) => existing.clone(),
                        _ => format!("st{i}"),
                    };
                    known.push(id.clone());
                    data.insert("stroke_id".into(), Value::from(id));
                }
                "erase" => {
                    let known = strokes.entry(msg.media_id.clone()).or_default();
                    if !known.is_empty() && rng.random_ratio(4, 5) {
                        let id = known.swap_remove(rng.random_range(0..known.len()));
                        known.retain(|k| *k != id);
                        data.insert("stroke_id".into(), Value::from(id));
                    }
                }
                "navigate" if rng.random_ratio(1, 10) => {
                    data.insert("url".into(), Value::from("https://elsewhere.example/"));
                }
                _ => {}
            }
            msg.into()
        };
        script.push(ScriptedEvent {
            client_id: client.id.clone(),
            at_ms: at,
            message,
        });
    }
    Scenario {
        name: format!("fuzz-{seed}"),
        duration_ms: at + 1000,
        clients,
        materials,
        assets: Vec::new(),
        expected: Vec::new(),
        script,
    }
}
