//! Versioned text format for scripted sessions.
//!
//! ```text
//! @scenario v1
//! @name video
//! @duration 60000
//! @client alice presenter 0
//! @material video-block video /assets/talk.mp4
//! @asset 0 524288 /assets/index.html
//! @expect video-block playing false
//! alice 2000 {"kind":"media-event","media-type":"video",...}
//! ```
//!
//! Directives come first, then one scheduled event per line: client id,
//! send time in milliseconds since session start, canonical message. Lines
//! starting with `#` are comments. Materials are registered by the first
//! presenter at time 0. When a script is run, `seq-id` and `timestamp` are
//! reassigned from the sending client's counter and the send time, so a
//! script stays valid after events are removed from it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use mediasync_core::protocol::{deserialize, serialize, EventMessage, MediaType};
use mediasync_core::session::Role;
use serde_json::Value as Json;
use thiserror::Error;

pub const HEADER: &str = "@scenario v1";

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {reason}")]
pub struct ScenarioError {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientSpec {
    pub id: String,
    pub role: Role,
    pub join_at: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaterialSpec {
    pub media_id: String,
    pub media_type: MediaType,
    pub source: String,
}

/// A page or asset fetched by every joined client at `at_ms`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssetLoad {
    pub at_ms: u64,
    pub bytes: u64,
    pub url: String,
}

/// Final-state assertion on one entry of a block's state.
#[derive(Clone, Debug, PartialEq)]
pub struct Expectation {
    pub media_id: String,
    pub key: String,
    pub value: Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedEvent {
    pub client_id: String,
    pub at_ms: u64,
    pub message: EventMessage,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Scenario {
    pub name: String,
    pub duration_ms: u64,
    pub clients: Vec<ClientSpec>,
    pub materials: Vec<MaterialSpec>,
    pub assets: Vec<AssetLoad>,
    pub expected: Vec<Expectation>,
    pub script: Vec<ScriptedEvent>,
}

impl Scenario {
    pub fn presenter(&self) -> Option<&ClientSpec> {
        self.clients.iter().find(|c| c.role == Role::Presenter)
    }

    pub fn media_event_count(&self) -> usize {
        self.script.iter().filter(|e| matches!(e.message, EventMessage::Media(_))).count()
    }

    /// Number of scripted events of each event or control type.
    pub fn event_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for event in &self.script {
            *counts.entry(event.message.type_name().to_string()).or_insert(0) += 1;
        }
        counts
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut scenario = Scenario::default();
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        match lines.next() {
            Some((_, HEADER)) => {}
            _ => return Err(err(1, format!("expected `{HEADER}`"))),
        }
        let mut duration = None;
        for (no, line) in lines {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(directive) = line.strip_prefix('@') {
                if !scenario.script.is_empty() {
                    return Err(err(no, "directives must precede events"));
                }
                let (name, rest) = directive.split_once(' ').unwrap_or((directive, ""));
                let fields: Vec<&str> = rest.split_whitespace().collect();
                match (name, fields.as_slice()) {
                    ("name", [n]) => scenario.name = n.to_string(),
                    ("duration", [d]) => duration = Some(number(no, d)?),
                    ("client", [id, role, at]) => scenario.clients.push(ClientSpec {
                        id: id.to_string(),
                        role: role.parse().map_err(|e| err(no, format!("{e}")))?,
                        join_at: number(no, at)?,
                    }),
                    ("material", [id, media_type, source]) => scenario.materials.push(MaterialSpec {
                        media_id: id.to_string(),
                        media_type: media_type.parse().map_err(|e| err(no, format!("{e}")))?,
                        source: source.to_string(),
                    }),
                    ("asset", [at, bytes, url]) => scenario.assets.push(AssetLoad {
                        at_ms: number(no, at)?,
                        bytes: number(no, bytes)?,
                        url: url.to_string(),
                    }),
                    ("expect", [id, key, ..]) => {
                        let raw = rest.splitn(3, ' ').nth(2).unwrap_or_default();
                        scenario.expected.push(Expectation {
                            media_id: id.to_string(),
                            key: key.to_string(),
                            value: serde_json::from_str(raw).map_err(|e| err(no, format!("expected value: {e}")))?,
                        });
                    }
                    _ => return Err(err(no, format!("unknown or malformed directive `@{name}`"))),
                }
                continue;
            }
            let mut parts = line.splitn(3, ' ');
            let (Some(client), Some(at), Some(json)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(no, "expected `<client> <at_ms> <message>`"));
            };
            let message = deserialize(json.as_bytes()).map_err(|e| err(no, e.to_string()))?;
            scenario.script.push(ScriptedEvent {
                client_id: client.to_string(),
                at_ms: number(no, at)?,
                message,
            });
        }
        scenario.duration_ms = duration.ok_or_else(|| err(0, "missing @duration"))?;
        scenario.check().map_err(|reason| err(0, reason))?;
        Ok(scenario)
    }

    /// Structural checks: unique ids, declared senders, per-client order.
    pub fn check(&self) -> Result<(), String> {
        let mut ids = BTreeSet::new();
        for c in &self.clients {
            if !ids.insert(c.id.as_str()) {
                return Err(format!("client `{}` declared twice", c.id));
            }
            if c.id.contains(char::is_whitespace) || c.id.is_empty() {
                return Err(format!("client id `{}` must be a single word", c.id));
            }
        }
        let mut media = BTreeSet::new();
        for m in &self.materials {
            if !media.insert(m.media_id.as_str()) {
                return Err(format!("material `{}` declared twice", m.media_id));
            }
        }
        if !self.materials.is_empty() && self.presenter().is_none() {
            return Err("materials need a presenter to register them".into());
        }
        let mut last: BTreeMap<&str, u64> = BTreeMap::new();
        for event in &self.script {
            let spec = self
                .clients
                .iter()
                .find(|c| c.id == event.client_id)
                .ok_or_else(|| format!("event from undeclared client `{}`", event.client_id))?;
            if event.at_ms < spec.join_at {
                return Err(format!("`{}` sends at {} ms before joining at {} ms", spec.id, event.at_ms, spec.join_at));
            }
            let prev = last.entry(spec.id.as_str()).or_insert(0);
            if event.at_ms < *prev {
                return Err(format!("events of `{}` are not sorted by time", spec.id));
            }
            *prev = event.at_ms;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "@name {}", self.name);
        let _ = writeln!(out, "@duration {}", self.duration_ms);
        for c in &self.clients {
            let _ = writeln!(out, "@client {} {} {}", c.id, c.role, c.join_at);
        }
        for m in &self.materials {
            let _ = writeln!(out, "@material {} {} {}", m.media_id, m.media_type, m.source);
        }
        for a in &self.assets {
            let _ = writeln!(out, "@asset {} {} {}", a.at_ms, a.bytes, a.url);
        }
        for e in &self.expected {
            let _ = writeln!(out, "@expect {} {} {}", e.media_id, e.key, e.value);
        }
        for event in &self.script {
            let bytes = serialize(&event.message).expect("scripted messages are valid");
            let _ = writeln!(out, "{} {} {}", event.client_id, event.at_ms, String::from_utf8_lossy(&bytes));
        }
        out
    }
}

fn err(line: usize, reason: impl Into<String>) -> ScenarioError {
    ScenarioError {
        line,
        reason: reason.into(),
    }
}

fn number(line: usize, text: &str) -> Result<u64, ScenarioError> {
    text.parse().map_err(|_| err(line, format!("`{text}` is not a non-negative integer")))
}
