//! Bandwidth rebuilt from a persisted log.
//!
//! Each entry counts once up (the sender's canonical message) and once down
//! per client present when it was logged. Join acks, resync replies and
//! error notices are not in the log and are left out.

use std::collections::BTreeSet;

use mediasync_core::bandwidth::{BandwidthReport, Direction, Traffic};
use mediasync_core::protocol::{serialize, ControlType, EventMessage};
use mediasync_core::session::{encode_entry, SessionLogEntry};

fn class(msg: &EventMessage) -> Traffic {
    match msg {
        EventMessage::Media(m) => Traffic::event(&m.event_type),
        EventMessage::Control(c) => match c.control_type {
            ControlType::Join | ControlType::Resync | ControlType::AddMaterial => Traffic::Bootstrap,
            other => Traffic::event(other.as_str()),
        },
    }
}

pub fn report_from_log(session_id: &str, log: &[SessionLogEntry]) -> BandwidthReport {
    let duration_s = log.last().map_or(0, |e| e.received_at.div_ceil(1000));
    let mut report = BandwidthReport::new(session_id, duration_s);
    let mut present: BTreeSet<&str> = BTreeSet::new();
    for entry in log {
        let up = serialize(&entry.message).map_or(0, |b| b.len() as u64);
        let traffic = class(&entry.message);
        report.record(Direction::Up, up, &traffic, entry.received_at);
        if let EventMessage::Control(c) = &entry.message {
            match c.control_type {
                ControlType::Join if entry.error.is_none() => {
                    present.insert(&entry.sender_id);
                }
                _ => {}
            }
        }
        let frame = encode_entry(entry).len() as u64;
        for _ in &present {
            match &traffic {
                Traffic::Event(_) => {
                    report.record(Direction::Down, up, &traffic, entry.received_at);
                    report.record(Direction::Down, frame - up, &Traffic::Overhead, entry.received_at);
                }
                other => report.record(Direction::Down, frame, other, entry.received_at),
            }
        }
        if matches!(&entry.message, EventMessage::Control(c) if c.control_type == ControlType::Leave) {
            present.remove(entry.sender_id.as_str());
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::runner::{run_scenario, RunOptions};

    #[test]
    fn event_traffic_matches_the_live_meter() {
        let result = run_scenario(&fixtures::video(), &RunOptions::default());
        let rebuilt = report_from_log(&result.session_id, &result.log);
        assert!(rebuilt.is_consistent());
        assert_eq!(rebuilt.per_event_type, result.report.per_event_type);
        assert_eq!(rebuilt.event_bytes_up(), result.report.event_bytes_up());
    }
}
