//! Deterministic replay of a session log.
//!
//! Entries are queued by server receive time (ties by `global_seq`) and
//! popped into the handler tree. Seeking backwards re-folds from the start.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::handler::HandlerTree;
use crate::media::{MediaState, StateMap};
use crate::protocol::{keys, ControlType, EventMessage, MediaType};
use crate::session::{MaterialDescriptor, SessionLogEntry};

/// Allowed distance between an entry's ideal and actual emission instant.
pub const TIMING_TOLERANCE: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("cannot replay backwards from {current} ms to {target} ms; use seek")]
    Backwards { current: u64, target: u64 },
    #[error("pace must be a positive finite number, got {0}")]
    InvalidPace(f64),
    #[error("sink failed at position {position}: {reason}")]
    Sink { position: usize, reason: String },
}

/// An entry that did not change state during replay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayFault {
    pub global_seq: u64,
    pub reason: String,
}

/// Time source for paced replay.
pub trait ReplayClock {
    /// Time since the clock's own origin.
    fn now(&self) -> Duration;
    fn sleep_until(&self, deadline: Duration);
}

#[derive(Debug)]
pub struct RealClock {
    origin: Instant,
}

impl RealClock {
    pub fn new() -> Self {
        RealClock { origin: Instant::now() }
    }
}

impl Default for RealClock {
    fn default() -> Self {
        Self::new()
    }
}

impl ReplayClock for RealClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep_until(&self, deadline: Duration) {
        let now = self.now();
        if deadline > now {
            thread::sleep(deadline - now);
        }
    }
}

/// Jumps straight to every deadline.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Cell<Duration>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ReplayClock for VirtualClock {
    fn now(&self) -> Duration {
        self.now.get()
    }

    fn sleep_until(&self, deadline: Duration) {
        if deadline > self.now.get() {
            self.now.set(deadline);
        }
    }
}

/// Receives entries during paced replay, before they are applied.
pub trait ReplaySink {
    fn emit(&mut self, entry: &SessionLogEntry, at: Duration) -> Result<(), String>;
}

impl<F: FnMut(&SessionLogEntry, Duration) -> Result<(), String>> ReplaySink for F {
    fn emit(&mut self, entry: &SessionLogEntry, at: Duration) -> Result<(), String> {
        self(entry, at)
    }
}

/// Timing summary of a paced run.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedRun {
    pub emitted: usize,
    /// Largest distance from an ideal emission instant.
    pub max_deviation: Duration,
    pub started: Duration,
    pub finished: Duration,
}

impl TimedRun {
    pub fn wall(&self) -> Duration {
        self.finished.saturating_sub(self.started)
    }
}

pub struct Replayer<'t> {
    tree: &'t HandlerTree,
    entries: Vec<SessionLogEntry>,
    position: usize,
    current_ms: u64,
    materials: BTreeMap<String, MaterialDescriptor>,
    states: StateMap,
    faults: Vec<ReplayFault>,
}

impl<'t> Replayer<'t> {
    pub fn new(mut entries: Vec<SessionLogEntry>, tree: &'t HandlerTree) -> Self {
        entries.sort_by_key(|e| (e.received_at, e.global_seq));
        Replayer {
            tree,
            entries,
            position: 0,
            current_ms: 0,
            materials: BTreeMap::new(),
            states: StateMap::new(),
            faults: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[SessionLogEntry] {
        &self.entries
    }

    /// Index of the next entry to pop.
    pub fn position(&self) -> usize {
        self.position
    }

    pub fn current_ms(&self) -> u64 {
        self.current_ms
    }

    pub fn is_finished(&self) -> bool {
        self.position == self.entries.len()
    }

    /// Receive time of the last entry.
    pub fn end_ms(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.received_at)
    }

    pub fn states(&self) -> &StateMap {
        &self.states
    }

    pub fn materials(&self) -> &BTreeMap<String, MaterialDescriptor> {
        &self.materials
    }

    pub fn faults(&self) -> &[ReplayFault] {
        &self.faults
    }

    pub fn reset(&mut self) {
        self.position = 0;
        self.current_ms = 0;
        self.materials.clear();
        self.states.clear();
        self.faults.clear();
    }

    /// Pops and applies every entry received at or before `target_ms`.
    pub fn replay_to(&mut self, target_ms: u64) -> Result<Vec<SessionLogEntry>, ReplayError> {
        if target_ms < self.current_ms {
            return Err(ReplayError::Backwards {
                current: self.current_ms,
                target: target_ms,
            });
        }
        let start = self.position;
        while self.position < self.entries.len() && self.entries[self.position].received_at <= target_ms {
            self.apply_next();
        }
        self.current_ms = target_ms;
        Ok(self.entries[start..self.position].to_vec())
    }

    pub fn replay_to_end(&mut self) -> Vec<SessionLogEntry> {
        let end = self.end_ms().max(self.current_ms);
        self.replay_to(end).expect("end is never behind the current time")
    }

    /// Moves to `target_ms` in either direction.
    pub fn seek(&mut self, target_ms: u64) -> &StateMap {
        if target_ms < self.current_ms {
            self.reset();
        }
        self.replay_to(target_ms).expect("seek resets before moving backwards");
        &self.states
    }

    /// Emits the remaining entries to `sink` at `received_at / pace` after
    /// the start instant, applying each after the sink accepts it. A sink
    /// failure leaves the position at the failed entry so the run can be
    /// resumed.
    pub fn run_timed(&mut self, pace: f64, clock: &dyn ReplayClock, sink: &mut dyn ReplaySink) -> Result<TimedRun, ReplayError> {
        if !(pace.is_finite() && pace > 0.0) {
            return Err(ReplayError::InvalidPace(pace));
        }
        let started = clock.now();
        let origin_ms = started.as_secs_f64() * 1000.0 - self.current_ms as f64 / pace;
        let mut max_deviation = Duration::ZERO;
        let mut emitted = 0;
        while self.position < self.entries.len() {
            let entry = &self.entries[self.position];
            let ideal_ms = (origin_ms + entry.received_at as f64 / pace).max(0.0);
            clock.sleep_until(Duration::from_secs_f64(ideal_ms / 1000.0));
            let actual = clock.now();
            let deviation = Duration::from_secs_f64((actual.as_secs_f64() * 1000.0 - ideal_ms).abs() / 1000.0);
            max_deviation = max_deviation.max(deviation);
            sink.emit(entry, actual).map_err(|reason| ReplayError::Sink {
                position: self.position,
                reason,
            })?;
            self.current_ms = entry.received_at;
            self.apply_next();
            emitted += 1;
        }
        Ok(TimedRun {
            emitted,
            max_deviation,
            started,
            finished: clock.now(),
        })
    }

    fn apply_next(&mut self) {
        let Replayer {
            tree,
            entries,
            position,
            materials,
            states,
            faults,
            ..
        } = self;
        let entry = &entries[*position];
        *position += 1;
        let fault = |reason: String| ReplayFault {
            global_seq: entry.global_seq,
            reason,
        };
        if let Some(reason) = &entry.error {
            faults.push(fault(reason.clone()));
            return;
        }
        match &entry.message {
            EventMessage::Media(m) => {
                if let Err(e) = tree.dispatch(states, m) {
                    faults.push(fault(e.to_string()));
                }
            }
            EventMessage::Control(c) if c.control_type == ControlType::AddMaterial => {
                let media_id = c.get_str(keys::MEDIA_ID).unwrap_or_default();
                let source = c.get_str(keys::SOURCE).unwrap_or_default();
                let media_type = c.get_str(keys::MEDIA_TYPE).and_then(|t| t.parse::<MediaType>().ok());
                match media_type {
                    Some(media_type) if !materials.contains_key(media_id) => {
                        states.insert(media_id.to_string(), MediaState::initial(media_id, media_type, source));
                        materials.insert(
                            media_id.to_string(),
                            MaterialDescriptor {
                                media_id: media_id.to_string(),
                                media_type,
                                source: source.to_string(),
                                added_at: entry.received_at,
                            },
                        );
                    }
                    _ => faults.push(fault(format!("cannot add material `{media_id}`"))),
                }
            }
            EventMessage::Control(_) => {}
        }
    }
}

#[cfg(test)]
mod tests;
