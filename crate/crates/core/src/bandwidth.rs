//! Byte accounting per session, direction, traffic class and second.
//!
//! Frames are recorded at the framing boundary: after serialization and
//! before the transport, so counts exclude socket and TLS overhead.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Client to server.
    Up,
    /// Server to client.
    Down,
}

/// Accounting class of a frame or part of a frame.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Traffic {
    /// An event message, keyed by its event or control type.
    Event(String),
    /// Envelope framing, error notices and rejected frames.
    Overhead,
    /// Join handshakes, snapshots, resyncs and material or page loads.
    Bootstrap,
}

impl Traffic {
    pub fn event(name: &str) -> Traffic {
        Traffic::Event(name.to_string())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub frames: u64,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

impl Tally {
    pub fn bytes(&self) -> u64 {
        self.bytes_up + self.bytes_down
    }

    fn add(&mut self, direction: Direction, bytes: u64) {
        self.frames += 1;
        match direction {
            Direction::Up => self.bytes_up += bytes,
            Direction::Down => self.bytes_down += bytes,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SecondBucket {
    pub bytes_up: u64,
    pub bytes_down: u64,
}

impl SecondBucket {
    fn add(&mut self, direction: Direction, bytes: u64) {
        match direction {
            Direction::Up => self.bytes_up += bytes,
            Direction::Down => self.bytes_down += bytes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}` (expected table or csv)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandwidthReport {
    pub session_id: String,
    pub duration_s: u64,
    pub total_bytes_up: u64,
    pub total_bytes_down: u64,
    pub per_event_type: BTreeMap<String, Tally>,
    pub overhead: Tally,
    pub bootstrap: Tally,
    /// Bytes per second of session time, all classes together.
    pub timeseries: Vec<SecondBucket>,
    /// Bytes per second for each event type.
    pub event_timeseries: BTreeMap<String, Vec<SecondBucket>>,
}

impl BandwidthReport {
    pub fn new(session_id: &str, duration_s: u64) -> Self {
        BandwidthReport {
            session_id: session_id.to_string(),
            duration_s,
            total_bytes_up: 0,
            total_bytes_down: 0,
            per_event_type: BTreeMap::new(),
            overhead: Tally::default(),
            bootstrap: Tally::default(),
            timeseries: vec![SecondBucket::default(); duration_s as usize],
            event_timeseries: BTreeMap::new(),
        }
    }

    /// Counts `bytes` in `direction` at session time `at_ms`. Zero-byte
    /// records are ignored.
    pub fn record(&mut self, direction: Direction, bytes: u64, traffic: &Traffic, at_ms: u64) {
        if bytes == 0 {
            return;
        }
        let second = (at_ms / 1000) as usize;
        self.extend_to(second as u64 + 1);
        match direction {
            Direction::Up => self.total_bytes_up += bytes,
            Direction::Down => self.total_bytes_down += bytes,
        }
        self.timeseries[second].add(direction, bytes);
        match traffic {
            Traffic::Event(name) => {
                self.per_event_type.entry(name.clone()).or_default().add(direction, bytes);
                let series = self.event_timeseries.entry(name.clone()).or_default();
                if series.len() <= second {
                    series.resize(second + 1, SecondBucket::default());
                }
                series[second].add(direction, bytes);
            }
            Traffic::Overhead => self.overhead.add(direction, bytes),
            Traffic::Bootstrap => self.bootstrap.add(direction, bytes),
        }
    }

    /// Pads the timeseries so it covers at least `duration_s` seconds.
    pub fn extend_to(&mut self, duration_s: u64) {
        if duration_s > self.duration_s {
            self.duration_s = duration_s;
        }
        if self.timeseries.len() < self.duration_s as usize {
            self.timeseries.resize(self.duration_s as usize, SecondBucket::default());
        }
    }

    /// Bytes of event messages sent by clients, excluding envelopes and
    /// bootstrap traffic.
    pub fn event_bytes_up(&self) -> u64 {
        self.per_event_type.values().map(|t| t.bytes_up).sum()
    }

    pub fn event_bytes_down(&self) -> u64 {
        self.per_event_type.values().map(|t| t.bytes_down).sum()
    }

    /// Largest single-second upload of one event type.
    pub fn peak_second_up(&self, event_type: &str) -> u64 {
        self.event_timeseries
            .get(event_type)
            .map_or(0, |s| s.iter().map(|b| b.bytes_up).max().unwrap_or(0))
    }

    /// Totals equal the class breakdown and the timeseries sum.
    pub fn is_consistent(&self) -> bool {
        let classes = |pick: fn(&Tally) -> u64| {
            self.per_event_type.values().map(pick).sum::<u64>() + pick(&self.overhead) + pick(&self.bootstrap)
        };
        let series_up: u64 = self.timeseries.iter().map(|b| b.bytes_up).sum();
        let series_down: u64 = self.timeseries.iter().map(|b| b.bytes_down).sum();
        classes(|t| t.bytes_up) == self.total_bytes_up
            && classes(|t| t.bytes_down) == self.total_bytes_down
            && series_up == self.total_bytes_up
            && series_down == self.total_bytes_down
    }

    pub fn emit(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.emit_csv(),
            ReportFormat::Table => self.emit_table(),
        }
    }

    fn emit_csv(&self) -> String {
        let mut out = String::from("second,bytes_up,bytes_down\n");
        for (second, bucket) in self.timeseries.iter().enumerate() {
            let _ = writeln!(out, "{second},{},{}", bucket.bytes_up, bucket.bytes_down);
        }
        out
    }

    fn emit_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "session {}  duration {} s", self.session_id, self.duration_s);
        let _ = writeln!(out, "{:<20} {:>8} {:>12} {:>12}", "class", "frames", "bytes_up", "bytes_down");
        for (name, tally) in &self.per_event_type {
            let _ = writeln!(out, "{:<20} {:>8} {:>12} {:>12}", name, tally.frames, tally.bytes_up, tally.bytes_down);
        }
        let _ = writeln!(out, "{:<20} {:>8} {:>12} {:>12}", "events total", self.per_event_type.values().map(|t| t.frames).sum::<u64>(), self.event_bytes_up(), self.event_bytes_down());
        for (name, tally) in [("envelope/overhead", &self.overhead), ("control/bootstrap", &self.bootstrap)] {
            let _ = writeln!(out, "{:<20} {:>8} {:>12} {:>12}", name, tally.frames, tally.bytes_up, tally.bytes_down);
        }
        let _ = writeln!(out, "{:<20} {:>8} {:>12} {:>12}", "total", "", self.total_bytes_up, self.total_bytes_down);
        let peak = self
            .timeseries
            .iter()
            .enumerate()
            .max_by_key(|(i, b)| (b.bytes_up + b.bytes_down, std::cmp::Reverse(*i)));
        if let Some((second, bucket)) = peak {
            let _ = writeln!(out, "peak second {second}: {} B up, {} B down", bucket.bytes_up, bucket.bytes_down);
        }
        out
    }
}
