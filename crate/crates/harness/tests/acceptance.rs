//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs against the in-process server only.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mediasync_core::bandwidth::BandwidthReport;
use mediasync_core::media::{serialize_state, taxonomy, MediaState};
use mediasync_core::protocol::{
    deserialize, serialize, wire_size, ControlEventMessage, ControlType, Data, EventMessage, MediaEventMessage, MediaType,
    Value,
};
use mediasync_core::session::{encode_log, load_log, persist_log, SessionLogEntry};
use mediasync_harness::fixtures;
use mediasync_harness::fuzz::fuzz_session;
use mediasync_harness::gen::message_corpus;
use mediasync_harness::oracle::{fold, state_texts};
use mediasync_harness::runner::{run_scenario, HarnessResult, RunOptions, LATE_JOINER};
use mediasync_harness::scenario::Scenario;

const CORPUS: usize = 1000;
const CORPUS_BUDGET: Duration = Duration::from_secs(5);
const FUZZ_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const FUZZ_EVENTS: usize = 500;
const FUZZ_CLIENTS: usize = 4;
const FUZZ_BUDGET: Duration = Duration::from_secs(30);
const EVENT_BYTES_MAX: u64 = 15_000;
const MESSAGE_MAX: usize = 512;
const DRAW_SECOND_MAX: u64 = 3_500;
const LATE_JOIN_MS: u64 = 30_000;
const PROBE_MS: u64 = 31_000;

type Outcome = Result<String, Vec<String>>;

fn verdict(problems: Vec<String>, ok: impl FnOnce() -> String) -> Outcome {
    if problems.is_empty() {
        Ok(ok())
    } else {
        Err(problems)
    }
}

const TABLE_II: &str = r#"{"kind":"media-event","media-type":"image","media-id":"image-block","event-type":"mouse-scroll","seq-id":8,"timestamp":5000,"description":"zoom out an image","data":{"delta":-1.5}}"#;

fn table_iii(state: &str) -> String {
    format!(
        r#"{{"kind":"control-event","control-type":"resync","seq-id":5,"timestamp":10000,"description":"Resync a media block","data":{{"media-id":"video-block","media-state":{}}}}}"#,
        serde_json::to_string(state).unwrap()
    )
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut problems = Vec::new();
    let corpus = message_corpus(1, CORPUS);
    let mut covered = BTreeSet::new();
    let mut kinds = BTreeSet::new();
    for (i, msg) in corpus.iter().enumerate() {
        kinds.insert(msg.kind());
        if let EventMessage::Media(m) = msg {
            covered.insert((m.media_type, m.event_type.clone()));
        }
        match serialize(msg).map(|bytes| deserialize(&bytes)) {
            Ok(Ok(back)) if back == *msg => {}
            other => problems.push(format!("message {i} did not round-trip: {other:?}")),
        }
    }
    for entry in taxonomy() {
        if !covered.contains(&(entry.media_type, entry.event_type.clone())) {
            problems.push(format!("{}/{} not covered", entry.media_type.as_str(), entry.event_type));
        }
    }
    if kinds.len() != 2 {
        problems.push(format!("message kinds covered: {kinds:?}"));
    }

    let zoom = EventMessage::Media(MediaEventMessage {
        media_type: MediaType::Image,
        media_id: "image-block".into(),
        event_type: "mouse-scroll".into(),
        seq_id: 8,
        timestamp: 5000,
        description: "zoom out an image".into(),
        data: Some(Data::from([("delta".to_string(), Value::num(-1.5))])),
    });
    if serialize(&zoom).ok().as_deref() != Some(TABLE_II.as_bytes()) {
        problems.push("image zoom example does not encode exactly".into());
    }
    let state = serialize_state(&MediaState::initial("video-block", MediaType::Video, "/assets/lecture.mp4"));
    let resync = EventMessage::Control(ControlEventMessage {
        control_type: ControlType::Resync,
        seq_id: 5,
        timestamp: 10000,
        description: "Resync a media block".into(),
        data: Some(Data::from([
            ("media-id".to_string(), Value::from("video-block")),
            ("media-state".to_string(), Value::from(state.as_str())),
        ])),
    });
    let expected = table_iii(&state);
    if serialize(&resync).ok().as_deref() != Some(expected.as_bytes()) {
        problems.push("resync example does not encode exactly".into());
    }
    if deserialize(expected.as_bytes()).ok().as_ref() != Some(&resync) {
        problems.push("resync example does not decode".into());
    }
    let elapsed = started.elapsed();
    if elapsed > CORPUS_BUDGET {
        problems.push(format!("took {elapsed:?}"));
    }
    verdict(problems, || format!("{CORPUS} messages round-trip, both examples exact, {} ms", elapsed.as_millis()))
}

fn fuzz_runs() -> Vec<(u64, Duration, HarnessResult)> {
    FUZZ_SEEDS
        .map(|seed| {
            let started = Instant::now();
            let verdict = fuzz_session(seed, FUZZ_EVENTS, FUZZ_CLIENTS, None);
            (seed, started.elapsed(), verdict.result)
        })
        .collect()
}

fn criterion_2(runs: &[(u64, Duration, HarnessResult)]) -> Outcome {
    let mut problems = Vec::new();
    let mut slowest = Duration::ZERO;
    for (seed, elapsed, result) in runs {
        slowest = slowest.max(*elapsed);
        let tag = |p: &str| format!("seed {seed}: {p}");
        if *elapsed > FUZZ_BUDGET {
            problems.push(tag(&format!("took {elapsed:?}")));
        }
        problems.extend(result.divergences.iter().map(|d| tag(d)));
        if result.received.len() != FUZZ_CLIENTS {
            problems.push(tag(&format!("{} clients", result.received.len())));
        }
        let full: Vec<u64> = (0..result.log.len() as u64).collect();
        for (client, seqs) in &result.received {
            let first = seqs.first().copied().unwrap_or(0);
            if seqs[..] != full[first as usize..] {
                problems.push(tag(&format!("{client} received a gapped or reordered sequence")));
            }
        }
        let oracle = state_texts(&fold(&result.log));
        for (client, states) in &result.final_states {
            if *states != oracle {
                problems.push(tag(&format!("{client} final states differ from the fold oracle")));
            }
        }
    }
    verdict(problems, || format!("{} seeds x {FUZZ_CLIENTS} clients consistent, slowest seed {} ms", runs.len(), slowest.as_millis()))
}

fn persisted_run(scenario: &Scenario, dir: &std::path::Path, options: RunOptions) -> HarnessResult {
    let path = dir.join(format!("{}.log", scenario.name));
    run_scenario(scenario, &RunOptions { log_path: Some(path), ..options })
}

fn criterion_3(fixture_runs: &[HarnessResult], fuzz: &[(u64, Duration, HarnessResult)]) -> Outcome {
    let mut problems = Vec::new();
    let all = fixture_runs.iter().chain(fuzz.iter().map(|(_, _, r)| r));
    let mut count = 0;
    for result in all {
        count += 1;
        if !result.replay_equivalent {
            problems.push(format!("{} replay diverged: {:?}", result.scenario, result.divergences));
        }
    }
    verdict(problems, || format!("{count} logs replay byte-identical at pace 1 and 4 and across 3 seek patterns"))
}

/// Uplink event bytes summed straight from the log, without the meter.
fn logged_event_bytes(log: &[SessionLogEntry]) -> u64 {
    log.iter()
        .filter(|e| match &e.message {
            EventMessage::Media(_) => true,
            EventMessage::Control(c) => !matches!(c.control_type, ControlType::Join | ControlType::Resync | ControlType::AddMaterial),
        })
        .map(|e| wire_size(&e.message).unwrap_or(usize::MAX) as u64)
        .sum()
}

fn draw_seconds(log: &[SessionLogEntry]) -> BTreeMap<u64, u64> {
    let mut seconds = BTreeMap::new();
    for e in log {
        if e.message.type_name() == "draw" {
            *seconds.entry(e.received_at / 1000).or_default() += wire_size(&e.message).unwrap_or(usize::MAX) as u64;
        }
    }
    seconds
}

fn criterion_4(fixture_runs: &[HarnessResult]) -> Outcome {
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for result in fixture_runs {
        let name = &result.scenario;
        let report: &BandwidthReport = &result.report;
        let up = report.event_bytes_up();
        if up != logged_event_bytes(&result.log) {
            problems.push(format!("{name}: metered {up} B disagrees with the log"));
        }
        if up > EVENT_BYTES_MAX {
            problems.push(format!("{name}: {up} event bytes"));
        }
        summary.push(format!("{name} {up} B"));
        if name == "video" {
            for e in &result.log {
                let size = wire_size(&e.message).unwrap_or(usize::MAX);
                if e.message.type_name() != "draw" && size > MESSAGE_MAX {
                    problems.push(format!("video: #{} {} is {size} B", e.global_seq, e.message.type_name()));
                }
            }
            let peak = draw_seconds(&result.log).into_values().max().unwrap_or(0);
            if peak != report.peak_second_up("draw") {
                problems.push(format!("video: draw peak {peak} B disagrees with the meter"));
            }
            if peak > DRAW_SECOND_MAX {
                problems.push(format!("video: draw second of {peak} B"));
            }
            summary.push(format!("draw peak {peak} B/s"));
        }
        if name == "webpage" {
            let scenario = fixtures::webpage();
            let clients = result.received.len() as u64;
            let pages: u64 = scenario.assets.iter().map(|a| a.bytes).sum::<u64>() * clients;
            if report.bootstrap.bytes_down < pages {
                problems.push(format!("webpage: bootstrap {} B short of {pages} B of page loads", report.bootstrap.bytes_down));
            }
            if report.event_bytes_down() + report.event_bytes_up() >= pages {
                problems.push("webpage: page loads counted as event traffic".into());
            }
        }
    }
    verdict(problems, || summary.join(", "))
}

fn criterion_5(dir: &std::path::Path) -> Outcome {
    let mut problems = Vec::new();
    let mut probes = 0;
    for scenario in fixtures::all() {
        let name = &scenario.name;
        let result = persisted_run(
            &scenario,
            dir,
            RunOptions {
                clients: 3,
                seed: 5,
                late_join_at: Some(LATE_JOIN_MS),
                probe_at: Some(PROBE_MS),
                ..RunOptions::default()
            },
        );
        problems.extend(result.divergences.iter().map(|d| format!("{name}: {d}")));
        let Some(late) = result.final_states.get(LATE_JOINER) else {
            problems.push(format!("{name}: late joiner missing"));
            continue;
        };
        for (client, states) in &result.final_states {
            if states != late {
                problems.push(format!("{name}: {client} differs from the late joiner"));
            }
        }
        if result.received[LATE_JOINER].first().copied().unwrap_or(0) == 0 {
            problems.push(format!("{name}: late joiner saw the log from the start"));
        }
        if result.probes.len() != scenario.materials.len() {
            problems.push(format!("{name}: {} probes answered", result.probes.len()));
        }
        for p in &result.probes {
            probes += 1;
            if !p.matches_oracle {
                problems.push(format!("{name}: resync of {} at #{} differs from the oracle", p.media_id, p.global_seq));
            }
        }
    }
    verdict(problems, || format!("late joiners converge in 4 fixtures, {probes} resync probes match the oracle"))
}

fn criterion_6(dir: &std::path::Path, fixture_runs: &[HarnessResult]) -> Outcome {
    let mut problems = Vec::new();
    for result in fixture_runs {
        let name = &result.scenario;
        let path = dir.join(format!("{name}-recovered.log"));
        if let Err(e) = persist_log(&path, &result.log) {
            problems.push(format!("{name}: {e}"));
            continue;
        }
        match load_log(&path) {
            Ok(loaded) => {
                let states = state_texts(&fold(&loaded));
                if states != result.server_states {
                    problems.push(format!("{name}: recovered states differ"));
                }
                if result.final_states.values().any(|s| *s != states) {
                    problems.push(format!("{name}: recovered states differ from a client"));
                }
            }
            Err(e) => problems.push(format!("{name}: {e}")),
        }

        let text = encode_log(&result.log);
        let lines: Vec<&str> = text.lines().collect();
        for corrupt in [0, lines.len() / 2, lines.len() - 1] {
            let mut broken = lines.clone();
            let cut = &lines[corrupt][..lines[corrupt].len() / 2];
            broken[corrupt] = cut;
            let path = dir.join(format!("{name}-corrupt-{corrupt}.log"));
            std::fs::write(&path, broken.join("\n") + "\n").unwrap();
            match load_log(&path) {
                Err(e) if e.line() == Some(corrupt + 1) => {}
                Err(e) => problems.push(format!("{name}: corrupt line {} reported as {e}", corrupt + 1)),
                Ok(_) => problems.push(format!("{name}: corrupt line {} accepted", corrupt + 1)),
            }
        }
    }
    verdict(problems, || format!("{} fixtures recovered exactly, corrupt lines located", fixture_runs.len()))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let fixture_runs: Vec<HarnessResult> = fixtures::all()
        .iter()
        .map(|s| persisted_run(s, dir.path(), RunOptions { clients: 3, ..RunOptions::default() }))
        .collect();
    let fuzz = fuzz_runs();

    let outcomes = [
        ("1 protocol round-trip", criterion_1()),
        ("2 total-order consistency", criterion_2(&fuzz)),
        ("3 precise replay", criterion_3(&fixture_runs, &fuzz)),
        ("4 bandwidth", criterion_4(&fixture_runs)),
        ("5 late-join convergence", criterion_5(dir.path())),
        ("6 crash recovery", criterion_6(dir.path(), &fixture_runs)),
    ];
    let mut ok = true;
    for (name, outcome) in outcomes {
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(problems) => {
                ok = false;
                println!("FAIL criterion {name}");
                for p in problems.iter().take(20) {
                    println!("    {p}");
                }
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
