use std::path::Path;

use mediasync_core::protocol::{EventMessage, Value};
use mediasync_core::session::encode_log;
use mediasync_harness::fixtures;
use mediasync_harness::gen::{fuzz_scenario, rng};
use mediasync_harness::runner::{check_expectations, check_replay, compare_states, run_scenario, RunOptions};
use mediasync_harness::scenario::Scenario;

#[test]
fn shipped_fixture_files_are_current() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for scenario in fixtures::all() {
        let path = dir.join(format!("{}.scn", scenario.name));
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text, scenario.to_text(), "{} is stale; regenerate with `mediasync-sim fixtures`", path.display());
        assert_eq!(Scenario::parse(&text).unwrap(), scenario);
    }
}

#[test]
fn runs_are_deterministic_per_seed() {
    let scenario = fuzz_scenario(3, 200, 3);
    let options = RunOptions { clients: 3, seed: 3, faults: 4, ..RunOptions::default() };
    let a = run_scenario(&scenario, &options);
    let b = run_scenario(&scenario, &options);
    assert_eq!(encode_log(&a.log), encode_log(&b.log));
    assert_eq!(a.report, b.report);
}

#[test]
fn tampered_live_state_is_reported() {
    let result = run_scenario(&fixtures::image(), &RunOptions::default());
    assert!(result.passed(), "{}", result.summary());
    let mut live = result.server_states.clone();
    let text = live.get_mut("image-block").unwrap();
    *text = text.replace("\"zoom\":1.0", "\"zoom\":1.5");
    assert_ne!(*text, result.server_states["image-block"]);

    let found = check_replay(&result.log, &live, &mut rng(1));
    assert!(found.iter().any(|d| d.contains("key `zoom`")), "{found:?}");
    let found = compare_states("a", &result.server_states, "b", &live);
    assert_eq!(found, vec!["`image-block`: a and b differ at key `zoom`".to_string()]);
}

#[test]
fn altered_log_no_longer_replays_to_the_live_state() {
    let result = run_scenario(&fixtures::pdf(), &RunOptions::default());
    let mut log = result.log.clone();
    let entry = log.iter_mut().rev().find(|e| e.message.type_name() == "scroll").unwrap();
    if let EventMessage::Media(m) = &mut entry.message {
        m.data.as_mut().unwrap().insert("scroll".into(), Value::num(0.9));
    }
    assert!(!check_replay(&log, &result.server_states, &mut rng(1)).is_empty());
}

#[test]
fn wrong_expectations_are_reported() {
    let mut scenario = fixtures::video();
    let result = run_scenario(&scenario, &RunOptions::default());
    assert!(check_expectations(&scenario, &result.server_states).is_empty());
    scenario.expected[0].value = serde_json::json!(true);
    let found = check_expectations(&scenario, &result.server_states);
    assert_eq!(found.len(), 1);
    assert!(found[0].contains("playing"), "{found:?}");
}
