//! Seeded random sessions with shrinking of failing scripts.

use std::path::{Path, PathBuf};

use mediasync_core::session::RolePolicy;

use crate::gen::fuzz_scenario;
use crate::runner::{run_scenario, HarnessResult, RunOptions};
use crate::scenario::Scenario;

#[derive(Debug)]
pub struct FuzzVerdict {
    pub seed: u64,
    pub result: HarnessResult,
    /// Smallest failing script found, when the run failed.
    pub minimized: Option<Scenario>,
    pub written: Option<PathBuf>,
}

impl FuzzVerdict {
    pub fn passed(&self) -> bool {
        self.result.passed()
    }
}

pub fn fuzz_options(seed: u64, event_count: usize, client_count: usize) -> RunOptions {
    RunOptions {
        clients: client_count.max(1),
        seed,
        policy: RolePolicy::AllParticipants,
        late_join_at: None,
        probe_at: None,
        faults: event_count / 50,
        log_path: None,
    }
}

/// Generates and runs one random session. On failure the script is shrunk
/// and, when `out_dir` is given, written there as `fuzz-<seed>.scn`.
pub fn fuzz_session(seed: u64, event_count: usize, client_count: usize, out_dir: Option<&Path>) -> FuzzVerdict {
    let scenario = fuzz_scenario(seed, event_count, client_count);
    let options = fuzz_options(seed, event_count, client_count);
    let result = run_scenario(&scenario, &options);
    if result.passed() {
        return FuzzVerdict {
            seed,
            result,
            minimized: None,
            written: None,
        };
    }
    let minimized = minimize(&scenario, |s| !run_scenario(s, &RunOptions { faults: 0, ..options.clone() }).passed());
    let written = out_dir.and_then(|dir| {
        let path = dir.join(format!("fuzz-{seed}.scn"));
        std::fs::create_dir_all(dir).ok()?;
        std::fs::write(&path, minimized.to_text()).ok()?;
        Some(path)
    });
    FuzzVerdict {
        seed,
        result,
        minimized: Some(minimized),
        written,
    }
}

/// Removes chunks of the script, halving the chunk size, while `fails`
/// keeps returning true.
pub fn minimize(scenario: &Scenario, mut fails: impl FnMut(&Scenario) -> bool) -> Scenario {
    let mut best = scenario.clone();
    if !fails(&best) {
        return best;
    }
    let mut chunk = best.script.len().div_ceil(2).max(1);
    loop {
        let mut start = 0;
        let mut shrunk = false;
        while start < best.script.len() {
            let mut candidate = best.clone();
            let end = (start + chunk).min(candidate.script.len());
            candidate.script.drain(start..end);
            if fails(&candidate) {
                best = candidate;
                shrunk = true;
            } else {
                start += chunk;
            }
        }
        if chunk == 1 && !shrunk {
            return best;
        }
        if !shrunk {
            chunk = chunk.div_ceil(2);
        }
    }
}
