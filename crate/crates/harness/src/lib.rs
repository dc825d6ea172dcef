//! Scripted virtual clients for the mediasync session server: scenario
//! scripts, the shipped fixtures, seeded fuzzing, replay checks and
//! bandwidth reports.

pub mod fixtures;
pub mod fuzz;
pub mod gen;
pub mod live;
pub mod logreport;
pub mod mirror;
pub mod oracle;
pub mod runner;
pub mod scenario;

pub use fuzz::{fuzz_session, FuzzVerdict};
pub use runner::{run_scenario, HarnessResult, RunOptions};
pub use scenario::Scenario;
