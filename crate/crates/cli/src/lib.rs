//! Command-line harness for the mimo-lab simulator: scenario files, the
//! simulate / equalize / calibrate / verify commands and their output files.

pub mod commands;
pub mod files;
pub mod report;
pub mod scenario;
pub mod suites;

pub use commands::{cmd_calibrate, cmd_equalize, cmd_simulate, output_dir};
pub use scenario::Scenario;

/// Exit status for a command that ran all checks to completion failing.
pub const EXIT_CHECKS_FAILED: i32 = 1;
/// Exit status for usage, configuration and I/O errors.
pub const EXIT_USAGE: i32 = 2;

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub passed: bool,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn pass(lines: Vec<String>) -> Self {
        Self { passed: true, lines }
    }

    pub fn fail(lines: Vec<String>) -> Self {
        Self { passed: false, lines }
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            EXIT_CHECKS_FAILED
        }
    }
}

/// Run one invariant suite and format its table.
pub fn cmd_verify(suite: &str) -> anyhow::Result<Outcome> {
    let rows = suites::run_suite(suite)?;
    let mut lines = vec![format!("{:<40} {:>12}    {:<11} {}", "check", "measured", "threshold", "result")];
    lines.extend(rows.iter().map(report::Check::table_row));
    Ok(if rows.iter().all(|c| c.passed) {
        Outcome::pass(lines)
    } else {
        Outcome::fail(lines)
    })
}
