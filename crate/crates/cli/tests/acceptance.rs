//! Acceptance gate: every correctness criterion of the toolkit runs here,
//! one line of output per criterion, and the test fails if any line is a
//! FAIL. Criteria 1 through 7 are the library self-checks with their stated
//! tolerances and runtime budgets; criterion 8 runs the verify command end
//! to end and requires a clean exit within its budget.

use std::process::Command;
use std::time::Instant;

use graphldp_core::verify::{self, CheckOutcome};

struct Criterion {
    number: usize,
    outcome: CheckOutcome,
}

#[test]
fn acceptance() {
    let checks: [fn() -> CheckOutcome; 7] = [
        verify::check_duality,
        verify::check_zero_at_typical,
        verify::check_oracle_closure,
        verify::check_rate_convergence,
        verify::check_change_of_measure,
        verify::check_truncation,
        verify::check_count_report,
    ];
    let mut results: Vec<Criterion> = checks
        .iter()
        .enumerate()
        .map(|(i, check)| Criterion {
            number: i + 1,
            outcome: check(),
        })
        .collect();

    results.push(Criterion {
        number: 8,
        outcome: verify_command_outcome(),
    });

    let mut all_passed = true;
    for criterion in &results {
        println!("criterion {}: {}", criterion.number, verify::render(&criterion.outcome));
        all_passed &= criterion.outcome.passed;
    }
    assert!(all_passed, "at least one acceptance criterion failed");
}

/// Criterion 8: the verify command reruns criteria 1-7 behind the CLI and
/// must exit 0 in under five minutes.
fn verify_command_outcome() -> CheckOutcome {
    let started = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_graphldp"))
        .arg("verify")
        .output()
        .expect("verify command spawns");
    let seconds = started.elapsed().as_secs_f64();
    let stdout = String::from_utf8_lossy(&output.stdout);

    let exit_ok = output.status.code() == Some(0);
    let on_time = seconds < 300.0;
    let reported_all = stdout.contains("7 of 7 checks passed");
    CheckOutcome {
        name: "verify-command",
        passed: exit_ok && on_time && reported_all,
        seconds,
        detail: format!(
            "exit code {:?}, reported '{}'",
            output.status.code(),
            stdout
                .lines()
                .rev()
                .find(|l| !l.is_empty())
                .unwrap_or("<no output>")
        ),
    }
}
