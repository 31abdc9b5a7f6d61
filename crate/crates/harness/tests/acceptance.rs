//! Runs every acceptance suite at full size and prints one line per criterion.

use collapse_harness::{run_suite, SuiteConfig, SUITES};

const SEED: u64 = 0;

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    for (i, name) in SUITES.iter().enumerate() {
        let cfg = SuiteConfig::for_suite(name, SEED).expect("known suite");
        let line = match run_suite(&cfg) {
            Ok(report) => {
                let worst = report
                    .checks
                    .iter()
                    .find(|c| !c.passed)
                    .or_else(|| report.checks.last())
                    .map(|c| format!("{}: {} vs {}", c.id, c.statistic, c.threshold))
                    .unwrap_or_default();
                let status = if report.passed { "PASS" } else { "FAIL" };
                if !report.passed {
                    failed.push(*name);
                }
                format!(
                    "{status} criterion {}: {name} ({} checks, {:.1} s; {worst})",
                    i + 1,
                    report.checks.len(),
                    report.runtime_ms / 1e3
                )
            }
            Err(e) => {
                failed.push(*name);
                format!("FAIL criterion {}: {name} (error: {e})", i + 1)
            }
        };
        println!("{line}");
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
