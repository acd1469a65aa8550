//! Acceptance gate: runs every verification criterion end to end and prints
//! one pass/fail line per criterion. The grids and tolerances are pinned
//! inside `kfree::verify`; this harness only orchestrates and asserts.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use kfree::verify;

#[test]
fn acceptance() {
    let mut results = Vec::new();
    for id in 1..=9u32 {
        results.push(verify::run_criterion(id));
    }
    let (perf, perf_report) = verify::check_sieve_performance();
    results.push(perf);

    let mut failures = Vec::new();
    for r in &results {
        let status = if r.passed { "pass" } else { "FAIL" };
        println!("criterion {:2} [{status}] {:<36} {}", r.id, r.name, r.detail);
        if !r.passed {
            failures.push(r.id);
        }
    }
    if let Some(rep) = perf_report {
        println!(
            "note: {:.2}x scaling at {} workers is informational; only the \
             single-worker cap is asserted",
            rep.speedup, rep.workers_multi
        );
    }
    assert!(failures.is_empty(), "failing criteria: {failures:?}");
}
