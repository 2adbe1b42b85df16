//! Acceptance suite: runs the full verification battery and prints one
//! pass/fail line per criterion. The test fails if any criterion fails.

use spdgeo::verify::run_all;

#[test]
fn acceptance() {
    let results = run_all(7, None).expect("verification suite must run to completion");
    assert_eq!(results.len(), 14, "expected 14 acceptance criteria");
    let mut all_pass = true;
    for r in &results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] criterion {}: {} (expected {}, computed {}, tol {:.1e}, {:.2}s)",
            r.id, r.description, r.expected, r.computed, r.tolerance, r.runtime_s
        );
        all_pass &= r.pass;
    }
    assert!(all_pass, "one or more acceptance criteria failed");
}
