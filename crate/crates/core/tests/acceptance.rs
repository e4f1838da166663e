use std::io::Write;

use cnls::selftest::{run, run_criterion, Harness, CRITERIA};

// Written straight to the stdout handle so the lines appear in the test log
// even when the harness captures `println!`.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

#[test]
fn acceptance_suite() {
    let report = run(&Harness::default());
    for c in &report.criteria {
        emit(&format!(
            "{c}  [{:.2} s, budget {} s]",
            c.elapsed.as_secs_f64(),
            c.budget.as_secs()
        ));
    }
    assert_eq!(report.criteria.len(), CRITERIA.len());
    for c in &report.criteria {
        assert!(c.passed, "criterion {} failed: {}", c.id, c.detail);
        assert!(
            c.elapsed <= c.budget,
            "criterion {} took {:?}, budget {:?}",
            c.id,
            c.elapsed,
            c.budget
        );
    }
}

#[test]
fn report_is_deterministic() {
    let h = Harness::default();
    let a = run(&h).text();
    let b = run(&h).text();
    assert_eq!(a, b);
    assert!(a.ends_with("10/10 criteria passed\n"));
}

#[test]
fn corrupted_weights_are_detected() {
    let faulty = run_criterion(
        1,
        &Harness {
            corrupt_weights: true,
        },
    );
    assert!(!faulty.passed, "{}", faulty.detail);
    assert!(run_criterion(1, &Harness::default()).passed);
}
