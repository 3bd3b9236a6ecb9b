//! Acceptance criteria. Prints one `[PASS]`/`[FAIL]` line per criterion with
//! the measured and expected values, then exits non-zero if any failed. The
//! tolerances live in `berry_core::reproduce` next to each check.

use std::process::ExitCode;
use std::time::Instant;

use berry_core::reproduce::{run_check, ReproduceOptions, CHECKS};

const CRITERIA: [(u8, &str); 9] = [
    (1, "spin solid-angle law"),
    (2, "transition-function winding 2m"),
    (3, "spin bundle classes"),
    (4, "lambda dark bundle trivial"),
    (5, "non-abelian oracle equivalence"),
    (6, "planar topological phases"),
    (7, "flatness dichotomy"),
    (8, "convergence orders"),
    (9, "property suites"),
];

fn main() -> ExitCode {
    assert_eq!(CHECKS.map(|c| c.0), CRITERIA.map(|c| c.0));
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = vec![];
    let mut ran = 0;
    for (id, title) in CRITERIA {
        let name = CHECKS[usize::from(id) - 1].1;
        if filter.as_deref().is_some_and(|f| !name.contains(f) && !title.contains(f)) {
            continue;
        }
        ran += 1;
        let clock = Instant::now();
        let o = run_check(id, &ReproduceOptions::default());
        println!(
            "[{}] {id} {title} ({}): measured {} | expected {} | {:.1}s",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.measured,
            o.expected,
            clock.elapsed().as_secs_f64()
        );
        for d in &o.details {
            println!("    {d}");
        }
        if !o.passed {
            failed.push(id);
        }
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
