//! Prints one PASS/FAIL line per acceptance criterion with its runtime and
//! budget. Exits non-zero if any criterion fails or overruns its budget.

use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let mut failed = 0;
    for c in lori_acceptance::criteria() {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let timing = format!("{:.2}s of {}s", elapsed.as_secs_f64(), c.budget.as_secs());
        let line = match outcome {
            Ok(detail) if elapsed <= c.budget => format!("PASS {} ({timing}): {detail}", c.name),
            Ok(detail) => format!("FAIL {} ({timing}, over budget): {detail}", c.name),
            Err(reason) => format!("FAIL {} ({timing}): {reason}", c.name),
        };
        failed += usize::from(line.starts_with("FAIL"));
        println!("{line}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
