//! Acceptance suites for the workspace. Each suite checks one criterion
//! against oracles written independently of the code under test and
//! reports a one-line outcome; the `acceptance` test target runs them all
//! against their time budgets.

use std::time::Duration;

pub mod oracle;
pub mod suites;

/// Outcome detail on success, the first violated check on failure.
pub type SuiteResult = Result<String, String>;

pub struct Criterion {
    pub name: &'static str,
    pub budget: Duration,
    pub run: fn() -> SuiteResult,
}

/// Every acceptance criterion, in reporting order.
pub fn criteria() -> Vec<Criterion> {
    let c = |name, secs, run| Criterion {
        name,
        budget: Duration::from_secs(secs),
        run,
    };
    vec![
        c("metrics oracle suite", 10, suites::metrics as fn() -> SuiteResult),
        c("kappa suite", 5, suites::kappa),
        c("weak-supervision suite", 30, suites::weak_supervision),
        c("preprocessing suite", 30, suites::preprocessing),
        c("classifier desk-scale check", 120, suites::classifier),
        c("react suite with scripted doubles", 10, suites::react),
        c("end-to-end golden fixture", 30, suites::golden),
        c("service integration", 60, suites::service),
    ]
}

/// Fails the enclosing suite with a formatted message unless `cond` holds.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    }};
}
