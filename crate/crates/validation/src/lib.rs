//! Bookkeeping for the acceptance run: each criterion prints one PASS or
//! FAIL line with its runtime against its budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

#[derive(Debug, Default)]
pub struct Report {
    outcomes: Vec<Outcome>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    /// Runs one criterion. `Ok` carries a pass detail, `Err` a failure
    /// detail; overrunning the budget or panicking also fails.
    pub fn check(
        &mut self,
        id: u32,
        title: &str,
        budget: Duration,
        f: impl FnOnce() -> Result<String, String>,
    ) -> &Outcome {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let elapsed = start.elapsed();
        let (mut passed, mut detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if elapsed > budget {
            passed = false;
            detail = format!("over budget; {detail}");
        }
        let outcome = Outcome {
            id,
            title: title.to_string(),
            passed,
            detail,
            elapsed,
            budget,
        };
        println!(
            "{} {:>2} {}: {} [{:.3}s of {}s]",
            if passed { "PASS" } else { "FAIL" },
            id,
            outcome.title,
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        self.outcomes.push(outcome);
        self.outcomes.last().expect("just pushed")
    }

    /// A note that is not itself a criterion.
    pub fn info(&self, id: u32, msg: &str) {
        println!("INFO {id:>2} {msg}");
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn finish(self) -> ExitCode {
        let passed = self.outcomes.iter().filter(|o| o.passed).count();
        println!(
            "acceptance: {passed} of {} criteria passed",
            self.outcomes.len()
        );
        if passed == self.outcomes.len() {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }
    }
}
