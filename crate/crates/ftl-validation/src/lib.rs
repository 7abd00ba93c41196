//! Minimal runner for the acceptance criteria: each check runs under a
//! time budget and reports one line.

use std::fmt;
use std::time::{Duration, Instant};

/// Result of one check body: whether it held, and a one-line summary.
pub type Verdict = Result<(bool, String), String>;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: String,
    pub title: String,
    pub held: bool,
    pub summary: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Outcome {
    pub fn within_budget(&self) -> bool {
        self.elapsed <= self.budget
    }

    pub fn passed(&self) -> bool {
        self.held && self.within_budget()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{tag}] criterion {}: {} | {} | {:.1}s of {:.0}s{}",
            self.id,
            self.title,
            self.summary,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs_f64(),
            if self.within_budget() { "" } else { " (over budget)" }
        )
    }
}

/// Runs `body`, timing it against `budget`. Errors count as failures.
pub fn check(id: &str, title: &str, budget: Duration, body: impl FnOnce() -> Verdict) -> Outcome {
    let start = Instant::now();
    let verdict = body();
    let elapsed = start.elapsed();
    let (held, summary) = match verdict {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome {
        id: id.into(),
        title: title.into(),
        held,
        summary,
        elapsed,
        budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_and_overruns_fail() {
        let ok = check("1", "t", Duration::from_secs(60), || Ok((true, "fine".into())));
        assert!(ok.passed());
        assert!(ok.to_string().starts_with("[PASS] criterion 1: t | fine |"));
        let err = check("2", "t", Duration::from_secs(60), || Err("boom".into()));
        assert!(!err.passed());
        assert!(err.to_string().contains("error: boom"));
        let slow = check("3", "t", Duration::ZERO, || {
            std::thread::sleep(Duration::from_millis(2));
            Ok((true, String::new()))
        });
        assert!(!slow.passed());
    }
}
