//! Bookkeeping for the acceptance suite in `tests/acceptance.rs`: per-criterion
//! check collection and the one-line PASS/FAIL report.

use std::time::{Duration, Instant};

/// Outcome of one criterion.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

pub fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Collects failed checks of one criterion; keeps the first five.
#[derive(Default)]
pub struct Checks {
    failures: Vec<String>,
}

impl Checks {
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok && self.failures.len() < 5 {
            self.failures.push(what());
        }
    }

    /// Fails the criterion if more than `budget` has passed since `start`.
    pub fn within(&mut self, budget: Duration, start: Instant) {
        let took = start.elapsed();
        self.check(took <= budget, || format!("took {took:.1?}, budget {budget:?}"));
    }

    pub fn finish(self, ok_detail: String) -> Verdict {
        if self.failures.is_empty() {
            verdict(true, ok_detail)
        } else {
            verdict(false, self.failures.join("; "))
        }
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Prints the criterion line and returns whether it passed.
pub fn report(id: usize, name: &str, v: &Verdict, took: Duration) -> bool {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2} {name:<22} {:>7.1}s  {}", took.as_secs_f64(), v.detail);
    v.pass
}

pub fn timed(f: impl FnOnce() -> Verdict) -> (Verdict, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_keep_first_failures() {
        let mut c = Checks::default();
        c.check(true, || unreachable!());
        for i in 0..8 {
            c.check(false, || i.to_string());
        }
        let v = c.finish("ok".into());
        assert!(!v.pass);
        assert_eq!(v.detail, "0; 1; 2; 3; 4");
        assert!(Checks::default().finish("ok".into()).pass);
    }
}
