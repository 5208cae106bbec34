//! Bookkeeping for the acceptance run in `tests/acceptance.rs`.
//!
//! Each criterion produces one [`Outcome`]; the runner prints every line and
//! fails if any criterion did.

use std::fmt;
use std::time::Duration;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub number: u32,
    pub title: &'static str,
    pub pass: bool,
    /// Measured values and the tolerances they were held to.
    pub detail: Vec<String>,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(
            f,
            "criterion {:>2} {verdict}  {} ({:.1} s)",
            self.number,
            self.title,
            self.elapsed.as_secs_f64()
        )?;
        for line in &self.detail {
            write!(f, "\n    {line}")?;
        }
        Ok(())
    }
}

/// Accumulates sub-checks for one criterion.
#[derive(Debug, Default)]
pub struct Checks {
    pub pass: bool,
    pub detail: Vec<String>,
}

impl Checks {
    pub fn new() -> Self {
        Checks {
            pass: true,
            detail: Vec::new(),
        }
    }

    /// Records `ok` together with a description of what was measured.
    pub fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        self.detail
            .push(format!("[{}] {what}", if ok { "ok" } else { "FAILED" }));
        self.pass &= ok;
    }

    pub fn note(&mut self, what: impl Into<String>) {
        self.detail.push(what.into());
    }
}
