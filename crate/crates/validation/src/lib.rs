//! Reporting helpers for the acceptance suite in `tests/acceptance.rs`.
//!
//! Each criterion prints one `[PASS]` or `[FAIL]` line per check, `[NOTE]`
//! lines for context and `[DIAG]` lines for non-gating diagnostics. The suite
//! lives in its own package so that `cargo test --workspace` runs every other
//! test binary before it.

pub struct Report {
    criterion: &'static str,
    failures: Vec<String>,
}

impl Report {
    pub fn new(criterion: &'static str) -> Self {
        Report { criterion, failures: Vec::new() }
    }

    pub fn check(&mut self, ok: bool, what: String) {
        println!("[{}] {} {what}", if ok { "PASS" } else { "FAIL" }, self.criterion);
        if !ok {
            self.failures.push(what);
        }
    }

    pub fn note(&self, what: String) {
        println!("[NOTE] {} {what}", self.criterion);
    }

    /// Panics listing the failed checks, if any.
    pub fn finish(self) {
        assert!(self.failures.is_empty(), "{} failed:\n{}", self.criterion, self.failures.join("\n"));
    }
}

pub fn diag(what: String) {
    println!("[DIAG] C9 {what}");
}
