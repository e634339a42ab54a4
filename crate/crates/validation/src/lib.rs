//! Acceptance harness. The checks live in `tests/acceptance.rs`; this crate
//! only provides the reporting helper they share.

use std::io::Write;

/// Writes `criterion N: PASS|FAIL (detail)` straight to stdout so the line
/// survives the test harness's output capture.
pub fn report(criterion: u32, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let line = if detail.is_empty() {
        format!("criterion {criterion}: {status}\n")
    } else {
        format!("criterion {criterion}: {status} ({detail})\n")
    };
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}
