#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::corpus::{redact_numeric_a1c, verify_redaction};

fuzz_target!(|data: &[u8]| {
    let s = String::from_utf8_lossy(data);
    let report = verify_redaction(&s);
    assert_eq!(report.clean, report.residual.is_empty());
    // redaction removes everything the check would flag
    assert!(verify_redaction(&redact_numeric_a1c(&s)).clean);
});
