#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::llm::parse_a1c_prediction;

fuzz_target!(|data: &[u8]| {
    let s = String::from_utf8_lossy(data);
    if let Some(v) = parse_a1c_prediction(&s).value {
        assert!(v.is_finite());
    }
});
