#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::llm::{parse_factor_bullets, FactorBullets};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let FactorBullets::Items { bullets, .. } = parse_factor_bullets(s) {
            assert!(bullets.iter().all(|b| !b.keyword.trim().is_empty()));
        }
    }
});
