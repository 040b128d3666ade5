#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::llm::parse_rating_block;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(block) = parse_rating_block(s) {
            assert!(block.rating == -1 || (1..=5).contains(&block.rating));
        }
    }
});
