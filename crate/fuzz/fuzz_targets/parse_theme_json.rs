#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::llm::parse_theme_json;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(parse) = parse_theme_json(s) {
            // every accepted code keeps a non-empty name
            assert!(parse.codes.iter().all(|c| !c.code.trim().is_empty()));
        }
    }
});
