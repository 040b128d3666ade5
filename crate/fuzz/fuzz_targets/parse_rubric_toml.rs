#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::RubricSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(set) = RubricSet::from_toml_str(s) {
            assert_eq!(set.len(), 15);
        }
    }
});
