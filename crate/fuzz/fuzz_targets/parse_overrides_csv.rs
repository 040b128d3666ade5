#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::thematic::parse_overrides_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_overrides_csv(data);
});
