#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::features::parse_feature_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_feature_csv(data);
});
