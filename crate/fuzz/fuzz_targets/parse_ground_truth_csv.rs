#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::corpus::parse_ground_truth_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_ground_truth_csv(data);
});
