#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::corpus::parse_patients_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_patients_csv(data);
});
