#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::rag::parse_ratings_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_ratings_csv(data);
});
