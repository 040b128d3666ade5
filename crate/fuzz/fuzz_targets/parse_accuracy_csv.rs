#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::control::{accuracy_csv, parse_accuracy_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(tables) = parse_accuracy_csv(s) {
            // what parses re-renders and parses to the same tables
            let again = parse_accuracy_csv(&accuracy_csv(&tables)).expect("rendered table parses");
            assert_eq!(again, tables);
        }
    }
});
