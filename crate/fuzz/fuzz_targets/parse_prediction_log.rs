#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::control::{evaluate_accuracy, parse_prediction_log};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(preds) = parse_prediction_log(s) {
            if let Ok(t) = evaluate_accuracy("fuzz", &preds) {
                assert_eq!(t.corpus_size(), preds.len());
            }
        }
    }
});
