#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::models::FittedModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(model) = FittedModel::from_json(s) {
            let _ = FittedModel::from_json(&model.to_json()).expect("re-serialised model loads");
        }
    }
});
