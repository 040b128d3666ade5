#![no_main]

use libfuzzer_sys::fuzz_target;
use sdoh_core::llm::verify_quotes_in;

// Input: quotes, one per line, then a line `---`, then the text.
fuzz_target!(|data: &[u8]| {
    let s = String::from_utf8_lossy(data);
    let (quotes, text) = s.split_once("\n---\n").unwrap_or(("", &s));
    let quotes: Vec<String> = quotes.lines().map(str::to_string).collect();
    let checks = verify_quotes_in(&quotes, text);
    assert_eq!(checks.len(), quotes.len());
    for c in checks.iter().filter(|c| c.verified) {
        assert!(c.match_offset.is_some_and(|o| o <= text.chars().count()));
    }
});
