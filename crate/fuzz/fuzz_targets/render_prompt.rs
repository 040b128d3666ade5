#![no_main]

use std::collections::BTreeMap;

use libfuzzer_sys::fuzz_target;
use sdoh_core::llm::{render_prompt, PromptTemplate, TemplateName};

// First byte picks the template; the rest is `key=value` lines.
fuzz_target!(|data: &[u8]| {
    let Some((&pick, rest)) = data.split_first() else { return };
    let name = TemplateName::ALL[pick as usize % TemplateName::ALL.len()];
    let text = String::from_utf8_lossy(rest);
    let bindings: BTreeMap<String, String> = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let _ = render_prompt(&PromptTemplate::builtin(name), &bindings);
});
