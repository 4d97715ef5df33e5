#![no_main]

use aigx_core::llm::{parse_input_response, MAX_INPUT_CHARS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(text) = parse_input_response(data) {
        assert!(!text.is_empty());
        assert!(!text.contains('\n'));
        assert!(text.chars().count() <= MAX_INPUT_CHARS);
    }
});
