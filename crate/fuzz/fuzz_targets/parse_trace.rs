#![no_main]

use aigx_core::run::{parse_trace, parse_trace_record};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    for line in data.lines().take(4) {
        let _ = parse_trace_record(line);
    }
    if let Ok(trace) = parse_trace(data) {
        let _ = trace.require_complete();
        assert_eq!(parse_trace(&trace.to_jsonl()).unwrap(), trace);
    }
});
