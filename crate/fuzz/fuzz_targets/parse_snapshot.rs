#![no_main]

use aigx_core::ui::{emit_snapshot, parse_snapshot};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(state) = parse_snapshot(data) {
        let again = parse_snapshot(&emit_snapshot(&state)).expect("emitted snapshot parses");
        assert_eq!(again, state);
    }
});
