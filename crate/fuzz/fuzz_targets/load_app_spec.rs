#![no_main]

use aigx_core::sim::{emit_app_spec, load_app_spec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(spec) = load_app_spec(data) {
        assert_eq!(load_app_spec(&emit_app_spec(&spec)).unwrap(), spec);
    }
});
