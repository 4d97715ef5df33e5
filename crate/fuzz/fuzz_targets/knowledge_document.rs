#![no_main]

use aigx_core::knowledge::Knowledge;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(k) = Knowledge::from_document(data) {
        let _ = k.check_invariants();
        let _ = k.to_document();
    }
});
