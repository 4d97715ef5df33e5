#![no_main]

use aigx_core::llm::parse_grouping_response;
use libfuzzer_sys::fuzz_target;
use std::collections::BTreeSet;

// first byte picks how many of ids 0..32 are candidates
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else {
        return;
    };
    let Ok(raw) = std::str::from_utf8(rest) else {
        return;
    };
    let candidates: Vec<u32> = (0..u32::from(n % 32)).collect();
    if let Ok(instruction) = parse_grouping_response(raw, &candidates) {
        let mut seen = BTreeSet::new();
        for g in &instruction.groups {
            for id in &g.members {
                assert!(candidates.contains(id));
                assert!(seen.insert(*id), "groups overlap");
            }
        }
    }
});
