#![no_main]

use libfuzzer_sys::fuzz_target;
use pdfactor::io::{chain_to_json, parse_chain_json};

fuzz_target!(|data: &[u8]| {
    // certification is cubic in n; keep inputs small
    if data.len() > 4096 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = parse_chain_json(text) {
        let back = parse_chain_json(&chain_to_json(&c)).expect("written chain parses");
        assert_eq!(back.factors(), c.factors());
    }
});
