#![no_main]

use libfuzzer_sys::fuzz_target;
use skelgrid::skeleton::{from_json, to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(skel) = from_json(text) {
        let out = to_json(&skel);
        // re-encoding a decoded skeleton is a fixed point
        assert_eq!(to_json(&from_json(&out).unwrap()), out);
    }
});
