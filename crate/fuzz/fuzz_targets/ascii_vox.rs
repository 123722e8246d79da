#![no_main]

use libfuzzer_sys::fuzz_target;
use skelgrid::io::{parse_ascii, to_ascii_bytes};

fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = parse_ascii(data) {
        let again = parse_ascii(&to_ascii_bytes(&grid)).expect("canonical output parses");
        assert_eq!(again, grid);
    }
});
