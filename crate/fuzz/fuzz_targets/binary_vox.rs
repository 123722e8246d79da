#![no_main]

use libfuzzer_sys::fuzz_target;
use skelgrid::io::{parse_binary, to_binary_bytes};

fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = parse_binary(data) {
        assert_eq!(parse_binary(&to_binary_bytes(&grid)).unwrap(), grid);
    }
});
