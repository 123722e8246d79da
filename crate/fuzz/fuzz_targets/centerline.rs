#![no_main]

use libfuzzer_sys::fuzz_target;
use skelgrid::synth::{parse_centerline, write_centerline};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(voxels) = parse_centerline(text) {
        let mut out = Vec::new();
        write_centerline(&voxels, &mut out).unwrap();
        let again = parse_centerline(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(again, voxels);
    }
});
