#![no_main]

use codemoments::params::parse_range;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok((lo, hi)) = parse_range(s) {
            assert!(lo <= hi);
        }
    }
});
