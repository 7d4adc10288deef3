#![no_main]

use codemoments::params::parse_rational;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(q) = parse_rational(s) {
            // Display output must parse back to the same value.
            assert_eq!(parse_rational(&q.to_string()).unwrap(), q);
        }
    }
});
