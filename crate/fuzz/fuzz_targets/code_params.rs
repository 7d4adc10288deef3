#![no_main]

use codemoments::params::CodeParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(p) = s.parse::<CodeParams>() {
            assert_eq!(p.weight() % 2, 0);
            assert!(p.checks() < p.n());
            assert_eq!(p.to_string().parse::<CodeParams>().unwrap(), p);
        }
    }
});
