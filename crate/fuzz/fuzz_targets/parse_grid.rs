#![no_main]

use codemoments::params::{parse_grid, MAX_GRID_LEN};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(grid) = parse_grid(s) {
            assert!(grid.len() <= MAX_GRID_LEN);
            if s.contains(':') {
                assert!(grid.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
});
