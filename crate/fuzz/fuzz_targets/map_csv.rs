#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_cli::artifacts::parse_map;

fuzz_target!(|text: &str| {
    if let Ok(map) = parse_map(text, "fuzz") {
        assert_eq!(map.t1.len(), map.width * map.height);
    }
});
