#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_cli::artifacts::parse_timing;

fuzz_target!(|text: &str| {
    let _ = parse_timing(text, "fuzz");
});
