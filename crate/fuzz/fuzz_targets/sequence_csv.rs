#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_core::SequenceParams;

fuzz_target!(|text: &str| {
    let _ = SequenceParams::from_csv_str(text, 2.0, true, 20.64);
});
