#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_core::GridSpec;

fuzz_target!(|text: &str| {
    if let Ok(spec) = GridSpec::from_toml_str(text) {
        let _ = spec.t1_values();
        let _ = spec.t2_values();
    }
});
