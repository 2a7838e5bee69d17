#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_core::matching::PhantomSpec;

fuzz_target!(|text: &str| {
    let _ = PhantomSpec::from_toml_str(text);
});
