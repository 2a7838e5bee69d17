#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_cli::RunConfig;

fuzz_target!(|text: &str| {
    let _ = RunConfig::from_toml_str(text);
});
