#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_core::nn::read_mlp_checkpoint;

fuzz_target!(|data: &[u8]| {
    let _ = read_mlp_checkpoint(data);
});
