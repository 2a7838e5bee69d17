#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_core::bloch::SliceProfile;

fuzz_target!(|text: &str| {
    let _ = SliceProfile::from_csv_str(text);
});
